#ifndef PWDFT_CELL_HPP
#define PWDFT_CELL_HPP

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace pwdft {

/// Cubic periodic simulation cell [0,L)^3 with lattice L*Z^3 and dual
/// lattice (2*pi/L)*Z^3.
struct CellSpec {
  double length;  // L in Bohr

  explicit CellSpec(double L) : length(L) {
    if (!(L > 0.0)) throw std::invalid_argument("CellSpec: L must be positive");
  }

  double volume() const { return length * length * length; }

  /// Dual lattice spacing 2*pi/L.
  double dualSpacing() const { return 2.0 * M_PI / length; }

  /// Wavevector k = (2*pi/L) * n for an integer triple n.
  Eigen::Vector3d wavevector(const Eigen::Vector3i& n) const {
    return dualSpacing() * n.cast<double>();
  }

  double kSquared(const Eigen::Vector3i& n) const {
    const double s = dualSpacing();
    return s * s * static_cast<double>(n.squaredNorm());
  }

  bool operator==(const CellSpec& o) const { return length == o.length; }
};

/// Cutoff index from a cutoff energy: N_c = floor(sqrt(2*E_c) * L / (2*pi)).
inline int cutoffIndexFromEnergy(double ec, const CellSpec& cell) {
  if (ec < 0.0) throw std::invalid_argument("cutoff energy must be nonnegative");
  return static_cast<int>(std::floor(std::sqrt(2.0 * ec) * cell.length / (2.0 * M_PI)));
}

/// Cutoff energy E_c = (1/2) * (2*pi*N_c/L)^2 associated with a cutoff index.
inline double cutoffEnergyFromIndex(int nc, const CellSpec& cell) {
  const double k = cell.dualSpacing() * nc;
  return 0.5 * k * k;
}

}  // namespace pwdft

#endif
