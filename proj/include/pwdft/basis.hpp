#ifndef PWDFT_BASIS_HPP
#define PWDFT_BASIS_HPP

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "pwdft/cell.hpp"

namespace pwdft {

/// Truncated planewave index set on the dual lattice.
///
/// Two flavours are used throughout:
///   - Ball:  { k : |k| <= 2*pi*Nc/L }, the variational space V_Nc;
///   - Box:   { k : |k|_inf <= (2*pi/L)*(Ng-1)/2 }, the interpolation
///            space W_Ng (Ng odd only).
///
/// Modes are stored in lexicographic order over the integer triple
/// (nx, ny, nz), each component running from -n_max to n_max. The order is
/// part of the on-disk field format.
class PlanewaveBasis {
 public:
  enum class Kind { Ball, Box };

  static std::shared_ptr<const PlanewaveBasis> ball(const CellSpec& cell, int nc) {
    if (nc < 0) throw std::invalid_argument("PlanewaveBasis: Nc must be nonnegative");
    return std::shared_ptr<const PlanewaveBasis>(new PlanewaveBasis(cell, Kind::Ball, nc, 0));
  }

  static std::shared_ptr<const PlanewaveBasis> box(const CellSpec& cell, int ng) {
    if (ng < 1 || ng % 2 == 0)
      throw std::invalid_argument("PlanewaveBasis: Ng must be odd and >= 1");
    return std::shared_ptr<const PlanewaveBasis>(new PlanewaveBasis(cell, Kind::Box, 0, ng));
  }

  const CellSpec& cell() const { return cell_; }
  Kind kind() const { return kind_; }
  int cutoffIndex() const { return nc_; }
  int gridSize() const { return ng_; }

  /// Half-width of the enclosing integer box (Nc for a ball, (Ng-1)/2 for a box).
  int halfWidth() const { return kind_ == Kind::Ball ? nc_ : (ng_ - 1) / 2; }

  int size() const { return static_cast<int>(indices_.size()); }
  const std::vector<Eigen::Vector3i>& indices() const { return indices_; }
  const Eigen::Vector3i& index(int i) const { return indices_[static_cast<size_t>(i)]; }

  /// Position of an integer triple in the stored order, or -1 if absent.
  int find(const Eigen::Vector3i& n) const {
    auto it = lookup_.find(pack(n));
    return it == lookup_.end() ? -1 : it->second;
  }

  bool contains(const Eigen::Vector3i& n) const { return find(n) >= 0; }

  bool sameAs(const PlanewaveBasis& o) const {
    return kind_ == o.kind_ && nc_ == o.nc_ && ng_ == o.ng_ && cell_ == o.cell_;
  }

 private:
  PlanewaveBasis(const CellSpec& cell, Kind kind, int nc, int ng)
      : cell_(cell), kind_(kind), nc_(nc), ng_(ng) {
    const int h = halfWidth();
    const long nc2 = static_cast<long>(nc) * nc;
    indices_.reserve(static_cast<size_t>(2 * h + 1) * (2 * h + 1));
    for (int nx = -h; nx <= h; ++nx)
      for (int ny = -h; ny <= h; ++ny)
        for (int nz = -h; nz <= h; ++nz) {
          if (kind_ == Kind::Ball) {
            const long r2 = static_cast<long>(nx) * nx + static_cast<long>(ny) * ny +
                            static_cast<long>(nz) * nz;
            if (r2 > nc2) continue;
          }
          indices_.emplace_back(nx, ny, nz);
        }
    lookup_.reserve(indices_.size());
    for (size_t i = 0; i < indices_.size(); ++i)
      lookup_.emplace(pack(indices_[i]), static_cast<int>(i));
  }

  static std::uint64_t pack(const Eigen::Vector3i& n) {
    const auto u = [](int v) { return static_cast<std::uint64_t>(v + (1 << 20)); };
    return (u(n.x()) << 42) | (u(n.y()) << 21) | u(n.z());
  }

  CellSpec cell_;
  Kind kind_;
  int nc_;
  int ng_;
  std::vector<Eigen::Vector3i> indices_;
  std::unordered_map<std::uint64_t, int> lookup_;
};

using BasisPtr = std::shared_ptr<const PlanewaveBasis>;

}  // namespace pwdft

#endif
