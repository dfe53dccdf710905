#ifndef PWDFT_TESTS_SUPPORT_HPP
#define PWDFT_TESTS_SUPPORT_HPP

// Test-only helpers: seeded random fields and slow reference oracles that
// stay independent of the production transform path.

#include <cmath>
#include <complex>
#include <vector>

#include "pwdft/basis.hpp"
#include "pwdft/field.hpp"
#include "pwdft/util.hpp"

namespace pwdft::testing {

/// Deterministic unit phase for a mode, Hermitian-paired: u(-n) = conj(u(n)).
inline Complex modePhase(const Eigen::Vector3i& n, std::uint64_t seed) {
  Eigen::Vector3i rep = n;
  bool flip = false;
  if (rep.x() < 0 || (rep.x() == 0 && (rep.y() < 0 || (rep.y() == 0 && rep.z() < 0)))) {
    rep = -rep;
    flip = true;
  }
  std::uint64_t h = seed;
  h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(rep.x()) + (1 << 20)));
  h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(rep.y()) + (1 << 20)));
  h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(rep.z()) + (1 << 20)));
  const double theta = 2.0 * M_PI * uniformFromBits(h);
  Complex u = std::polar(1.0, theta);
  return flip ? std::conj(u) : u;
}

/// Random real-valued field with |c_n| = (1+|n|^2)^{-p/2}, Hermitian symmetric.
inline FourierField randomField(const BasisPtr& basis, std::uint64_t seed, double decay = 0.0) {
  FourierField f(basis);
  for (int i = 0; i < basis->size(); ++i) {
    const Eigen::Vector3i& n = basis->index(i);
    const double mag = std::pow(1.0 + n.cast<double>().squaredNorm(), -decay / 2.0);
    Complex c = mag * modePhase(n, seed);
    if (n.isZero()) c = Complex(c.real(), 0.0);
    f.coeffs()[i] = c;
  }
  return f;
}

/// Direct pointwise evaluation of a field at an arbitrary position (slow).
inline double evaluateAt(const FourierField& f, const Eigen::Vector3d& x) {
  Complex acc(0.0, 0.0);
  const auto& basis = f.basis();
  for (int i = 0; i < basis.size(); ++i) {
    const Eigen::Vector3d k = basis.cell().wavevector(basis.index(i));
    acc += f.coeffs()[i] * std::polar(1.0, k.dot(x));
  }
  return (acc / std::sqrt(f.cell().volume())).real();
}

/// Direct sampling of a field on the N^3 grid (slow reference for toGrid).
inline GridField sampleOnGrid(const FourierField& f, int gridSize) {
  GridField g(f.cell(), gridSize);
  for (int x = 0; x < gridSize; ++x)
    for (int y = 0; y < gridSize; ++y)
      for (int z = 0; z < gridSize; ++z) g(x, y, z) = evaluateAt(f, g.point(x, y, z));
  return g;
}

/// Naive O(N^6) discrete Fourier transform, the cross-validation oracle for
/// the production dft path; keep gridSize <= 9.
inline FourierField naiveDft(const GridField& g) {
  const int N = g.gridSize();
  const int h = (N - 1) / 2;
  auto basis = PlanewaveBasis::box(g.cell(), N);
  FourierField out(basis);
  const double L = g.cell().length;
  for (int i = 0; i < basis->size(); ++i) {
    const Eigen::Vector3d k = g.cell().wavevector(basis->index(i));
    Complex acc(0.0, 0.0);
    for (int x = 0; x < N; ++x)
      for (int y = 0; y < N; ++y)
        for (int z = 0; z < N; ++z) {
          const Eigen::Vector3d r(L * x / N, L * y / N, L * z / N);
          acc += g(x, y, z) * std::polar(1.0, -k.dot(r));
        }
    out.coeffs()[i] = acc / (static_cast<double>(N) * N * N);
  }
  (void)h;
  return out;
}

/// Folds a field's modes onto one N_g-period (n mod N_g mapped into the
/// centered box). Sampling the folded field on the N_g grid equals sampling
/// the original field there.
inline FourierField foldToBox(const FourierField& f, int gridSize) {
  auto basis = PlanewaveBasis::box(f.cell(), gridSize);
  FourierField out(basis);
  const int h = (gridSize - 1) / 2;
  const auto& src = f.basis();
  for (int i = 0; i < src.size(); ++i) {
    Eigen::Vector3i n = src.index(i);
    for (int d = 0; d < 3; ++d) {
      int r = n[d] % gridSize;
      if (r > h) r -= gridSize;
      if (r < -h) r += gridSize;
      n[d] = r;
    }
    out.coeffs()[basis->find(n)] += f.coeffs()[i];
  }
  return out;
}

/// Least-squares slope of log(y) against log(x); local to tests.
inline double logLogSlope(const std::vector<std::pair<double, double>>& pts) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : pts) {
    const double lx = std::log(x), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = static_cast<double>(pts.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace pwdft::testing

#endif
