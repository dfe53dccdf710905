#ifndef PWDFT_NORMS_HPP
#define PWDFT_NORMS_HPP

#include <cmath>
#include <utility>

#include "pwdft/field.hpp"
#include "pwdft/transforms.hpp"
#include "pwdft/util.hpp"

namespace pwdft {

/// Periodic Sobolev norm (sum_k (1+|k|^2)^s |c_k|^2)^{1/2}; any real s,
/// negative values give the dual norms.
inline double sobolevNorm(const FourierField& f, double s) {
  KahanSum acc;
  const auto& basis = f.basis();
  for (int i = 0; i < basis.size(); ++i) {
    const double k2 = basis.cell().kSquared(basis.index(i));
    acc.add(std::pow(1.0 + k2, s) * std::norm(f.coeffs()[i]));
  }
  return std::sqrt(acc.value());
}

/// H^s norm of the difference of two fields (union of index sets).
inline double sobolevDistance(const FourierField& a, const FourierField& b, double s) {
  KahanSum acc;
  const auto& ba = a.basis();
  for (int i = 0; i < ba.size(); ++i) {
    const double k2 = ba.cell().kSquared(ba.index(i));
    acc.add(std::pow(1.0 + k2, s) * std::norm(a.coeffs()[i] - b.coeff(ba.index(i))));
  }
  const auto& bb = b.basis();
  for (int i = 0; i < bb.size(); ++i) {
    if (ba.contains(bb.index(i))) continue;
    const double k2 = bb.cell().kSquared(bb.index(i));
    acc.add(std::pow(1.0 + k2, s) * std::norm(b.coeffs()[i]));
  }
  return std::sqrt(acc.value());
}

/// Best-approximation error and its a priori bound: returns
/// (||f - P_Nc f||_{H^r}, (L/2pi)^{s-r} Nc^{-(s-r)} ||f||_{H^s}) for r <= s.
inline std::pair<double, double> hsBestError(const FourierField& f, int nc, double r, double s) {
  if (r > s) throw std::invalid_argument("hsBestError: requires r <= s");
  const double kcut = f.cell().dualSpacing() * nc;
  KahanSum tail;
  const auto& basis = f.basis();
  for (int i = 0; i < basis.size(); ++i) {
    const double k2 = basis.cell().kSquared(basis.index(i));
    if (k2 <= kcut * kcut) continue;
    tail.add(std::pow(1.0 + k2, r) * std::norm(f.coeffs()[i]));
  }
  const double lhs = std::sqrt(tail.value());
  double bound = std::numeric_limits<double>::infinity();
  if (nc > 0)
    bound = std::pow(f.cell().length / (2.0 * M_PI), s - r) * std::pow(double(nc), -(s - r)) *
            sobolevNorm(f, s);
  return {lhs, bound};
}

}  // namespace pwdft

#endif
