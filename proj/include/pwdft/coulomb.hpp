#ifndef PWDFT_COULOMB_HPP
#define PWDFT_COULOMB_HPP

#include "pwdft/field.hpp"
#include "pwdft/util.hpp"

namespace pwdft {

/// Periodic charge distribution; the total charge is |Gamma|^{1/2} * rho_0.
struct ChargeDensity {
  FourierField rho;

  explicit ChargeDensity(FourierField f) : rho(std::move(f)) {}

  double totalCharge() const { return integral(rho); }
};

/// Periodic Coulomb bilinear form
///   D(rho, rho') = 4*pi * sum_{k != 0} |k|^{-2} conj(rho_k) rho'_k.
/// Symmetric, positive semidefinite; the k=0 mode never enters.
inline double dGamma(const ChargeDensity& a, const ChargeDensity& b) {
  KahanSum acc;
  const auto& basis = a.rho.basis();
  for (int i = 0; i < basis.size(); ++i) {
    const Eigen::Vector3i& n = basis.index(i);
    if (n.isZero()) continue;
    const Complex other = b.rho.coeff(n);
    if (other == Complex(0.0, 0.0)) continue;
    const double k2 = basis.cell().kSquared(n);
    acc.add((std::conj(a.rho.coeffs()[i]) * other).real() / k2);
  }
  return 4.0 * M_PI * acc.value();
}

/// Periodic Coulomb potential: V_k = 4*pi*|k|^{-2} rho_k for k != 0, V_0 = 0.
/// Solves -Lap V = 4*pi*(rho - mean) with zero-mean normalization.
inline FourierField coulombPotential(const ChargeDensity& rho) {
  FourierField v(rho.rho.basisPtr());
  const auto& basis = v.basis();
  for (int i = 0; i < basis.size(); ++i) {
    const Eigen::Vector3i& n = basis.index(i);
    if (n.isZero()) continue;  // zero-mean gauge, never divided
    v.coeffs()[i] = 4.0 * M_PI * rho.rho.coeffs()[i] / basis.cell().kSquared(n);
  }
  return v;
}

}  // namespace pwdft

#endif
