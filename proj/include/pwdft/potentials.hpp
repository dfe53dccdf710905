#ifndef PWDFT_POTENTIALS_HPP
#define PWDFT_POTENTIALS_HPP

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "pwdft/field.hpp"
#include "pwdft/transforms.hpp"

namespace pwdft {

/// Real-valued local (multiplicative) potential described by a procedural
/// Fourier coefficient generator with certified algebraic decay
/// |V_k| <= C |k|^{-m}. Coefficients are never materialized beyond the mode
/// range |n| <= modeRange, so very slowly decaying potentials stay cheap.
class LocalPotential {
 public:
  using Generator = std::function<Complex(const Eigen::Vector3i&)>;

  LocalPotential(const CellSpec& cell, Generator gen, double decayExponent, double decayConstant,
                 int modeRange)
      : cell_(cell),
        gen_(std::move(gen)),
        m_(decayExponent),
        c_(decayConstant),
        nMax_(modeRange) {
    if (!(m_ > 3.0)) throw std::invalid_argument("LocalPotential: decay exponent must exceed 3");
    if (c_ < 0.0) throw std::invalid_argument("LocalPotential: decay constant must be nonnegative");
    if (nMax_ < 0) throw std::invalid_argument("LocalPotential: mode range must be nonnegative");
  }

  const CellSpec& cell() const { return cell_; }
  double decayExponent() const { return m_; }
  double decayConstant() const { return c_; }
  int modeRange() const { return nMax_; }

  /// Coefficient with respect to e_k; zero outside the |n| <= modeRange ball
  /// and at n = 0 (potentials are stored in the zero-mean gauge up to the
  /// generator's choice).
  Complex coefficient(const Eigen::Vector3i& n) const {
    if (n.squaredNorm() > static_cast<long>(nMax_) * nMax_) return Complex(0.0, 0.0);
    return gen_(n);
  }

  /// Materializes the potential on a basis (modes outside the range are zero).
  FourierField onBasis(const BasisPtr& basis) const;

  /// Folded coefficients sum_K V_{q + Ng K} over the full dual lattice, for q
  /// in the centered box of half-width `halfWidth` (<= (ng-1)/2). These are
  /// the e_k coefficients of the grid interpolant I_Ng(V) restricted to that
  /// box, computed without ever touching an Ng^3 grid.
  BoxTensor foldedBox(int ng, int halfWidth) const;

  /// Largest |V_k| |k|^m over the stored modes; always <= decayConstant.
  double decayCertificate() const;

  /// Pointwise sum of two potentials (exponent = min, constant = sum).
  friend LocalPotential operator+(const LocalPotential& a, const LocalPotential& b);

 private:
  CellSpec cell_;
  Generator gen_;
  double m_;
  double c_;
  int nMax_;
};

/// Deterministic unit phase u(n) with Hermitian pairing u(-n) = conj(u(n)).
Complex hermitianPhase(const Eigen::Vector3i& n, std::uint64_t seed);

/// Synthetic potential V_k = C |k|^{-m} u(k), V_0 = 0, with unit phases u
/// derived deterministically from the seed.
LocalPotential synthPotential(const CellSpec& cell, double m, double amplitude, int modeRange,
                              std::uint64_t seed);

/// Periodized Gaussian well depth * exp(-|x - center|^2 / (2 width^2)) with
/// analytic coefficients V_k = |Gamma|^{-1/2} depth (2 pi)^{3/2} width^3
/// exp(-|k|^2 width^2 / 2) exp(-i k.center), truncated where the tail is
/// below round-off. The nominal decay exponent only feeds harness
/// bookkeeping; the certified constant is the sharp analytic envelope max.
LocalPotential gaussianPotential(const CellSpec& cell, double depth, double width,
                                 const Eigen::Vector3d& center, double nominalExponent = 5.0);

/// Samples a potential on the Ng^3 grid (folding handles modes beyond the
/// grid Nyquist box; the result equals pointwise evaluation of V).
GridField potentialOnGrid(const LocalPotential& v, int ng);

/// Exchange-correlation energy density e_xc(rho) per unit volume and its
/// density derivatives. Variants: none (Hartree, identically zero), x-alpha
/// (e_xc = -C_X rho^{4/3}), or a smooth custom callable.
class XCFunctional {
 public:
  enum class Kind { None, XAlpha, Custom };

  static XCFunctional none() { return XCFunctional(Kind::None, 0.0, nullptr, 1.0); }

  static XCFunctional xAlpha(double cx) {
    if (!(cx > 0.0)) throw std::invalid_argument("XCFunctional: C_X must be positive");
    return XCFunctional(Kind::XAlpha, cx, nullptr, 1.0 / 3.0);
  }

  /// Custom smooth functional; `f(rho, order)` must supply orders 0..3 and
  /// satisfy f(0,0) = f(0,1) = 0.
  static XCFunctional custom(std::function<double(double, int)> f, double alpha) {
    if (!f) throw std::invalid_argument("XCFunctional: callable required");
    if (!(alpha > 0.0 && alpha <= 1.0))
      throw std::invalid_argument("XCFunctional: alpha must lie in (0,1]");
    return XCFunctional(Kind::Custom, 0.0, std::move(f), alpha);
  }

  Kind kind() const { return kind_; }
  bool isNone() const { return kind_ == Kind::None; }
  double alpha() const { return alpha_; }

  /// e_xc (order 0), de/drho (1), d2e/drho2 (2); order 3 only for Custom.
  double eval(double rho, int order) const;

 private:
  XCFunctional(Kind k, double cx, std::function<double(double, int)> f, double alpha)
      : kind_(k), cx_(cx), f_(std::move(f)), alpha_(alpha) {}

  Kind kind_;
  double cx_;
  std::function<double(double, int)> f_;
  double alpha_;
};

/// Separable nonlocal pseudopotential: V_nl phi = sum_j (chi_j, phi) chi_j.
/// Empty set means a purely local pseudopotential.
struct NonlocalProjectorSet {
  std::vector<FourierField> projectors;

  int count() const { return static_cast<int>(projectors.size()); }
};

/// Rank-M symmetric PSD action, projected onto phi's basis.
FourierField applyNonlocal(const NonlocalProjectorSet& p, const FourierField& phi);

/// Smooth synthetic projector with coefficients
/// amplitude (1+|n|^2)^{-decay/2} u(n); decay should match the local
/// potential's exponent minus 3/2.
FourierField synthProjector(const BasisPtr& basis, double decay, double amplitude,
                            std::uint64_t seed);

/// Smooth nonnegative core density.
struct CoreDensity {
  FourierField rho;

  static CoreDensity zero(const CellSpec& cell) {
    return CoreDensity{FourierField(PlanewaveBasis::ball(cell, 0))};
  }

  bool isZero() const { return rho.l2Norm() == 0.0; }

  /// Smallest grid value; nonnegativity verification hook.
  double minOnGrid(int ng) const;
};

/// Periodized Gaussian blob of the given total charge, nonnegative.
CoreDensity gaussianCoreDensity(const CellSpec& cell, double charge, double width,
                                const Eigen::Vector3d& center);

}  // namespace pwdft

#endif
