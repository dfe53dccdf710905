#ifndef PWDFT_FIELD_HPP
#define PWDFT_FIELD_HPP

#include <complex>
#include <stdexcept>

#include <Eigen/Dense>

#include "pwdft/basis.hpp"

namespace pwdft {

using Complex = std::complex<double>;

/// Real-valued periodic field stored as Fourier coefficients with respect to
/// the orthonormal planewaves e_k = |Gamma|^{-1/2} exp(i k.x).
///
/// Hermitian symmetry c_{-k} = conj(c_k) is an invariant; coefficients
/// outside the basis index set are implicitly zero.
class FourierField {
 public:
  FourierField() = default;

  explicit FourierField(BasisPtr basis)
      : basis_(std::move(basis)), coeffs_(Eigen::VectorXcd::Zero(basis_->size())) {}

  FourierField(BasisPtr basis, Eigen::VectorXcd coeffs)
      : basis_(std::move(basis)), coeffs_(std::move(coeffs)) {
    if (coeffs_.size() != basis_->size())
      throw std::invalid_argument("FourierField: coefficient count mismatch");
  }

  const PlanewaveBasis& basis() const { return *basis_; }
  BasisPtr basisPtr() const { return basis_; }
  const CellSpec& cell() const { return basis_->cell(); }

  const Eigen::VectorXcd& coeffs() const { return coeffs_; }
  Eigen::VectorXcd& coeffs() { return coeffs_; }

  Complex coeff(const Eigen::Vector3i& n) const {
    const int i = basis_->find(n);
    return i < 0 ? Complex(0.0, 0.0) : coeffs_[i];
  }

  void setCoeff(const Eigen::Vector3i& n, Complex value) {
    const int i = basis_->find(n);
    if (i < 0) throw std::out_of_range("FourierField::setCoeff: mode outside basis");
    coeffs_[i] = value;
  }

  /// Sets a Hermitian pair c_k = value, c_{-k} = conj(value).
  void setModePair(const Eigen::Vector3i& n, Complex value) {
    setCoeff(n, value);
    setCoeff(-n, std::conj(value));
  }

  /// Largest violation of c_{-k} = conj(c_k) over the index set.
  double hermitianDefect() const {
    double worst = 0.0;
    const auto& idx = basis_->indices();
    for (size_t i = 0; i < idx.size(); ++i) {
      const int j = basis_->find(-idx[i]);
      const Complex mirrored = j < 0 ? Complex(0, 0) : coeffs_[j];
      worst = std::max(worst, std::abs(coeffs_[static_cast<int>(i)] - std::conj(mirrored)));
    }
    return worst;
  }

  double l2Norm() const { return coeffs_.norm(); }

  FourierField& operator+=(const FourierField& o) { return axpy(1.0, o); }
  FourierField& operator-=(const FourierField& o) { return axpy(-1.0, o); }
  FourierField& operator*=(double s) {
    coeffs_ *= s;
    return *this;
  }

  FourierField& axpy(double a, const FourierField& o) {
    if (basis_->sameAs(o.basis())) {
      coeffs_ += a * o.coeffs_;
    } else {
      for (int i = 0; i < o.basis().size(); ++i) {
        const int j = basis_->find(o.basis().index(i));
        if (j < 0 && std::abs(o.coeffs_[i]) > 0.0)
          throw std::invalid_argument("FourierField::axpy: mode outside target basis");
        if (j >= 0) coeffs_[j] += a * o.coeffs_[i];
      }
    }
    return *this;
  }

 private:
  BasisPtr basis_;
  Eigen::VectorXcd coeffs_;
};

inline FourierField operator+(FourierField a, const FourierField& b) { return a += b; }
inline FourierField operator-(FourierField a, const FourierField& b) { return a -= b; }
inline FourierField operator*(double s, FourierField f) { return f *= s; }

/// L2 inner product; equals sum_k conj(a_k) b_k by Parseval. Bases may differ,
/// missing modes count as zero.
inline Complex innerProduct(const FourierField& a, const FourierField& b) {
  if (a.basis().sameAs(b.basis())) return a.coeffs().dot(b.coeffs());
  Complex acc(0.0, 0.0);
  const auto& small = a.basis().size() <= b.basis().size() ? a : b;
  const auto& large = a.basis().size() <= b.basis().size() ? b : a;
  const bool swapped = a.basis().size() > b.basis().size();
  for (int i = 0; i < small.basis().size(); ++i) {
    const Complex other = large.coeff(small.basis().index(i));
    acc += swapped ? std::conj(other) * small.coeffs()[i]
                   : std::conj(small.coeffs()[i]) * other;
  }
  return acc;
}

/// Real L2 inner product of two real-valued fields.
inline double innerProductReal(const FourierField& a, const FourierField& b) {
  return innerProduct(a, b).real();
}

/// Mean-value integral: integral of f over the cell = |Gamma|^{1/2} * c_0.
inline double integral(const FourierField& f) {
  return (std::sqrt(f.cell().volume()) * f.coeff(Eigen::Vector3i::Zero())).real();
}

/// Real values of a field sampled on the uniform N^3 grid (z fastest).
class GridField {
 public:
  GridField(const CellSpec& cell, int ng)
      : cell_(cell), ng_(ng), values_(Eigen::VectorXd::Zero(static_cast<long>(ng) * ng * ng)) {
    if (ng < 1 || ng % 2 == 0)
      throw std::invalid_argument("GridField: Ng must be odd and >= 1");
  }

  const CellSpec& cell() const { return cell_; }
  int gridSize() const { return ng_; }
  long pointCount() const { return values_.size(); }

  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }

  double operator()(int ix, int iy, int iz) const {
    return values_[(static_cast<long>(ix) * ng_ + iy) * ng_ + iz];
  }
  double& operator()(int ix, int iy, int iz) {
    return values_[(static_cast<long>(ix) * ng_ + iy) * ng_ + iz];
  }

  Eigen::Vector3d point(int ix, int iy, int iz) const {
    const double h = cell_.length / ng_;
    return {h * ix, h * iy, h * iz};
  }

 private:
  CellSpec cell_;
  int ng_;
  Eigen::VectorXd values_;
};

}  // namespace pwdft

#endif
