#ifndef PWDFT_TRANSFORMS_HPP
#define PWDFT_TRANSFORMS_HPP

#include <complex>

#include <Eigen/Dense>

#include "pwdft/field.hpp"

namespace pwdft {

/// Dense coefficient tensor over the integer box |n|_inf <= h, laid out as
/// data[((nx+h)*B + (ny+h))*B + (nz+h)] with B = 2h+1 (z fastest).
struct BoxTensor {
  int halfWidth = 0;
  Eigen::VectorXcd data;

  explicit BoxTensor(int h)
      : halfWidth(h),
        data(Eigen::VectorXcd::Zero(static_cast<long>(2 * h + 1) * (2 * h + 1) * (2 * h + 1))) {}

  int sideLength() const { return 2 * halfWidth + 1; }

  long flatIndex(const Eigen::Vector3i& n) const {
    const int B = sideLength();
    return (static_cast<long>(n.x() + halfWidth) * B + (n.y() + halfWidth)) * B +
           (n.z() + halfWidth);
  }

  std::complex<double>& at(const Eigen::Vector3i& n) { return data[flatIndex(n)]; }
  std::complex<double> at(const Eigen::Vector3i& n) const { return data[flatIndex(n)]; }
};

/// Scatters a field's coefficients into a box tensor (modes outside the box
/// must be absent or an exception is thrown).
BoxTensor toBoxTensor(const FourierField& f, int halfWidth);

/// One-axis phase matrix E(j, a) = exp(2*pi*i * j * (a - h) / N), j = 0..N-1.
Eigen::MatrixXcd axisPhaseMatrix(int gridSize, int halfWidth);

/// Streaming synthesis of grid slabs from a coefficient box:
///   slab_z(x, y) = scale * sum_n C[n] exp(2*pi*i*(n.x*x + n.y*y + n.z*z)/N).
/// Slabs come out one z at a time; the largest |imag| seen is tracked so
/// callers can verify the field was genuinely real-valued.
class SlabSynthesizer {
 public:
  SlabSynthesizer(const BoxTensor& coeffs, int gridSize, double scale);

  int gridSize() const { return gridSize_; }
  double maxImagAbs() const { return maxImag_; }

  /// Real part of slab z (row x, column y); imaginary residue is tracked.
  void realSlab(int z, Eigen::MatrixXd& out);

  /// Full complex slab (no residue tracking).
  void complexSlab(int z, Eigen::MatrixXcd& out) const;

 private:
  int gridSize_;
  int side_;
  double scale_;
  Eigen::VectorXcd coeffs_;
  Eigen::MatrixXcd axis_;
  double maxImag_ = 0.0;
  mutable Eigen::MatrixXcd cz_;       // side x side scratch
  mutable Eigen::MatrixXcd partial_;  // N x side scratch
  mutable Eigen::MatrixXcd slab_;     // N x N scratch
};

/// Streaming adjoint: accumulates sum_x g(x) exp(-i k.x) over grid slabs into
/// a coefficient box of half-width h. The x/y contractions happen per slab;
/// the z contraction is deferred to one batched product in result().
///
/// A complex slab channel is provided so two real fields f, g can be analyzed
/// in a single pass as f + i*g and split afterwards by Hermitian symmetry.
class SlabAnalyzer {
 public:
  SlabAnalyzer(int gridSize, int halfWidth);

  void accumulate(int z, const Eigen::MatrixXd& slab);
  void accumulateComplex(int z, const Eigen::MatrixXcd& slab);

  /// Accumulated tensor times scale (e.g. |Gamma|^{1/2}/N^3 for
  /// interpolation-convention coefficients).
  BoxTensor result(double scale) const;

 private:
  int gridSize_;
  int side_;
  Eigen::MatrixXcd axisAdj_;  // side x N, conj(E)^T
  Eigen::MatrixXd adjRe_, adjIm_;
  Eigen::MatrixXcd axisConj_;  // N x side, conj(E)
  Eigen::MatrixXcd buffer_;    // side^2 x N, column z = flattened slab modes
  Eigen::MatrixXd tRe_, tIm_;
  Eigen::MatrixXcd t1_;  // side x N scratch
  Eigen::MatrixXcd t2_;  // side x side scratch
};

/// Splits the analysis of f + i*g (both real fields) into the two Hermitian
/// coefficient tensors using c_f(q) = (c(q) + conj(c(-q)))/2 and
/// c_g(q) = (c(q) - conj(c(-q)))/(2i).
std::pair<BoxTensor, BoxTensor> splitHermitian(const BoxTensor& combined);

/// L2 projection onto V_Nc: coefficients with |k| <= 2*pi*Nc/L are kept,
/// all others dropped. A cutoff at or above the source cutoff is the identity.
FourierField project(const FourierField& f, int nc);

/// Pointwise evaluation of a field on the N^3 grid. Every mode must satisfy
/// |n|_inf <= (N-1)/2; callers oversample if not. The imaginary residue of
/// the synthesis must stay below 1e-13 relative.
GridField toGrid(const FourierField& f, int gridSize);

/// Discrete Fourier transform on one period: raw coefficients
/// N^{-3} sum_x g(x) exp(-i k.x) for k in the (N-1)/2 box. Note these are
/// plain DFT values, not coefficients with respect to the e_k basis.
FourierField dft(const GridField& g);

/// Trigonometric interpolation I_Ng: the unique element of W_Ng matching g at
/// every grid point; coefficients are |Gamma|^{1/2} times the DFT.
FourierField interpolate(const GridField& g);

/// Quadrature integral (L/N)^3 * sum_x g(x), compensated summation.
double integrateGrid(const GridField& g);

}  // namespace pwdft

#endif
