#include "pwdft/transforms.hpp"

#include <cmath>
#include <stdexcept>

#include "pwdft/util.hpp"

namespace pwdft {

namespace {

using RowMajorXcd = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

BoxTensor toBoxTensor(const FourierField& f, int halfWidth) {
  BoxTensor box(halfWidth);
  const auto& basis = f.basis();
  for (int i = 0; i < basis.size(); ++i) {
    const Eigen::Vector3i& n = basis.index(i);
    if (n.cwiseAbs().maxCoeff() > halfWidth) {
      if (std::abs(f.coeffs()[i]) != 0.0)
        throw std::invalid_argument("toBoxTensor: nonzero mode outside box");
      continue;
    }
    box.at(n) = f.coeffs()[i];
  }
  return box;
}

Eigen::MatrixXcd axisPhaseMatrix(int gridSize, int halfWidth) {
  const int B = 2 * halfWidth + 1;
  Eigen::MatrixXcd e(gridSize, B);
  for (int j = 0; j < gridSize; ++j)
    for (int a = 0; a < B; ++a) {
      const long n = a - halfWidth;
      long r = (static_cast<long>(j) * n) % gridSize;
      if (r < 0) r += gridSize;
      e(j, a) = std::polar(1.0, 2.0 * M_PI * static_cast<double>(r) / gridSize);
    }
  return e;
}

SlabSynthesizer::SlabSynthesizer(const BoxTensor& coeffs, int gridSize, double scale)
    : gridSize_(gridSize),
      side_(coeffs.sideLength()),
      scale_(scale),
      coeffs_(coeffs.data * scale),
      axis_(axisPhaseMatrix(gridSize, coeffs.halfWidth)),
      cz_(side_, side_),
      partial_(gridSize, side_),
      slab_(gridSize, gridSize) {
  if (side_ > gridSize)
    throw std::invalid_argument("SlabSynthesizer: mode box exceeds grid Nyquist range");
}

void SlabSynthesizer::complexSlab(int z, Eigen::MatrixXcd& out) const {
  const int B = side_;
  Eigen::Map<const RowMajorXcd> cmap(coeffs_.data(), static_cast<long>(B) * B, B);
  Eigen::VectorXcd cz = cmap * axis_.row(z).transpose();
  Eigen::Map<const RowMajorXcd> czmat(cz.data(), B, B);
  partial_.noalias() = axis_ * czmat;
  out.resize(gridSize_, gridSize_);
  out.noalias() = partial_ * axis_.transpose();
}

void SlabSynthesizer::realSlab(int z, Eigen::MatrixXd& out) {
  complexSlab(z, slab_);
  out = slab_.real();
  const double residue = slab_.imag().cwiseAbs().maxCoeff();
  if (residue > maxImag_) maxImag_ = residue;
}

SlabAnalyzer::SlabAnalyzer(int gridSize, int halfWidth)
    : gridSize_(gridSize),
      side_(2 * halfWidth + 1),
      axisAdj_(axisPhaseMatrix(gridSize, halfWidth).adjoint()),
      buffer_(Eigen::MatrixXcd::Zero(static_cast<long>(side_) * side_, gridSize)),
      t1_(side_, gridSize),
      t2_(side_, side_) {
  if (side_ > gridSize)
    throw std::invalid_argument("SlabAnalyzer: mode box exceeds grid Nyquist range");
  adjRe_ = axisAdj_.real();
  adjIm_ = axisAdj_.imag();
  axisConj_ = axisAdj_.transpose();
}

void SlabAnalyzer::accumulate(int z, const Eigen::MatrixXd& slab) {
  const int B = side_;
  // Split complex * real into two real products.
  tRe_.noalias() = adjRe_ * slab;
  tIm_.noalias() = adjIm_ * slab;
  t1_.real() = tRe_;
  t1_.imag() = tIm_;
  t2_.noalias() = t1_ * axisConj_;
  for (int a = 0; a < B; ++a)
    for (int b = 0; b < B; ++b) buffer_(static_cast<long>(a) * B + b, z) = t2_(a, b);
}

void SlabAnalyzer::accumulateComplex(int z, const Eigen::MatrixXcd& slab) {
  const int B = side_;
  t1_.noalias() = axisAdj_ * slab;
  t2_.noalias() = t1_ * axisConj_;
  for (int a = 0; a < B; ++a)
    for (int b = 0; b < B; ++b) buffer_(static_cast<long>(a) * B + b, z) = t2_(a, b);
}

BoxTensor SlabAnalyzer::result(double scale) const {
  BoxTensor out(side_ / 2);
  Eigen::Map<RowMajorXcd> accMap(out.data.data(), static_cast<long>(side_) * side_, side_);
  accMap.noalias() = buffer_ * axisConj_;
  out.data *= scale;
  return out;
}

std::pair<BoxTensor, BoxTensor> splitHermitian(const BoxTensor& combined) {
  const int h = combined.halfWidth;
  BoxTensor first(h), second(h);
  for (int nx = -h; nx <= h; ++nx)
    for (int ny = -h; ny <= h; ++ny)
      for (int nz = -h; nz <= h; ++nz) {
        const Eigen::Vector3i n(nx, ny, nz);
        const Complex c = combined.at(n);
        const Complex m = std::conj(combined.at(-n));
        first.at(n) = 0.5 * (c + m);
        second.at(n) = Complex(0.0, -0.5) * (c - m);
      }
  return {std::move(first), std::move(second)};
}

FourierField project(const FourierField& f, int nc) {
  auto target = PlanewaveBasis::ball(f.cell(), nc);
  FourierField out(target);
  const auto& src = f.basis();
  for (int i = 0; i < target->size(); ++i) {
    const int j = src.find(target->index(i));
    if (j >= 0) out.coeffs()[i] = f.coeffs()[j];
  }
  return out;
}

GridField toGrid(const FourierField& f, int gridSize) {
  if (gridSize < 1 || gridSize % 2 == 0)
    throw std::invalid_argument("toGrid: grid size must be odd and >= 1");
  const int h = (gridSize - 1) / 2;
  if (f.basis().halfWidth() > h) {
    for (int i = 0; i < f.basis().size(); ++i)
      if (f.basis().index(i).cwiseAbs().maxCoeff() > h && std::abs(f.coeffs()[i]) != 0.0)
        throw std::invalid_argument("toGrid: mode outside grid Nyquist range");
  }
  const int hEff = std::min(h, f.basis().halfWidth());
  BoxTensor box = toBoxTensor(f, hEff);
  const double scale = 1.0 / std::sqrt(f.cell().volume());
  SlabSynthesizer synth(box, gridSize, scale);
  GridField g(f.cell(), gridSize);
  Eigen::MatrixXd slab;
  for (int z = 0; z < gridSize; ++z) {
    synth.realSlab(z, slab);
    for (int x = 0; x < gridSize; ++x)
      for (int y = 0; y < gridSize; ++y) g(x, y, z) = slab(x, y);
  }
  if (synth.maxImagAbs() > 1e-13 * (1.0 + f.l2Norm()))
    throw std::runtime_error("toGrid: imaginary residue above tolerance");
  return g;
}

namespace {

FourierField analyzeToBoxField(const GridField& g, double scale) {
  const int N = g.gridSize();
  const int h = (N - 1) / 2;
  SlabAnalyzer ana(N, h);
  Eigen::MatrixXd slab(N, N);
  for (int z = 0; z < N; ++z) {
    for (int x = 0; x < N; ++x)
      for (int y = 0; y < N; ++y) slab(x, y) = g(x, y, z);
    ana.accumulate(z, slab);
  }
  BoxTensor box = ana.result(scale);
  auto basis = PlanewaveBasis::box(g.cell(), N);
  FourierField f(basis);
  for (int i = 0; i < basis->size(); ++i) f.coeffs()[i] = box.at(basis->index(i));
  return f;
}

}  // namespace

FourierField dft(const GridField& g) {
  const double n3 = static_cast<double>(g.gridSize()) * g.gridSize() * g.gridSize();
  return analyzeToBoxField(g, 1.0 / n3);
}

FourierField interpolate(const GridField& g) {
  const double n3 = static_cast<double>(g.gridSize()) * g.gridSize() * g.gridSize();
  return analyzeToBoxField(g, std::sqrt(g.cell().volume()) / n3);
}

double integrateGrid(const GridField& g) {
  KahanSum sum;
  const double* p = g.values().data();
  for (long i = 0; i < g.pointCount(); ++i) sum.add(p[i]);
  const double h = g.cell().length / g.gridSize();
  return sum.value() * h * h * h;
}

}  // namespace pwdft
