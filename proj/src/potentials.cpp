#include "pwdft/potentials.hpp"

#include <cmath>

#include "pwdft/util.hpp"

namespace pwdft {

FourierField LocalPotential::onBasis(const BasisPtr& basis) const {
  FourierField f(basis);
  for (int i = 0; i < basis->size(); ++i) f.coeffs()[i] = coefficient(basis->index(i));
  return f;
}

BoxTensor LocalPotential::foldedBox(int ng, int halfWidth) const {
  if (ng < 1 || ng % 2 == 0)
    throw std::invalid_argument("LocalPotential::foldedBox: Ng must be odd and >= 1");
  if (halfWidth < 0 || 2 * halfWidth + 1 > ng)
    throw std::invalid_argument("LocalPotential::foldedBox: box exceeds the grid Nyquist range");
  BoxTensor out(halfWidth);
  const int B = out.sideLength();
  // per-axis image range: q + Ng*K must land in [-nMax, nMax]
  auto kLo = [&](int q) { return -(nMax_ + q) / ng - 1; };
  auto kHi = [&](int q) { return (nMax_ - q) / ng + 1; };
  const long r2max = static_cast<long>(nMax_) * nMax_;
#pragma omp parallel for collapse(2) schedule(dynamic)
  for (int qx = -halfWidth; qx <= halfWidth; ++qx)
    for (int qy = -halfWidth; qy <= halfWidth; ++qy) {
      for (int qz = -halfWidth; qz <= halfWidth; ++qz) {
        Complex acc(0.0, 0.0);
        for (int kx = kLo(qx); kx <= kHi(qx); ++kx) {
          const int nx = qx + ng * kx;
          if (std::abs(nx) > nMax_) continue;
          for (int ky = kLo(qy); ky <= kHi(qy); ++ky) {
            const int ny = qy + ng * ky;
            const long rxy = static_cast<long>(nx) * nx + static_cast<long>(ny) * ny;
            if (std::abs(ny) > nMax_ || rxy > r2max) continue;
            for (int kz = kLo(qz); kz <= kHi(qz); ++kz) {
              const int nz = qz + ng * kz;
              if (rxy + static_cast<long>(nz) * nz > r2max) continue;
              acc += gen_(Eigen::Vector3i(nx, ny, nz));
            }
          }
        }
        out.data[(static_cast<long>(qx + halfWidth) * B + (qy + halfWidth)) * B +
                 (qz + halfWidth)] = acc;
      }
    }
  return out;
}

double LocalPotential::decayCertificate() const {
  double worst = 0.0;
  for (int nx = -nMax_; nx <= nMax_; ++nx)
    for (int ny = -nMax_; ny <= nMax_; ++ny)
      for (int nz = -nMax_; nz <= nMax_; ++nz) {
        const Eigen::Vector3i n(nx, ny, nz);
        if (n.isZero() || n.squaredNorm() > static_cast<long>(nMax_) * nMax_) continue;
        const double k = std::sqrt(cell_.kSquared(n));
        worst = std::max(worst, std::abs(coefficient(n)) * std::pow(k, m_));
      }
  return worst;
}

LocalPotential operator+(const LocalPotential& a, const LocalPotential& b) {
  if (!(a.cell_ == b.cell_))
    throw std::invalid_argument("LocalPotential: cannot add potentials on different cells");
  auto ga = a, gb = b;  // capture by value: the sum owns both generators
  return LocalPotential(
      a.cell_,
      [ga, gb](const Eigen::Vector3i& n) { return ga.coefficient(n) + gb.coefficient(n); },
      std::min(a.m_, b.m_), a.c_ + b.c_, std::max(a.nMax_, b.nMax_));
}

Complex hermitianPhase(const Eigen::Vector3i& n, std::uint64_t seed) {
  Eigen::Vector3i rep = n;
  bool flip = false;
  if (rep.x() < 0 || (rep.x() == 0 && (rep.y() < 0 || (rep.y() == 0 && rep.z() < 0)))) {
    rep = -rep;
    flip = true;
  }
  std::uint64_t h = splitmix64(seed ^ 0x706f74656e74ULL);
  h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(rep.x()) + (1 << 24)));
  h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(rep.y()) + (1 << 24)));
  h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(rep.z()) + (1 << 24)));
  // Hermitian pairing c_{-n} = conj(c_n) forces the n = 0 phase to be real.
  if (n.isZero()) return Complex(uniformFromBits(h) < 0.5 ? -1.0 : 1.0, 0.0);
  const Complex u = std::polar(1.0, 2.0 * M_PI * uniformFromBits(h));
  return flip ? std::conj(u) : u;
}

LocalPotential synthPotential(const CellSpec& cell, double m, double amplitude, int modeRange,
                              std::uint64_t seed) {
  auto gen = [cell, m, amplitude, seed](const Eigen::Vector3i& n) -> Complex {
    if (n.isZero()) return Complex(0.0, 0.0);
    const double k = std::sqrt(cell.kSquared(n));
    return amplitude * std::pow(k, -m) * hermitianPhase(n, seed);
  };
  return LocalPotential(cell, gen, m, amplitude, modeRange);
}

LocalPotential gaussianPotential(const CellSpec& cell, double depth, double width,
                                 const Eigen::Vector3d& center, double nominalExponent) {
  if (!(width > 0.0)) throw std::invalid_argument("gaussianPotential: width must be positive");
  if (width >= cell.length)
    throw std::invalid_argument("gaussianPotential: width must be smaller than the cell");
  const double prefactor =
      depth * std::pow(2.0 * M_PI, 1.5) * width * width * width / std::sqrt(cell.volume());
  auto gen = [cell, prefactor, width, center](const Eigen::Vector3i& n) -> Complex {
    const Eigen::Vector3d k = cell.wavevector(n);
    const double mag = prefactor * std::exp(-0.5 * k.squaredNorm() * width * width);
    return std::polar(mag, -k.dot(center));
  };
  // truncate where exp(-k^2 w^2/2) < 1e-18 relative
  const double kmax = 9.1 / width;
  const int nMax = static_cast<int>(std::ceil(kmax / cell.dualSpacing()));
  // sharp envelope: max over k of |V_k| k^m, attained at k = sqrt(m)/width
  const double cert = std::abs(prefactor) *
                      std::pow(nominalExponent / (width * width), nominalExponent / 2.0) *
                      std::exp(-nominalExponent / 2.0);
  return LocalPotential(cell, gen, nominalExponent, cert, nMax);
}

GridField potentialOnGrid(const LocalPotential& v, int ng) {
  const int h = (ng - 1) / 2;
  BoxTensor box = v.foldedBox(ng, h);
  SlabSynthesizer synth(box, ng, 1.0 / std::sqrt(v.cell().volume()));
  GridField g(v.cell(), ng);
  Eigen::MatrixXd slab(ng, ng);
  for (int z = 0; z < ng; ++z) {
    synth.realSlab(z, slab);
    for (int x = 0; x < ng; ++x)
      for (int y = 0; y < ng; ++y) g(x, y, z) = slab(x, y);
  }
  return g;
}

double XCFunctional::eval(double rho, int order) const {
  if (rho < 0.0) throw std::invalid_argument("XCFunctional: density must be nonnegative");
  if (order < 0 || order > 3) throw std::invalid_argument("XCFunctional: order must be 0..3");
  switch (kind_) {
    case Kind::None:
      return 0.0;
    case Kind::XAlpha:
      switch (order) {
        case 0:
          return -cx_ * std::pow(rho, 4.0 / 3.0);
        case 1:
          return -(4.0 / 3.0) * cx_ * std::cbrt(rho);
        case 2:
          if (rho == 0.0)
            throw std::domain_error("XCFunctional: x-alpha curvature unbounded at zero density");
          return -(4.0 / 9.0) * cx_ * std::pow(rho, -2.0 / 3.0);
        default:
          throw std::domain_error("XCFunctional: third derivative only for the custom variant");
      }
    case Kind::Custom:
      return f_(rho, order);
  }
  return 0.0;  // unreachable
}

FourierField applyNonlocal(const NonlocalProjectorSet& p, const FourierField& phi) {
  FourierField out(phi.basisPtr());
  const auto& target = phi.basis();
  for (const FourierField& chi : p.projectors) {
    const double w = innerProductReal(chi, phi);
    if (w == 0.0) continue;
    const auto& src = chi.basis();
    for (int i = 0; i < src.size(); ++i) {
      const int j = target.find(src.index(i));
      if (j >= 0) out.coeffs()[j] += w * chi.coeffs()[i];
    }
  }
  return out;
}

FourierField synthProjector(const BasisPtr& basis, double decay, double amplitude,
                            std::uint64_t seed) {
  FourierField chi(basis);
  for (int i = 0; i < basis->size(); ++i) {
    const Eigen::Vector3i& n = basis->index(i);
    const double mag = amplitude * std::pow(1.0 + n.cast<double>().squaredNorm(), -decay / 2.0);
    Complex c = mag * hermitianPhase(n, seed ^ 0x70726f6aULL);
    if (n.isZero()) c = Complex(c.real(), 0.0);
    chi.coeffs()[i] = c;
  }
  return chi;
}

double CoreDensity::minOnGrid(int ng) const {
  const int need = 2 * rho.basis().halfWidth() + 1;
  const int n = std::max(ng | 1, need);
  GridField g = toGrid(rho, n);
  return g.values().minCoeff();
}

CoreDensity gaussianCoreDensity(const CellSpec& cell, double charge, double width,
                                const Eigen::Vector3d& center) {
  if (!(width > 0.0) || width >= cell.length)
    throw std::invalid_argument("gaussianCoreDensity: width must lie in (0, L)");
  if (charge < 0.0) throw std::invalid_argument("gaussianCoreDensity: charge must be nonnegative");
  const double norm = std::pow(2.0 * M_PI * width * width, -1.5);  // unit-mass Gaussian
  const int nMax =
      static_cast<int>(std::ceil(9.1 / (width * cell.dualSpacing())));
  auto basis = PlanewaveBasis::ball(cell, nMax);
  FourierField rho(basis);
  const double prefactor = charge * norm * std::pow(2.0 * M_PI, 1.5) * width * width * width /
                           std::sqrt(cell.volume());
  for (int i = 0; i < basis->size(); ++i) {
    const Eigen::Vector3d k = cell.wavevector(basis->index(i));
    rho.coeffs()[i] =
        std::polar(prefactor * std::exp(-0.5 * k.squaredNorm() * width * width), -k.dot(center));
  }
  return CoreDensity{std::move(rho)};
}

}  // namespace pwdft
