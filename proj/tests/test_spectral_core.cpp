#include <cmath>

#include "doctest.h"
#include "pwdft/norms.hpp"
#include "pwdft/transforms.hpp"
#include "support.hpp"

using namespace pwdft;
using namespace pwdft::testing;

namespace {
const CellSpec cell(10.0);
const double vol = cell.volume();
}  // namespace

TEST_CASE("cutoff index round-trips the energy relation") {
  for (int nc : {1, 4, 8, 16, 48}) {
    const double ec = cutoffEnergyFromIndex(nc, cell);
    CHECK(cutoffIndexFromEnergy(ec, cell) == nc);
    CHECK(cutoffIndexFromEnergy(ec * 0.999, cell) == nc - 1);
  }
}

TEST_CASE("ball basis is closed under k -> -k and ordered lexicographically") {
  auto basis = PlanewaveBasis::ball(cell, 3);
  for (int i = 0; i < basis->size(); ++i) {
    CHECK(basis->contains(-basis->index(i)));
    if (i > 0) {
      const auto &a = basis->index(i - 1), &b = basis->index(i);
      const bool less = std::make_tuple(a.x(), a.y(), a.z()) < std::make_tuple(b.x(), b.y(), b.z());
      CHECK(less);
    }
  }
  CHECK_THROWS(PlanewaveBasis::box(cell, 16));  // even grid rejected
}

TEST_CASE("project keeps low modes and drops the rest") {
  auto basis = PlanewaveBasis::ball(cell, 5);
  FourierField f(basis);
  f.setModePair({2, 1, 0}, Complex(0.3, 0.4));

  // |k| within the target cutoff: unchanged
  FourierField p = project(f, 3);
  CHECK(p.coeff({2, 1, 0}) == f.coeff({2, 1, 0}));
  CHECK(sobolevDistance(p, f, 0.0) == doctest::Approx(0.0).epsilon(1e-15));

  // single pair above the cutoff: zero field
  FourierField g(basis);
  g.setModePair({4, 0, 0}, Complex(1.0, -2.0));
  CHECK(project(g, 3).l2Norm() == 0.0);

  // projecting to a larger cutoff is the identity
  CHECK(sobolevDistance(project(f, 9), f, 0.0) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("best-approximation error respects the H^r bound") {
  auto basis = PlanewaveBasis::ball(cell, 12);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    FourierField f = randomField(basis, seed, 5.0);
    const auto [lhs, bound] = hsBestError(f, 6, 0.0, 2.0);
    CHECK(lhs <= bound * (1.0 + 1e-12));
    // lhs is the H^r norm of f - project(f, Nc)
    CHECK(lhs == doctest::Approx(sobolevDistance(f, project(f, 6), 0.0)).epsilon(1e-12));
  }
  // field entirely below the cutoff: zero error
  FourierField low = randomField(PlanewaveBasis::ball(cell, 4), 7, 1.0);
  CHECK(hsBestError(low, 6, 0.0, 2.0).first == 0.0);
  // one mode just above the cutoff: lhs is that mode's weight
  FourierField g(basis);
  g.setModePair({7, 0, 0}, Complex(0.5, 0.0));
  const double k2 = cell.kSquared({7, 0, 0});
  CHECK(hsBestError(g, 6, 1.0, 2.0).first ==
        doctest::Approx(std::sqrt(2.0 * (1.0 + k2)) * 0.5).epsilon(1e-13));
}

TEST_CASE("to_grid evaluates planewaves exactly") {
  auto basis = PlanewaveBasis::ball(cell, 3);

  // constant e_0
  FourierField f(basis);
  f.setCoeff({0, 0, 0}, 1.0);
  GridField g = toGrid(f, 9);
  for (int i = 0; i < 9; ++i) CHECK(g(i, 3, 7) == doctest::Approx(1.0 / std::sqrt(vol)).epsilon(1e-14));

  // cosine mode pair (e_k + e_{-k})/sqrt(2)
  FourierField c(basis);
  c.setModePair({1, 2, 0}, Complex(1.0 / std::sqrt(2.0), 0.0));
  GridField gc = toGrid(c, 9);
  for (int x = 0; x < 9; x += 2)
    for (int y = 0; y < 9; y += 3) {
      const Eigen::Vector3d k = cell.wavevector({1, 2, 0});
      const double expected = std::sqrt(2.0 / vol) * std::cos(k.dot(gc.point(x, y, 5)));
      CHECK(gc(x, y, 5) == doctest::Approx(expected).epsilon(1e-12));
    }

  // mode outside Nyquist range rejected
  FourierField hi(PlanewaveBasis::ball(cell, 6));
  hi.setModePair({6, 0, 0}, Complex(1.0, 0.0));
  CHECK_THROWS(toGrid(hi, 9));
}

TEST_CASE("quadrature of a bandlimited field recovers its mean") {
  auto basis = PlanewaveBasis::ball(cell, 4);
  FourierField f = randomField(basis, 3, 1.0);
  GridField g = toGrid(f, 2 * 4 + 1);
  CHECK(integrateGrid(g) ==
        doctest::Approx(std::sqrt(vol) * f.coeff({0, 0, 0}).real()).epsilon(1e-12));

  GridField constant(cell, 5);
  constant.values().setConstant(2.5);
  CHECK(integrateGrid(constant) == doctest::Approx(2.5 * vol).epsilon(1e-14));
}

TEST_CASE("dft matches the naive oracle and the folding identity") {
  auto basis = PlanewaveBasis::ball(cell, 10);
  FourierField f = randomField(basis, 11, 2.0);
  const int ng = 9;
  GridField g = toGrid(foldToBox(f, ng), ng);

  FourierField fast = dft(g);
  FourierField slow = naiveDft(g);
  for (int i = 0; i < fast.basis().size(); ++i)
    CHECK(std::abs(fast.coeffs()[i] - slow.coeffs()[i]) < 1e-12);

  // folding identity: dft = |Gamma|^{-1/2} sum_K c_{k + Ng K}
  FourierField folded = foldToBox(f, ng);
  for (int i = 0; i < fast.basis().size(); ++i) {
    const Complex expected = folded.coeffs()[i] / std::sqrt(vol);
    CHECK(std::abs(fast.coeffs()[i] - expected) < 1e-12);
  }
}

TEST_CASE("dft of single modes") {
  auto basis = PlanewaveBasis::ball(cell, 10);
  const int ng = 9;

  // unaliased mode: coefficient |Gamma|^{-1/2} at k, zero elsewhere
  FourierField f(PlanewaveBasis::ball(cell, 3));
  f.setModePair({2, 1, 0}, Complex(0.7, 0.1));
  FourierField d = dft(toGrid(f, ng));
  CHECK(std::abs(d.coeff({2, 1, 0}) - Complex(0.7, 0.1) / std::sqrt(vol)) < 1e-13);
  CHECK(std::abs(d.coeff({1, 1, 0})) < 1e-13);

  // grid-periodic aliasing: e_k with n = (Ng, 0, 0) looks like e_0
  FourierField alias(basis);
  alias.setCoeff({ng, 0, 0}, Complex(1.0, 0.0));
  alias.setCoeff({-ng, 0, 0}, Complex(1.0, 0.0));
  GridField ga = toGrid(foldToBox(alias, ng), ng);
  FourierField da = dft(ga);
  CHECK(std::abs(da.coeff({0, 0, 0}) - 2.0 / std::sqrt(vol)) < 1e-13);

  // two modes at k and k + Ng*(2pi/L)e1 fold onto k
  FourierField two(basis);
  two.setModePair({1, 0, 0}, Complex(0.4, -0.2));
  two.setCoeff({1 + ng, 0, 0}, Complex(0.25, 0.15));
  two.setCoeff({-1 - ng, 0, 0}, std::conj(Complex(0.25, 0.15)));
  FourierField dt = dft(toGrid(foldToBox(two, ng), ng));
  CHECK(std::abs(dt.coeff({1, 0, 0}) - (Complex(0.4, -0.2) + Complex(0.25, 0.15)) / std::sqrt(vol)) <
        1e-13);

  // constant field
  GridField gc(cell, 5);
  gc.values().setConstant(3.0);
  CHECK(std::abs(dft(gc).coeff({0, 0, 0}) - 3.0) < 1e-14);
}

TEST_CASE("interpolation is exact on W_Ng and maps constants to e_0") {
  const int ng = 9;

  GridField constant(cell, ng);
  constant.values().setConstant(1.0 / std::sqrt(vol));
  FourierField ic = interpolate(constant);
  CHECK(std::abs(ic.coeff({0, 0, 0}) - 1.0) < 1e-14);
  CHECK(ic.l2Norm() == doctest::Approx(1.0).epsilon(1e-13));

  // round-trip on W_Ng, randomized
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    FourierField f = randomField(PlanewaveBasis::box(cell, ng), seed, 1.0);
    FourierField back = interpolate(toGrid(f, ng));
    double worst = 0.0;
    for (int i = 0; i < f.basis().size(); ++i)
      worst = std::max(worst, std::abs(back.coeffs()[i] - f.coeffs()[i]));
    CHECK(worst < 1e-13);
  }
}

TEST_CASE("Parseval ties grid and coefficient norms") {
  const int nc = 4;
  auto basis = PlanewaveBasis::ball(cell, nc);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    FourierField f = randomField(basis, seed, 1.0);
    GridField g = toGrid(f, 2 * nc + 1);
    GridField g2(cell, 2 * nc + 1);
    g2.values() = g.values().cwiseProduct(g.values());
    const double viaGrid = integrateGrid(g2);
    const double viaCoeffs = f.coeffs().squaredNorm();
    CHECK(viaGrid == doctest::Approx(viaCoeffs).epsilon(1e-12));
    CHECK(sobolevNorm(f, 0.0) == doctest::Approx(f.l2Norm()).epsilon(1e-13));
  }
}

TEST_CASE("sobolev norm closed forms") {
  auto basis = PlanewaveBasis::ball(cell, 2);
  FourierField e0(basis);
  e0.setCoeff({0, 0, 0}, 1.0);
  for (double s : {-2.0, 0.0, 1.5}) CHECK(sobolevNorm(e0, s) == doctest::Approx(1.0));

  FourierField pair(basis);
  pair.setCoeff({1, 0, 0}, 1.0);
  pair.setCoeff({-1, 0, 0}, 1.0);
  const double k = 2.0 * M_PI / cell.length;
  CHECK(sobolevNorm(pair, 1.0) == doctest::Approx(std::sqrt(2.0 * (1.0 + k * k))).epsilon(1e-14));
}

TEST_CASE("exact integration of V_{4Nc} functions on the Ng >= 4Nc+1 grid") {
  const int nc = 4, ng = 4 * nc + 1;
  auto big = PlanewaveBasis::ball(cell, 4 * nc);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    FourierField v = randomField(big, seed, 1.5);
    const double exact = integral(v);
    const double quad = integrateGrid(toGrid(foldToBox(v, ng), ng));
    CHECK(quad == doctest::Approx(exact).epsilon(1e-12));
  }
}

TEST_CASE("integration against interpolated potentials (Lemma identities)") {
  const int nc = 4, ng = 4 * nc + 1;
  auto ballNc = PlanewaveBasis::ball(cell, nc);
  auto potBasis = PlanewaveBasis::ball(cell, 12);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    FourierField bigV = randomField(potBasis, seed, 3.0);
    FourierField v = randomField(ballNc, seed + 1000, 0.5);
    FourierField w = randomField(ballNc, seed + 2000, 0.5);

    GridField gV = toGrid(foldToBox(bigV, ng), ng);
    GridField gv = toGrid(v, ng), gw = toGrid(w, ng);

    // integral of I_Ng(V v w) via the quadrature identity
    GridField prod(cell, ng);
    prod.values() = gV.values().cwiseProduct(gv.values()).cwiseProduct(gw.values());
    const double lhs = integrateGrid(prod);

    // integral of I_Ng(V) v w computed on an oversampled exact grid
    FourierField iV = interpolate(gV);
    const int fine = 2 * ((ng - 1) / 2 + 2 * nc) + 1;
    GridField fV = toGrid(iV, fine), fv = toGrid(v, fine), fw = toGrid(w, fine);
    GridField fprod(cell, fine);
    fprod.values() = fV.values().cwiseProduct(fv.values()).cwiseProduct(fw.values());
    const double rhs = integrateGrid(fprod);

    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));

    // |int I_Ng(V |v|^2)| <= max|V| * ||v||^2
    GridField vv(cell, ng);
    vv.values() = gV.values().cwiseProduct(gv.values()).cwiseProduct(gv.values());
    CHECK(std::abs(integrateGrid(vv)) <=
          gV.values().cwiseAbs().maxCoeff() * v.coeffs().squaredNorm() * (1.0 + 1e-13));
  }
}

TEST_CASE("inverse inequality with the sharp cutoff constant") {
  // Sharp form: ||v||_{H^r} <= (1 + (2 pi Nc / L)^2)^{(r-s)/2} ||v||_{H^s}.
  const int nc = 6;
  auto basis = PlanewaveBasis::ball(cell, nc);
  const double kc2 = std::pow(cell.dualSpacing() * nc, 2);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    FourierField v = randomField(basis, seed, 0.5);
    for (auto [r, s] : {std::pair{1.0, 0.0}, {2.0, 0.0}, {1.0, -1.0}}) {
      const double factor = std::pow(1.0 + kc2, (r - s) / 2.0);
      CHECK(sobolevNorm(v, r) <= factor * sobolevNorm(v, s) * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("interpolation error of an algebraically decaying potential") {
  // |V_k| ~ |k|^{-5} puts V in H^{3.5-eps}; the L2 interpolation error is
  // expected to decay like Ng^{-3.5}.
  const int nmax = 192;
  const double scale = cell.dualSpacing();
  auto coeffMag = [&](const Eigen::Vector3i& n) {
    if (n.isZero()) return 0.0;
    return std::pow(scale * n.cast<double>().norm(), -5.0);
  };
  std::vector<std::pair<double, double>> pts;
  for (int ng : {17, 33, 65, 129}) {
    const int h = (ng - 1) / 2;
    // accumulate folded coefficients per residue box and the outside tail
    Eigen::VectorXcd folded =
        Eigen::VectorXcd::Zero(static_cast<long>(ng) * ng * ng);
    auto wrap = [&](int a) {
      int r = a % ng;
      if (r > h) r -= ng;
      if (r < -h) r += ng;
      return r;
    };
    KahanSum err2;
    for (int nx = -nmax; nx <= nmax; ++nx)
      for (int ny = -nmax; ny <= nmax; ++ny)
        for (int nz = -nmax; nz <= nmax; ++nz) {
          const Eigen::Vector3i n(nx, ny, nz);
          const double c = coeffMag(n);
          if (c == 0.0) continue;
          if (std::abs(nx) <= h && std::abs(ny) <= h && std::abs(nz) <= h) continue;
          const long idx = (static_cast<long>(wrap(nx) + h) * ng + (wrap(ny) + h)) * ng +
                           (wrap(nz) + h);
          folded[idx] += c;        // aliased contribution inside the box
          err2.add(c * c);         // truncation outside the box
        }
    err2.add(folded.squaredNorm());
    pts.emplace_back(ng, std::sqrt(err2.value()));
  }
  const double slope = logLogSlope(pts);
  CHECK(slope == doctest::Approx(-3.5).epsilon(0.3 / 3.5));
}
