#include "pwdft/ks.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "pwdft/util.hpp"

namespace pwdft {

namespace {

void requireGrid(int n, int nc, const char* what) {
  if (n < 1 || n % 2 == 0)
    throw std::invalid_argument(std::string(what) + ": grid size must be odd and >= 1");
  if (n < 4 * nc + 1)
    throw std::invalid_argument(std::string(what) + ": grid size must be at least 4*Nc+1");
}

int ballCutoff(const PlanewaveBasis& basis, const char* what) {
  if (basis.kind() != PlanewaveBasis::Kind::Ball)
    throw std::invalid_argument(std::string(what) + ": orbitals must live in a ball-truncated space");
  return basis.cutoffIndex();
}

/// Exact coefficients of the pointwise product a*b on the summed ball.
FourierField productField(const FourierField& a, const FourierField& b) {
  const int ha = ballCutoff(a.basis(), "productField");
  const int hb = ballCutoff(b.basis(), "productField");
  const int n = 2 * (ha + hb) + 1;
  GridField ga = toGrid(a, n);
  GridField gb = toGrid(b, n);
  SlabAnalyzer ana(n, ha + hb);
  Eigen::MatrixXd slab(n, n);
  for (int z = 0; z < n; ++z) {
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y) slab(x, y) = ga(x, y, z) * gb(x, y, z);
    ana.accumulate(z, slab);
  }
  const double n3 = static_cast<double>(n) * n * n;
  BoxTensor box = ana.result(std::sqrt(a.cell().volume()) / n3);
  FourierField out(PlanewaveBasis::ball(a.cell(), ha + hb));
  for (int i = 0; i < out.basis().size(); ++i) out.coeffs()[i] = box.at(out.basis().index(i));
  return out;
}

Eigen::MatrixXd realGram(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  return (a.adjoint() * b).real();
}

/// Loewdin-style orthonormalization dropping near-dependent directions; the
/// same column transform is applied to the tracked images.
void orthonormalizeColumns(Eigen::MatrixXcd& s, Eigen::MatrixXcd* tracked) {
  Eigen::MatrixXd m = realGram(s, s);
  m = 0.5 * (m + m.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double lmax = std::max(ev.maxCoeff(), 0.0);
  std::vector<int> keep;
  for (int i = 0; i < ev.size(); ++i)
    if (ev[i] > 1e-12 * lmax) keep.push_back(i);
  if (keep.empty()) throw std::runtime_error("orthonormalizeColumns: rank-zero block");
  Eigen::MatrixXd t(m.rows(), static_cast<long>(keep.size()));
  for (size_t j = 0; j < keep.size(); ++j)
    t.col(static_cast<long>(j)) = es.eigenvectors().col(keep[j]) / std::sqrt(ev[keep[j]]);
  const Eigen::MatrixXcd tc = t.cast<Complex>();
  s = (s * tc).eval();
  if (tracked) *tracked = (*tracked * tc).eval();
}

Eigen::VectorXd gridValues(const FourierField& f, int ng) {
  return toGrid(f, ng).values();
}

/// Pointwise samples of a field whose modes may exceed the grid Nyquist box:
/// folding the coefficients onto one grid period reproduces the exact values
/// of the trigonometric polynomial at the grid nodes.
Eigen::VectorXd foldedGridValues(const FourierField& f, int ng) {
  FourierField folded(PlanewaveBasis::box(f.cell(), ng));
  const int h = (ng - 1) / 2;
  const auto& src = f.basis();
  for (int i = 0; i < src.size(); ++i) {
    Eigen::Vector3i n = src.index(i);
    for (int d = 0; d < 3; ++d) {
      int r = n[d] % ng;
      if (r > h) r -= ng;
      if (r < -h) r += ng;
      n[d] = r;
    }
    folded.coeffs()[folded.basis().find(n)] += f.coeffs()[i];
  }
  return toGrid(folded, ng).values();
}

}  // namespace

Eigen::MatrixXd OrbitalSet::gram() const {
  const int n = count();
  Eigen::MatrixXd g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      g(i, j) = kahanDotReal(orbitals_[i].coeffs(), orbitals_[j].coeffs());
      g(j, i) = g(i, j);
    }
  return g;
}

double OrbitalSet::orthonormalityDefect() const {
  Eigen::MatrixXd g = gram();
  g.diagonal().array() -= 1.0;
  return g.cwiseAbs().maxCoeff();
}

OrbitalSet OrbitalSet::rotated(const Eigen::MatrixXd& u) const {
  if (u.cols() != count())
    throw std::invalid_argument("OrbitalSet::rotated: matrix shape mismatch");
  std::vector<FourierField> out;
  out.reserve(static_cast<size_t>(u.rows()));
  for (int i = 0; i < u.rows(); ++i) {
    FourierField f(basisPtr());
    for (int j = 0; j < count(); ++j) f.coeffs() += u(i, j) * orbitals_[static_cast<size_t>(j)].coeffs();
    out.push_back(std::move(f));
  }
  return OrbitalSet(std::move(out));
}

OrbitalSet OrbitalSet::randomOrthonormal(const BasisPtr& basis, int count, std::uint64_t seed) {
  if (count < 1 || count > basis->size())
    throw std::invalid_argument("OrbitalSet::randomOrthonormal: bad count");
  std::vector<FourierField> fields;
  fields.reserve(static_cast<size_t>(count));
  for (int c = 0; c < count; ++c) {
    FourierField f(basis);
    const std::uint64_t sub = splitmix64(seed ^ (0x6f72626974ULL + static_cast<std::uint64_t>(c)));
    for (int i = 0; i < basis->size(); ++i) {
      const Eigen::Vector3i& n = basis->index(i);
      const double mag = std::pow(1.0 + n.cast<double>().squaredNorm(), -2.0);
      f.coeffs()[i] = mag * hermitianPhase(n, sub);
    }
    fields.push_back(std::move(f));
  }
  OrbitalSet raw(std::move(fields));
  Eigen::MatrixXd m = raw.gram();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.eigenvalues().minCoeff() <= 1e-12 * es.eigenvalues().maxCoeff())
    throw std::runtime_error("OrbitalSet::randomOrthonormal: degenerate draw");
  Eigen::MatrixXd invSqrt = es.eigenvectors() *
                            es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                            es.eigenvectors().transpose();
  return raw.rotated(invSqrt);
}

Eigen::MatrixXd gramMatrix(const OrbitalSet& psi, const OrbitalSet& phi) {
  Eigen::MatrixXd m(psi.count(), phi.count());
  for (int i = 0; i < psi.count(); ++i)
    for (int j = 0; j < phi.count(); ++j)
      m(i, j) = innerProductReal(psi.orbital(i), phi.orbital(j));
  return m;
}

ChargeDensity orbitalDensity(const OrbitalSet& phi) {
  const int nc = ballCutoff(phi.basis(), "orbitalDensity");
  const CellSpec& cell = phi.basis().cell();
  const int n = 4 * nc + 1;
  const double vol = cell.volume();
  const double n3 = static_cast<double>(n) * n * n;

  std::vector<SlabSynthesizer> synths;
  synths.reserve(static_cast<size_t>(phi.count()));
  for (int i = 0; i < phi.count(); ++i)
    synths.emplace_back(toBoxTensor(phi.orbital(i), nc), n, 1.0 / std::sqrt(vol));
  SlabAnalyzer ana(n, 2 * nc);
  Eigen::MatrixXd slab, acc(n, n);
  for (int z = 0; z < n; ++z) {
    acc.setZero();
    for (auto& s : synths) {
      s.realSlab(z, slab);
      acc.array() += 2.0 * slab.array().square();
    }
    ana.accumulate(z, acc);
  }
  BoxTensor box = ana.result(std::sqrt(vol) / n3);
  FourierField rho(PlanewaveBasis::ball(cell, 2 * nc));
  for (int i = 0; i < rho.basis().size(); ++i) rho.coeffs()[i] = box.at(rho.basis().index(i));
  return ChargeDensity(std::move(rho));
}

KsEnergyBreakdown ksEnergyBreakdown(const KSModel& model, const OrbitalSet& phi, int ng) {
  model.validate();
  const int nc = ballCutoff(phi.basis(), "ksEnergy");
  requireGrid(ng, nc, "ksEnergy");

  KsEnergyBreakdown out;
  out.constraintWarning = phi.orthonormalityDefect() > 1e-8;

  KahanSum kin;
  const auto& basis = phi.basis();
  for (int i = 0; i < phi.count(); ++i)
    for (int j = 0; j < basis.size(); ++j)
      kin.add(basis.cell().kSquared(basis.index(j)) * std::norm(phi.orbital(i).coeffs()[j]));
  out.kinetic = kin.value();

  ChargeDensity rho = orbitalDensity(phi);

  if (model.vLocal) {
    KahanSum loc;
    const auto& rb = rho.rho.basis();
    for (int i = 0; i < rb.size(); ++i)
      loc.add((std::conj(model.vLocal->coefficient(rb.index(i))) * rho.rho.coeffs()[i]).real());
    out.local = loc.value();
  }

  if (model.projectors.count() > 0) {
    KahanSum nl;
    for (int i = 0; i < phi.count(); ++i)
      for (const auto& chi : model.projectors.projectors) {
        const double p = innerProductReal(chi, phi.orbital(i));
        nl.add(2.0 * p * p);
      }
    out.nonlocal = nl.value();
  }

  out.hartree = 0.5 * dGamma(rho, rho);

  if (!model.xc.isNone()) {
    Eigen::VectorXd dens = gridValues(rho.rho, ng);
    if (model.coreDensity && !model.coreDensity->isZero())
      dens += foldedGridValues(model.coreDensity->rho, ng);
    KahanSum xc;
    for (long i = 0; i < dens.size(); ++i) xc.add(model.xc.eval(std::max(dens[i], 0.0), 0));
    const double n3 = static_cast<double>(ng) * ng * ng;
    out.xc = (basis.cell().volume() / n3) * xc.value();
  }

  out.total = out.kinetic + out.local + out.nonlocal + out.hartree + out.xc;
  return out;
}

double ksEnergy(const KSModel& model, const OrbitalSet& phi, int ng) {
  return ksEnergyBreakdown(model, phi, ng).total;
}

KSHamiltonian::KSHamiltonian(const KSModel& model, const ChargeDensity& rho, int nc, int ng)
    : model_(model), nc_(nc), n_(ng) {
  model.validate();
  if (nc < 0) throw std::invalid_argument("KSHamiltonian: Nc must be nonnegative");
  requireGrid(ng, nc, "KSHamiltonian");
  basis_ = PlanewaveBasis::ball(model.cell, nc);

  // exact local + Coulomb coefficients on the 2Nc interaction box
  const int h = 2 * nc;
  BoxTensor box(h);
  bool any = false;
  if (model_.vLocal) {
    for (int nx = -h; nx <= h; ++nx)
      for (int ny = -h; ny <= h; ++ny)
        for (int nz = -h; nz <= h; ++nz)
          box.at({nx, ny, nz}) = model_.vLocal->coefficient({nx, ny, nz});
    any = true;
  }
  const auto& rb = rho.rho.basis();
  for (int i = 0; i < rb.size(); ++i) {
    const Eigen::Vector3i& q = rb.index(i);
    if (q.isZero() || q.cwiseAbs().maxCoeff() > h) continue;
    const Complex c = rho.rho.coeffs()[i];
    if (c != Complex(0.0, 0.0)) {
      box.at(q) += 4.0 * M_PI * c / model_.cell.kSquared(q);
      any = true;
    }
  }
  const bool withXc = !model_.xc.isNone();
  hasPotential_ = any || withXc;
  if (!hasPotential_) return;

  const long plane = static_cast<long>(n_) * n_;
  potGrid_.resize(plane * n_);
  SlabSynthesizer synth(box, n_, 1.0 / std::sqrt(model_.cell.volume()));
  Eigen::MatrixXd slab;
  std::optional<GridField> densGrid;
  if (withXc) {
    if (model_.coreDensity && !model_.coreDensity->isZero()) {
      GridField g = toGrid(rho.rho, n_);
      g.values() += foldedGridValues(model_.coreDensity->rho, n_);
      densGrid.emplace(std::move(g));
    } else {
      densGrid.emplace(toGrid(rho.rho, n_));
    }
  }
  for (int z = 0; z < n_; ++z) {
    synth.realSlab(z, slab);
    if (withXc) {
      for (int x = 0; x < n_; ++x)
        for (int y = 0; y < n_; ++y)
          slab(x, y) += model_.xc.eval(std::max((*densGrid)(x, y, z), 0.0), 1);
    }
    Eigen::Map<Eigen::MatrixXd>(potGrid_.data() + plane * z, n_, n_) = slab.transpose();
  }
}

Eigen::VectorXcd KSHamiltonian::applyCoeffs(const Eigen::VectorXcd& coeffs) const {
  FourierField phi(basis_, coeffs);
  return apply(phi).coeffs();
}

FourierField KSHamiltonian::apply(const FourierField& phi) const {
  if (!phi.basis().sameAs(*basis_))
    throw std::invalid_argument("KSHamiltonian: operand basis mismatch");
  FourierField out(basis_);

  if (hasPotential_) {
    const double vol = model_.cell.volume();
    SlabSynthesizer synth(toBoxTensor(phi, nc_), n_, 1.0 / std::sqrt(vol));
    SlabAnalyzer ana(n_, nc_);
    Eigen::MatrixXd slab, prod(n_, n_);
    const long plane = static_cast<long>(n_) * n_;
    for (int z = 0; z < n_; ++z) {
      synth.realSlab(z, slab);
      prod = slab.cwiseProduct(
          Eigen::Map<const Eigen::MatrixXd>(potGrid_.data() + plane * z, n_, n_).transpose());
      ana.accumulate(z, prod);
    }
    const double n3 = static_cast<double>(n_) * n_ * n_;
    BoxTensor res = ana.result(std::sqrt(vol) / n3);
    for (int i = 0; i < basis_->size(); ++i) out.coeffs()[i] = res.at(basis_->index(i));
  }

  for (int i = 0; i < basis_->size(); ++i)
    out.coeffs()[i] += 0.5 * model_.cell.kSquared(basis_->index(i)) * phi.coeffs()[i];

  if (model_.projectors.count() > 0) out += applyNonlocal(model_.projectors, phi);
  return out;
}

FourierField applyKsHamiltonian(const KSModel& model, const ChargeDensity& rho,
                                const FourierField& phi, int ng) {
  const int nc = ballCutoff(phi.basis(), "applyKsHamiltonian");
  KSHamiltonian h(model, rho, nc, ng);
  return h.apply(phi);
}

EigenSolveResult lowestEigenpairs(const KSHamiltonian& h, int count, const EigenOptions& opts,
                                  const OrbitalSet* initial) {
  const BasisPtr& basis = h.basis();
  const long dim = basis->size();
  if (count < 1 || count > dim)
    throw std::invalid_argument("lowestEigenpairs: count must lie in [1, dim V_Nc]");

  Eigen::VectorXd precond(dim);
  for (long i = 0; i < dim; ++i)
    precond[i] = 1.0 / (0.5 * basis->cell().kSquared(basis->index(static_cast<int>(i))) + 1.0);

  auto applyBlock = [&](const Eigen::MatrixXcd& x) {
    Eigen::MatrixXcd hx(dim, x.cols());
    for (long c = 0; c < x.cols(); ++c) hx.col(c) = h.applyCoeffs(x.col(c));
    return hx;
  };

  // The block inner products take real parts, which is the honest L2 pairing
  // only on the Hermitian-symmetric subspace (real-valued fields). Columns
  // must be symmetrized whenever roundoff noise can be renormalized to unit
  // scale, or the solver certifies duplicate eigenpairs from the
  // anti-symmetric copy of the spectrum.
  std::vector<int> mirror(static_cast<size_t>(dim));
  for (long i = 0; i < dim; ++i)
    mirror[static_cast<size_t>(i)] = basis->find(-basis->index(static_cast<int>(i)));
  auto symmetrize = [&](Eigen::MatrixXcd& mat) {
    for (long c = 0; c < mat.cols(); ++c)
      for (long i = 0; i < dim; ++i) {
        const long j = mirror[static_cast<size_t>(i)];
        if (j < i) continue;
        const Complex avg = 0.5 * (mat(i, c) + std::conj(mat(j, c)));
        mat(i, c) = avg;
        mat(j, c) = std::conj(avg);
      }
  };

  // seed-fixed starting subspace, optionally warm-started
  Eigen::MatrixXcd x(dim, count);
  {
    OrbitalSet start = OrbitalSet::randomOrthonormal(basis, count, opts.seed);
    for (int c = 0; c < count; ++c) x.col(c) = start.orbital(c).coeffs();
    if (initial) {
      const int reuse = std::min(initial->count(), count);
      for (int c = 0; c < reuse; ++c) {
        if (!initial->basis().sameAs(*basis))
          throw std::invalid_argument("lowestEigenpairs: warm-start basis mismatch");
        x.col(c) = initial->orbital(c).coeffs();
      }
    }
  }
  orthonormalizeColumns(x, nullptr);
  if (x.cols() < count) throw std::runtime_error("lowestEigenpairs: starting block lost rank");
  Eigen::MatrixXcd p(dim, 0);  // normalized increment directions

  Eigen::VectorXd theta(count), resnorm(count);
  int iter = 0;
  for (;; ++iter) {
    // operator images are recomputed from scratch every sweep; tracking them
    // through the block updates lets roundoff accumulate into the Ritz
    // problem and can certify spurious pairs on degenerate spectra
    orthonormalizeColumns(x, nullptr);
    if (x.cols() < count) throw std::runtime_error("lowestEigenpairs: iterate block lost rank");
    Eigen::MatrixXcd hx = applyBlock(x);

    // Rayleigh-Ritz inside the current block
    Eigen::MatrixXd a = realGram(x, hx);
    a = 0.5 * (a + a.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    const Eigen::MatrixXcd c = es.eigenvectors().cast<Complex>();
    x = (x * c).eval();
    hx = (hx * c).eval();
    theta = es.eigenvalues();

    Eigen::MatrixXcd r = hx;
    for (int i = 0; i < count; ++i) r.col(i) -= theta[i] * x.col(i);
    for (int i = 0; i < count; ++i) resnorm[i] = r.col(i).norm();
    if ((resnorm.array() <= opts.tol).all()) break;
    if (iter >= opts.maxIter)
      throw EigensolverError(
          "eigensolver did not reach tolerance; worst residual " +
              std::to_string(resnorm.maxCoeff()) + " after " + std::to_string(iter) + " iterations",
          resnorm);

    // W block: preconditioned residuals, orthonormalized against X and
    // internally so its columns keep unit scale even when residuals are tiny.
    Eigen::MatrixXcd w = r;
    for (int i = 0; i < count; ++i) w.col(i).array() *= precond.array();
    symmetrize(w);
    w -= x * realGram(x, w).cast<Complex>();
    orthonormalizeColumns(w, nullptr);
    Eigen::MatrixXcd hw = applyBlock(w);

    // P block: previous increment directions, orthonormalized against X and W.
    if (p.cols() > 0) {
      p -= x * realGram(x, p).cast<Complex>();
      p -= w * realGram(w, p).cast<Complex>();
      double worst = 0.0;
      for (long j = 0; j < p.cols(); ++j) worst = std::max(worst, p.col(j).norm());
      if (worst < 1e-10)
        p.resize(dim, 0);
      else
        orthonormalizeColumns(p, nullptr);
    }
    Eigen::MatrixXcd hp = applyBlock(p);

    Eigen::MatrixXcd s(dim, x.cols() + w.cols() + p.cols());
    Eigen::MatrixXcd hs(dim, s.cols());
    s.leftCols(x.cols()) = x;
    s.middleCols(x.cols(), w.cols()) = w;
    s.rightCols(p.cols()) = p;
    hs.leftCols(hx.cols()) = hx;
    hs.middleCols(hx.cols(), hw.cols()) = hw;
    hs.rightCols(hp.cols()) = hp;

    Eigen::MatrixXd as = realGram(s, hs);
    as = 0.5 * (as + as.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ess(as);
    const Eigen::MatrixXcd cs = ess.eigenvectors().leftCols(count).cast<Complex>();

    // next increment block: the part of the new iterate outside the old X,
    // renormalized column by column so the subspace stays well conditioned
    const long nwp = s.cols() - x.cols();
    const Eigen::MatrixXcd csWp = cs.bottomRows(nwp);
    Eigen::MatrixXcd pNext = s.rightCols(nwp) * csWp;
    std::vector<long> keep;
    for (long j = 0; j < pNext.cols(); ++j)
      if (pNext.col(j).norm() > 1e-14) keep.push_back(j);
    p.resize(dim, static_cast<long>(keep.size()));
    for (size_t j = 0; j < keep.size(); ++j)
      p.col(static_cast<long>(j)) = pNext.col(keep[j]) / pNext.col(keep[j]).norm();

    x = s * cs;
  }

  std::vector<FourierField> orbitals;
  orbitals.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) orbitals.emplace_back(basis, x.col(i));
  EigenSolveResult out;
  out.values = theta;
  out.orbitals = OrbitalSet(std::move(orbitals));
  out.residuals = resnorm;
  out.iterations = iter;
  return out;
}

EigenSolveResult lowestEigenpairs(const KSModel& model, const ChargeDensity& rho, int count,
                                  int nc, int ng, const EigenOptions& opts) {
  KSHamiltonian h(model, rho, nc, ng);
  return lowestEigenpairs(h, count, opts);
}

namespace {

/// Anderson acceleration over density coefficient vectors: minimizes the
/// combined fixed-point residual over the trailing history window.
class AndersonMixer {
 public:
  AndersonMixer(int depth, double beta) : depth_(depth), beta_(beta) {}

  Eigen::VectorXcd next(const Eigen::VectorXcd& rho, const Eigen::VectorXcd& f) {
    rhos_.push_back(rho);
    fs_.push_back(f);
    while (static_cast<int>(rhos_.size()) > depth_ + 1) {
      rhos_.pop_front();
      fs_.pop_front();
    }
    const int m = static_cast<int>(rhos_.size()) - 1;
    if (m == 0) return rho + beta_ * f;
    Eigen::MatrixXcd df(f.size(), m);
    Eigen::MatrixXcd dr(f.size(), m);
    for (int j = 0; j < m; ++j) {
      df.col(j) = fs_[static_cast<size_t>(j + 1)] - fs_[static_cast<size_t>(j)];
      dr.col(j) = rhos_[static_cast<size_t>(j + 1)] - rhos_[static_cast<size_t>(j)];
    }
    const Eigen::VectorXcd gamma = df.colPivHouseholderQr().solve(f);
    Eigen::VectorXcd rhoBar = rho - dr * gamma;
    Eigen::VectorXcd fBar = f - df * gamma;
    return rhoBar + beta_ * fBar;
  }

 private:
  int depth_;
  double beta_;
  std::deque<Eigen::VectorXcd> rhos_, fs_;
};

}  // namespace

KSState solveKs(const KSModel& model, int nc, int ng, const KsOptions& opts) {
  model.validate();
  requireGrid(ng, nc, "solveKs");
  const int n = model.pairCount;
  BasisPtr rhoBasis = PlanewaveBasis::ball(model.cell, 2 * nc);

  EigenOptions eig;
  eig.tol = opts.eigTol > 0.0 ? opts.eigTol : opts.tol / 10.0;
  eig.seed = opts.seed;

  // uniform starting density carrying the full charge 2 * pairCount
  FourierField rhoField(rhoBasis);
  rhoField.setCoeff(Eigen::Vector3i::Zero(), 2.0 * n / std::sqrt(model.cell.volume()));
  ChargeDensity rho(std::move(rhoField));

  std::optional<AndersonMixer> anderson;
  if (opts.andersonDepth > 0) anderson.emplace(opts.andersonDepth, opts.mixing);

  std::optional<OrbitalSet> warm;
  if (opts.initialGuess) {
    if (opts.initialGuess->count() < n)
      throw std::invalid_argument("solveKs: initial guess must supply at least pairCount orbitals");
    OrbitalSet projected = manifoldProject(*opts.initialGuess, nc);
    std::vector<FourierField> occ(projected.all().begin(), projected.all().begin() + n);
    rho = orbitalDensity(OrbitalSet(std::move(occ)));
    warm = std::move(projected);
  }
  double residual = 0.0;
  int iter = 0;
  bool converged = false;
  std::optional<EigenSolveResult> es;
  for (; iter < opts.maxIter; ++iter) {
    KSHamiltonian h(model, rho, nc, ng);
    es = lowestEigenpairs(h, n + 1, eig, warm ? &*warm : nullptr);
    warm = es->orbitals;

    std::vector<FourierField> occ(es->orbitals.all().begin(), es->orbitals.all().begin() + n);
    ChargeDensity rhoOut = orbitalDensity(OrbitalSet(std::move(occ)));
    const Eigen::VectorXcd f = rhoOut.rho.coeffs() - rho.rho.coeffs();
    residual = std::sqrt(kahanSquaredNorm(f));
    if (opts.onIterate) opts.onIterate(iter, residual);
    if (residual <= opts.tol) {
      rho = std::move(rhoOut);
      converged = true;
      ++iter;
      break;
    }
    if (anderson) {
      rho.rho.coeffs() = anderson->next(rho.rho.coeffs(), f);
    } else {
      rho.rho.coeffs() += opts.mixing * f;
    }
  }

  // polish: eigensolve at the converged (or best) density so the returned
  // orbitals satisfy the Euler conditions at their own density
  KSHamiltonian h(model, rho, nc, ng);
  es = lowestEigenpairs(h, n + 1, eig, warm ? &*warm : nullptr);
  std::vector<FourierField> occ(es->orbitals.all().begin(), es->orbitals.all().begin() + n);
  OrbitalSet phi(std::move(occ));

  KSState state;
  state.frontierGap = es->values[n] - es->values[n - 1];
  state.degenerateFrontier = std::abs(state.frontierGap) < 1e-8;

  Eigen::MatrixXd lambda(n, n);
  std::vector<FourierField> hphi;
  hphi.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) hphi.push_back(h.apply(phi.orbital(i)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) lambda(i, j) = innerProductReal(hphi[static_cast<size_t>(i)], phi.orbital(j));
  lambda = 0.5 * (lambda + lambda.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> lam(lambda);
  state.multipliers = lambda;
  state.eigenvalues = lam.eigenvalues();
  state.orbitals = phi.rotated(lam.eigenvectors().transpose());
  state.density = orbitalDensity(state.orbitals);
  state.energy = ksEnergy(model, state.orbitals, ng);
  state.residual = residual;
  state.iterations = iter;
  state.converged = converged;
  if (!converged)
    throw ScfError("SCF did not reach the density-map tolerance within the iteration budget",
                   state);
  return state;
}

OrbitalSet align(const OrbitalSet& psi, const OrbitalSet& phi, double* conditionNumber) {
  if (psi.count() != phi.count())
    throw std::invalid_argument("align: orbital counts must match");
  const Eigen::MatrixXd m = gramMatrix(psi, phi);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double smax = svd.singularValues().maxCoeff();
  const double smin = svd.singularValues().minCoeff();
  if (!(smin > 1e-12 * smax))
    throw std::runtime_error("align: overlap matrix numerically singular");
  if (conditionNumber) *conditionNumber = smax / smin;
  const Eigen::MatrixXd u = svd.matrixV() * svd.matrixU().transpose();
  return psi.rotated(u);
}

OrbitalSet manifoldProject(const OrbitalSet& phi, int nc) {
  std::vector<FourierField> truncated;
  truncated.reserve(static_cast<size_t>(phi.count()));
  for (int i = 0; i < phi.count(); ++i) truncated.push_back(project(phi.orbital(i), nc));
  OrbitalSet pphi(std::move(truncated));
  Eigen::MatrixXd m = pphi.gram();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (!(es.eigenvalues().minCoeff() > 1e-12 * es.eigenvalues().maxCoeff()))
    throw std::runtime_error("manifoldProject: truncated orbitals are rank deficient");
  const Eigen::MatrixXd invSqrt = es.eigenvectors() *
                                  es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                                  es.eigenvectors().transpose();
  return pphi.rotated(invSqrt);
}

double secondOrderForm(const KSModel& model, const OrbitalSet& phi0, const Eigen::VectorXd& eps0,
                       const OrbitalSet& psi, const OrbitalSet& ups, int ng) {
  model.validate();
  const int n = phi0.count();
  if (psi.count() != n || ups.count() != n || eps0.size() != n)
    throw std::invalid_argument("secondOrderForm: size mismatch");
  const int nc = ballCutoff(phi0.basis(), "secondOrderForm");
  requireGrid(ng, nc, "secondOrderForm");

  ChargeDensity rho0 = orbitalDensity(phi0);
  KSHamiltonian h(model, rho0, nc, ng);

  KahanSum first;
  for (int i = 0; i < n; ++i) {
    const FourierField hpsi = h.apply(psi.orbital(i));
    first.add(innerProductReal(hpsi, ups.orbital(i)) -
              eps0[i] * innerProductReal(psi.orbital(i), ups.orbital(i)));
  }

  FourierField p(PlanewaveBasis::ball(model.cell, 2 * nc));
  FourierField q(PlanewaveBasis::ball(model.cell, 2 * nc));
  for (int i = 0; i < n; ++i) {
    p += productField(phi0.orbital(i), psi.orbital(i));
    q += productField(phi0.orbital(i), ups.orbital(i));
  }
  const double coulomb = 4.0 * dGamma(ChargeDensity(p), ChargeDensity(q));

  double xc = 0.0;
  if (!model.xc.isNone()) {
    Eigen::VectorXd dens = gridValues(rho0.rho, ng);
    if (model.coreDensity && !model.coreDensity->isZero())
      dens += foldedGridValues(model.coreDensity->rho, ng);
    const Eigen::VectorXd pg = gridValues(p, ng);
    const Eigen::VectorXd qg = gridValues(q, ng);
    KahanSum acc;
    for (long i = 0; i < dens.size(); ++i)
      acc.add(model.xc.eval(std::max(dens[i], 0.0), 2) * pg[i] * qg[i]);
    const double n3 = static_cast<double>(ng) * ng * ng;
    xc = 4.0 * (model.cell.volume() / n3) * acc.value();
  }

  return first.value() + coulomb + xc;
}

}  // namespace pwdft
