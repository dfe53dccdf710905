#include "pwdft/tfw.hpp"

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

int ballCutoff(const FourierField& v) {
  if (v.basis().kind() != PlanewaveBasis::Kind::Ball)
    throw std::invalid_argument("TFW: iterate must live in a ball-truncated space");
  return v.basis().cutoffIndex();
}

}  // namespace

TFWEvaluator::TFWEvaluator(const TFWModel& model, int nc, int gridSize, PotentialMode mode)
    : model_(model), nc_(nc), n_(gridSize), vIonBox_(2 * nc) {
  model.validate();
  if (nc < 0) throw std::invalid_argument("TFWEvaluator: Nc must be nonnegative");
  requireGrid(gridSize, nc, "TFWEvaluator");
  basis_ = PlanewaveBasis::ball(model.cell, nc);
  if (model.vIon) {
    if (mode == PotentialMode::Folded) {
      vIonBox_ = model.vIon->foldedBox(n_, 2 * nc);
    } else {
      const int h = 2 * nc;
      for (int nx = -h; nx <= h; ++nx)
        for (int ny = -h; ny <= h; ++ny)
          for (int nz = -h; nz <= h; ++nz)
            vIonBox_.at({nx, ny, nz}) = model.vIon->coefficient({nx, ny, nz});
    }
  }
  const double ball = static_cast<double>(basis_->size());
  const double n3 = static_cast<double>(n_) * n_ * n_;
  const double convCost = ball * ball;
  const double gridCost = n3 * static_cast<double>((4 * nc + 1) + 2 * (2 * nc + 1));
  useConvolution_ = convCost <= gridCost;
  storeIterateGrid_ = !useConvolution_ && n3 <= 2.0e7;
}

FourierField TFWEvaluator::multiply(const BoxTensor& cbox, const FourierField& w,
                                    const Eigen::VectorXd* wGrid) const {
  const double invSqrtVol = 1.0 / std::sqrt(model_.cell.volume());
  FourierField out(basis_);
  if (useConvolution_) {
    const auto& idx = basis_->indices();
    const int size = basis_->size();
    const Complex* wc = w.coeffs().data();
#pragma omp parallel for schedule(static)
    for (int ki = 0; ki < size; ++ki) {
      Complex acc(0.0, 0.0);
      const Eigen::Vector3i& k = idx[static_cast<size_t>(ki)];
      for (int li = 0; li < size; ++li)
        acc += cbox.at(k - idx[static_cast<size_t>(li)]) * wc[li];
      out.coeffs()[ki] = invSqrtVol * acc;
    }
    return out;
  }
  SlabSynthesizer synthC(cbox, n_, invSqrtVol);
  std::optional<SlabSynthesizer> synthW;
  if (!wGrid) synthW.emplace(toBoxTensor(w, nc_), n_, invSqrtVol);
  SlabAnalyzer ana(n_, nc_);
  Eigen::MatrixXd cSlab, wSlab, prod(n_, n_);
  const long plane = static_cast<long>(n_) * n_;
  for (int z = 0; z < n_; ++z) {
    synthC.realSlab(z, cSlab);
    if (wGrid) {
      prod = cSlab.cwiseProduct(
          Eigen::Map<const Eigen::MatrixXd>(wGrid->data() + plane * z, n_, n_).transpose());
    } else {
      synthW->realSlab(z, wSlab);
      prod = cSlab.cwiseProduct(wSlab);
    }
    ana.accumulate(z, prod);
  }
  const double n3 = static_cast<double>(n_) * n_ * n_;
  BoxTensor res = ana.result(std::sqrt(model_.cell.volume()) / n3);
  for (int i = 0; i < basis_->size(); ++i) out.coeffs()[i] = res.at(basis_->index(i));
  return out;
}

BoxTensor TFWEvaluator::potentialBox(const BoxTensor& fBox, const BoxTensor& rhoBox) const {
  BoxTensor cbox = fBox;
  cbox.data += vIonBox_.data;
  const int h = 2 * nc_;
  for (int nx = -h; nx <= h; ++nx)
    for (int ny = -h; ny <= h; ++ny)
      for (int nz = -h; nz <= h; ++nz) {
        const Eigen::Vector3i q(nx, ny, nz);
        if (q.isZero()) continue;
        cbox.at(q) += 4.0 * M_PI * rhoBox.at(q) / model_.cell.kSquared(q);
      }
  return cbox;
}

TFWEvaluator::Evaluation TFWEvaluator::evaluate(const FourierField& v) const {
  if (!v.basis().sameAs(*basis_))
    throw std::invalid_argument("TFWEvaluator: iterate basis mismatch");
  const double vol = model_.cell.volume();
  const double n3 = static_cast<double>(n_) * n_ * n_;
  const double quadWeight = vol / n3;
  const double fFactor = (5.0 / 3.0) * model_.cTF;

  BoxTensor vbox = toBoxTensor(v, nc_);
  SlabSynthesizer synth(vbox, n_, 1.0 / std::sqrt(vol));
  SlabAnalyzer ana(n_, 2 * nc_);
  KahanSum tfSum;
  Eigen::VectorXd vGrid;
  if (storeIterateGrid_) vGrid.resize(static_cast<long>(n_) * n_ * n_);
  Eigen::MatrixXd slab;
  Eigen::MatrixXcd zslab(n_, n_);
  const long plane = static_cast<long>(n_) * n_;
  for (int z = 0; z < n_; ++z) {
    synth.realSlab(z, slab);
    if (storeIterateGrid_)
      Eigen::Map<Eigen::MatrixXd>(vGrid.data() + plane * z, n_, n_) = slab.transpose();
    for (int x = 0; x < n_; ++x)
      for (int y = 0; y < n_; ++y) {
        const double s = slab(x, y);
        const double r = s * s;
        const double c = std::cbrt(r);
        tfSum.add(r * c * c);
        zslab(x, y) = Complex(r, fFactor * c * c);
      }
    ana.accumulateComplex(z, zslab);
  }
  auto [rhoBox, fBox] = splitHermitian(ana.result(std::sqrt(vol) / n3));

  Evaluation ev;
  ev.energy.thomasFermi = model_.cTF * quadWeight * tfSum.value();

  KahanSum kin;
  for (int i = 0; i < basis_->size(); ++i)
    kin.add(0.5 * model_.cW * model_.cell.kSquared(basis_->index(i)) *
            std::norm(v.coeffs()[i]));
  ev.energy.kinetic = kin.value();

  const int h = 2 * nc_;
  KahanSum ext, hart;
  for (int nx = -h; nx <= h; ++nx)
    for (int ny = -h; ny <= h; ++ny)
      for (int nz = -h; nz <= h; ++nz) {
        const Eigen::Vector3i q(nx, ny, nz);
        const Complex rq = rhoBox.at(q);
        if (model_.vIon) ext.add((std::conj(vIonBox_.at(q)) * rq).real());
        if (!q.isZero()) hart.add(std::norm(rq) / model_.cell.kSquared(q));
      }
  ev.energy.external = ext.value();
  ev.energy.hartree = 0.5 * 4.0 * M_PI * hart.value();
  ev.energy.total =
      ev.energy.kinetic + ev.energy.thomasFermi + ev.energy.external + ev.energy.hartree;

  const double norm2 = kahanSquaredNorm(v.coeffs());
  ev.energy.constraintWarning =
      std::abs(norm2 - model_.electronCount) > 1e-8 * std::max(1.0, model_.electronCount);

  BoxTensor cbox = potentialBox(fBox, rhoBox);
  ev.hv = multiply(cbox, v, storeIterateGrid_ ? &vGrid : nullptr);
  for (int i = 0; i < basis_->size(); ++i)
    ev.hv.coeffs()[i] += 0.5 * model_.cW * model_.cell.kSquared(basis_->index(i)) * v.coeffs()[i];

  ev.lambda = kahanDotReal(ev.hv.coeffs(), v.coeffs()) / model_.electronCount;
  KahanSum res;
  for (int i = 0; i < basis_->size(); ++i)
    res.add(std::norm(ev.hv.coeffs()[i] - ev.lambda * v.coeffs()[i]));
  ev.residual = std::sqrt(res.value() / model_.electronCount);
  ev.rho = std::move(rhoBox);
  return ev;
}

FourierField TFWEvaluator::applyHamiltonian(const ChargeDensity& rho,
                                            const FourierField& w) const {
  if (!w.basis().sameAs(*basis_))
    throw std::invalid_argument("TFWEvaluator: operand basis mismatch");
  const double vol = model_.cell.volume();
  const double n3 = static_cast<double>(n_) * n_ * n_;
  const double fFactor = (5.0 / 3.0) * model_.cTF;

  GridField g = toGrid(rho.rho, n_);
  SlabAnalyzer ana(n_, 2 * nc_);
  Eigen::MatrixXd slab(n_, n_);
  for (int z = 0; z < n_; ++z) {
    for (int x = 0; x < n_; ++x)
      for (int y = 0; y < n_; ++y) {
        const double c = std::cbrt(std::max(g(x, y, z), 0.0));  // clamp round-off
        slab(x, y) = fFactor * c * c;
      }
    ana.accumulate(z, slab);
  }
  BoxTensor cbox = ana.result(std::sqrt(vol) / n3);
  cbox.data += vIonBox_.data;
  const auto& rb = rho.rho.basis();
  for (int i = 0; i < rb.size(); ++i) {
    const Eigen::Vector3i& q = rb.index(i);
    if (q.isZero() || q.cwiseAbs().maxCoeff() > 2 * nc_) continue;
    cbox.at(q) += 4.0 * M_PI * rho.rho.coeffs()[i] / model_.cell.kSquared(q);
  }
  FourierField out = multiply(cbox, w, nullptr);
  for (int i = 0; i < basis_->size(); ++i)
    out.coeffs()[i] += 0.5 * model_.cW * model_.cell.kSquared(basis_->index(i)) * w.coeffs()[i];
  return out;
}

double tfwEnergy(const TFWModel& model, const FourierField& v, int nq) {
  const int nc = ballCutoff(v);
  TFWEvaluator ev(model, nc, nq, TFWEvaluator::PotentialMode::Exact);
  return ev.evaluate(v).energy.total;
}

double tfwEnergyPs(const TFWModel& model, const FourierField& v, int ng) {
  const int nc = ballCutoff(v);
  TFWEvaluator ev(model, nc, ng, TFWEvaluator::PotentialMode::Folded);
  return ev.evaluate(v).energy.total;
}

FourierField applyTfwHamiltonian(const TFWModel& model, const ChargeDensity& rho,
                                 const FourierField& w, int ng) {
  const int nc = ballCutoff(w);
  TFWEvaluator ev(model, nc, ng, TFWEvaluator::PotentialMode::Folded);
  return ev.applyHamiltonian(rho, w);
}

TFWState solveTfw(const TFWModel& model, int nc, int ng, const TfwOptions& opts) {
  model.validate();
  const auto mode =
      ng == 0 ? TFWEvaluator::PotentialMode::Exact : TFWEvaluator::PotentialMode::Folded;
  const int grid = ng == 0 ? defaultQuadratureSize(nc) : ng;
  TFWEvaluator ev(model, nc, grid, mode);
  const BasisPtr& basis = ev.basis();
  const double nEl = model.electronCount;
  const double sqrtN = std::sqrt(nEl);

  // initial iterate on the sphere
  FourierField v(basis);
  if (opts.initialGuess) {
    v = project(*opts.initialGuess, nc);
    const double nrm = std::sqrt(kahanSquaredNorm(v.coeffs()));
    if (nrm > 1e-14) {
      v *= sqrtN / nrm;
    } else {
      v.setCoeff(Eigen::Vector3i::Zero(), sqrtN);
    }
  } else if (opts.randomInit) {
    for (int i = 0; i < basis->size(); ++i) {
      const Eigen::Vector3i& n = basis->index(i);
      const double mag = std::pow(1.0 + n.cast<double>().squaredNorm(), -2.0);
      v.coeffs()[i] = mag * hermitianPhase(n, opts.seed ^ 0x74667721ULL);
    }
    v.setCoeff(Eigen::Vector3i::Zero(), 2.0);
    v *= sqrtN / std::sqrt(kahanSquaredNorm(v.coeffs()));
  } else {
    v.setCoeff(Eigen::Vector3i::Zero(), sqrtN);
  }

  // kinetic-shift preconditioner (cW/2 |k|^2 + sigma)^{-1}
  const double sigma = std::max(
      1.0, (5.0 / 3.0) * model.cTF * std::pow(nEl / model.cell.volume(), 2.0 / 3.0));
  Eigen::VectorXd precond(basis->size());
  for (int i = 0; i < basis->size(); ++i)
    precond[i] = 1.0 / (0.5 * model.cW * model.cell.kSquared(basis->index(i)) + sigma);

  auto riemannianGradient = [&](const FourierField& vv, const TFWEvaluator::Evaluation& e) {
    Eigen::VectorXcd g = 2.0 * (e.hv.coeffs() - e.lambda * vv.coeffs());
    return g;
  };

  TFWEvaluator::Evaluation cur = ev.evaluate(v);
  Eigen::VectorXcd g = riemannianGradient(v, cur);
  std::deque<double> window{cur.energy.total};
  double bb = 1.0;
  int iter = 0;
  bool converged = cur.residual <= opts.tol;

  // preconditioned Polak-Ribiere+ conjugate directions; the diagonal kinetic
  // preconditioner alone leaves the spatial variation of the Thomas-Fermi
  // curvature unaddressed, which CG acceleration absorbs
  Eigen::VectorXcd gPrev, dPrev;
  double gPgPrev = 0.0;

  while (!converged && iter < opts.maxIter) {
    ++iter;
    Eigen::VectorXcd pg = (precond.array() * g.array()).matrix();
    const double gPg = kahanDotReal(g, pg);
    double beta = 0.0;
    if (dPrev.size() > 0 && gPgPrev > 0.0)
      beta = std::max(0.0, (gPg - kahanDotReal(gPrev, pg)) / gPgPrev);
    Eigen::VectorXcd d = -pg;
    if (beta > 0.0) d += beta * dPrev;
    d -= (kahanDotReal(v.coeffs(), d) / nEl) * v.coeffs();  // tangent projection
    double gd = kahanDotReal(g, d);
    if (gd >= -1e-14 * gPg) {  // restart: preconditioned steepest descent
      d = -pg;
      d -= (kahanDotReal(v.coeffs(), d) / nEl) * v.coeffs();
      gd = kahanDotReal(g, d);
      if (gd >= 0.0) {  // last resort: raw gradient
        d = -g;
        gd = -kahanSquaredNorm(g);
      }
    }
    gPrev = g;
    gPgPrev = gPg;
    const double eRef = *std::max_element(window.begin(), window.end());
    const double slack = 1e-14 * (1.0 + std::abs(eRef));

    // derivative of t -> E(retract(v + t d)) at an evaluated trial point
    auto pathDerivative = [&](const FourierField& x, const TFWEvaluator::Evaluation& e,
                              double tt) {
      const Eigen::VectorXcd gx = riemannianGradient(x, e);
      const double xd = kahanDotReal(x.coeffs(), d) / nEl;
      KahanSum acc;
      for (long i = 0; i < gx.size(); ++i) {
        const Complex pd = d[i] - xd * x.coeffs()[i];
        acc.add(gx[i].real() * pd.real() + gx[i].imag() * pd.imag());
      }
      Eigen::VectorXcd probe = v.coeffs() + tt * d;
      return acc.value() * sqrtN / std::sqrt(kahanSquaredNorm(probe));
    };

    // Armijo safeguard plus a secant refinement towards the 1D minimum; the
    // conjugate directions only pay off when steps land near it
    double t = std::clamp(bb, 1e-10, 1e4);
    bool accepted = false;
    FourierField trial(basis);
    TFWEvaluator::Evaluation trialEval;
    auto evaluateAtStep = [&](double tt) {
      trial.coeffs() = v.coeffs() + tt * d;
      trial *= sqrtN / std::sqrt(kahanSquaredNorm(trial.coeffs()));
      trialEval = ev.evaluate(trial);
    };
    for (int back = 0; back < 45 && !accepted; ++back) {
      evaluateAtStep(t);
      if (trialEval.energy.total > eRef + 1e-4 * t * gd + slack) {
        t *= 0.5;
        continue;
      }
      accepted = true;
      for (int refine = 0; refine < 2; ++refine) {
        const double dphi = pathDerivative(trial, trialEval, t);
        if (std::abs(dphi) <= 0.1 * std::abs(gd)) break;  // strong Wolfe satisfied
        const double denom = gd - dphi;
        if (!(denom < 0.0)) break;
        const double tNew = std::clamp(t * gd / denom, 0.05 * t, 20.0 * t);
        const FourierField keepTrial = trial;
        const TFWEvaluator::Evaluation keepEval = trialEval;
        evaluateAtStep(tNew);
        if (trialEval.energy.total <= keepEval.energy.total + slack &&
            trialEval.energy.total <= eRef + 1e-4 * tNew * gd + slack) {
          t = tNew;
        } else {
          trial = keepTrial;
          trialEval = keepEval;
          break;
        }
      }
    }
    if (!accepted) {
      TFWState best{v, cur.lambda, cur.energy.total, cur.residual, iter, false};
      throw TfwConvergenceError("TFW line search stagnated before reaching tolerance", best);
    }
    Eigen::VectorXcd gNew = riemannianGradient(trial, trialEval);
    const Eigen::VectorXcd s = trial.coeffs() - v.coeffs();
    const Eigen::VectorXcd y = gNew - g;
    const double sy = kahanDotReal(s, y);
    const double ss = kahanSquaredNorm(s);
    bb = sy > 1e-300 ? ss / sy : t;
    dPrev = std::move(d);
    v = std::move(trial);
    cur = std::move(trialEval);
    g = std::move(gNew);
    window.push_back(cur.energy.total);
    if (window.size() > 5) window.pop_front();
    converged = cur.residual <= opts.tol;
    if (opts.onIterate) opts.onIterate(iter, cur.energy.total, cur.residual);
  }

  // sign convention: mean of v nonnegative
  if (v.coeff(Eigen::Vector3i::Zero()).real() < 0.0) {
    v *= -1.0;
  }
  TFWState state{std::move(v), cur.lambda, cur.energy.total, cur.residual, iter, converged};
  if (!converged)
    throw TfwConvergenceError("TFW solver did not converge within the iteration budget", state);
  return state;
}

double tfwResidual(const TFWModel& model, const TFWState& state, int ng) {
  const int nc = ballCutoff(state.v);
  const auto mode =
      ng == 0 ? TFWEvaluator::PotentialMode::Exact : TFWEvaluator::PotentialMode::Folded;
  const int grid = ng == 0 ? defaultQuadratureSize(nc) : ng;
  TFWEvaluator ev(model, nc, grid, mode);
  return ev.evaluate(state.v).residual;
}

}  // namespace pwdft
