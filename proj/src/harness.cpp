#include "pwdft/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "pwdft/norms.hpp"

namespace pwdft {

SlopeFit fitSlope(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw std::invalid_argument("fitSlope: at least three points required");
  const int n = static_cast<int>(points.size());
  Eigen::MatrixXd a(n, 2);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) {
    const auto& [x, y] = points[static_cast<size_t>(i)];
    if (!(x > 0.0) || !(y > 0.0))
      throw std::invalid_argument("fitSlope: points must be strictly positive");
    a(i, 0) = std::log(x);
    a(i, 1) = 1.0;
    b(i) = std::log(y);
  }
  const Eigen::Vector2d coef = a.colPivHouseholderQr().solve(b);
  SlopeFit fit;
  fit.exponent = coef[0];
  fit.intercept = coef[1];
  fit.residual = std::sqrt((a * coef - b).squaredNorm() / n);
  fit.points = n;
  return fit;
}

namespace {

double potentialDecay(const std::variant<TFWModel, KSModel>& model) {
  if (const auto* tfw = std::get_if<TFWModel>(&model))
    return tfw->vIon ? tfw->vIon->decayExponent() : std::numeric_limits<double>::infinity();
  const auto& ks = std::get<KSModel>(model);
  return ks.vLocal ? ks.vLocal->decayExponent() : std::numeric_limits<double>::infinity();
}

/// Root-sum-square H^s distance between two orbital sets (entrywise pairing).
double orbitalSetDistance(const OrbitalSet& a, const OrbitalSet& b, double s) {
  double acc = 0.0;
  for (int i = 0; i < a.count(); ++i) {
    const double d = sobolevDistance(a.orbital(i), b.orbital(i), s);
    acc += d * d;
  }
  return std::sqrt(acc);
}

double orbitalSetNorm(const OrbitalSet& a, double s) {
  double acc = 0.0;
  for (int i = 0; i < a.count(); ++i) {
    const double v = sobolevNorm(a.orbital(i), s);
    acc += v * v;
  }
  return std::sqrt(acc);
}

double cutoffEnergy(const CellSpec& cell, int nc) {
  const double k = 2.0 * M_PI * nc / cell.length;
  return 0.5 * k * k;
}

const CellSpec& modelCell(const std::variant<TFWModel, KSModel>& model) {
  if (const auto* tfw = std::get_if<TFWModel>(&model)) return tfw->cell;
  return std::get<KSModel>(model).cell;
}

/// One solved state of either model, with uniform accessors for the study.
struct Solution {
  std::optional<TFWState> tfw;
  std::optional<KSState> ks;

  double energy() const { return tfw ? tfw->energy : ks->energy; }

  std::vector<double> eigenvalues() const {
    if (tfw) return {tfw->lambda};
    std::vector<double> out(ks->eigenvalues.data(), ks->eigenvalues.data() + ks->eigenvalues.size());
    std::sort(out.begin(), out.end());
    return out;
  }
};

/// Solves the TFW model (ng = 0 selects the exact-potential variational form)
/// or the KS model on the given discretization.
Solution solvePoint(const std::variant<TFWModel, KSModel>& model, int nc, int ng, double tol,
                    std::uint64_t seed) {
  Solution s;
  if (const auto* tfw = std::get_if<TFWModel>(&model)) {
    TfwOptions o;
    o.tol = tol;
    o.seed = seed;
    s.tfw = solveTfw(*tfw, nc, ng, o);
  } else {
    KsOptions o;
    o.tol = tol;
    o.seed = seed;
    o.andersonDepth = 2;
    o.maxIter = 400;
    s.ks = solveKs(std::get<KSModel>(model), nc, ng, o);
  }
  return s;
}

/// Field/orbital errors of `sol` against `ref` in the requested norms, using
/// the sign convention (u, u_ref) >= 0 for TFW and alignment for KS.
std::vector<double> fieldErrors(const Solution& sol, const Solution& ref,
                                const std::vector<double>& norms) {
  std::vector<double> out;
  out.reserve(norms.size());
  if (sol.tfw) {
    FourierField u = sol.tfw->v;
    if (innerProductReal(u, ref.tfw->v) < 0.0) u *= -1.0;
    for (double s : norms) out.push_back(sobolevDistance(u, ref.tfw->v, s));
  } else {
    OrbitalSet aligned = align(sol.ks->orbitals, ref.ks->orbitals);
    for (double s : norms) out.push_back(orbitalSetDistance(aligned, ref.ks->orbitals, s));
  }
  return out;
}

ErrorRecord makeRecord(const Solution& sol, const Solution& ref, int nc, int ng,
                       const CellSpec& cell, const std::vector<double>& norms) {
  ErrorRecord rec;
  rec.nc = nc;
  rec.ec = cutoffEnergy(cell, nc);
  rec.ng = ng;
  rec.normErrors = fieldErrors(sol, ref, norms);
  const std::vector<double> ev = sol.eigenvalues();
  const std::vector<double> evRef = ref.eigenvalues();
  for (size_t i = 0; i < ev.size() && i < evRef.size(); ++i)
    rec.eigErrors.push_back(std::abs(ev[i] - evRef[i]));
  rec.energyDifference = sol.energy() - ref.energy();
  rec.energyError = std::abs(rec.energyDifference);
  return rec;
}

void fillReferenceData(ConvergenceReport& report, const Solution& ref,
                       const std::vector<double>& norms) {
  report.referenceEnergy = ref.energy();
  report.referenceEigenvalues = ref.eigenvalues();
  report.referenceNormValues.clear();
  for (double s : norms) {
    if (ref.tfw)
      report.referenceNormValues.push_back(sobolevNorm(ref.tfw->v, s));
    else
      report.referenceNormValues.push_back(orbitalSetNorm(ref.ks->orbitals, s));
  }
}

/// TFW cutoff studies use the exact-potential variational form; the grid only
/// quadratures the nonlinear term, so the grid rule feeds record metadata.
int tfwSolveGrid(const StudySpec& spec) {
  return spec.ngRule == StudySpec::NgRule::Fixed ? spec.fixedNg : 0;
}

}  // namespace

void StudySpec::validate() const {
  if (std::holds_alternative<TFWModel>(model))
    std::get<TFWModel>(model).validate();
  else
    std::get<KSModel>(model).validate();
  if (cutoffs.empty()) throw std::invalid_argument("StudySpec: empty cutoff list");
  int maxNc = 0;
  for (int nc : cutoffs) {
    if (nc < 1) throw std::invalid_argument("StudySpec: cutoffs must be >= 1");
    maxNc = std::max(maxNc, nc);
  }
  if (referenceCutoff < 2 * maxNc)
    throw std::invalid_argument(
        "StudySpec: reference cutoff must be at least twice the largest tested cutoff");
  if (ngRule == NgRule::Fixed) {
    if (fixedNg < 1 || fixedNg % 2 == 0 || fixedNg < 4 * referenceCutoff + 1)
      throw std::invalid_argument(
          "StudySpec: fixed grid must be odd and >= 4*Nc+1 for every solved cutoff");
  }
  const double m = potentialDecay(model);
  for (double s : norms)
    if (!(s > -m + 1.5) || !(s < m + 0.5))
      throw std::invalid_argument(
          "StudySpec: Sobolev index outside the admissible window (-m+3/2, m+1/2)");
}

int StudySpec::gridFor(int nc) const {
  return ngRule == NgRule::Fixed ? fixedNg : 4 * nc + 1;
}

std::vector<std::pair<double, double>> ConvergenceReport::curve(Quantity q, int index,
                                                                Abscissa a) const {
  std::vector<std::pair<double, double>> pts;
  double refMagnitude = 0.0;
  switch (q) {
    case Quantity::Norm:
      refMagnitude = referenceNormValues.at(static_cast<size_t>(index));
      break;
    case Quantity::Eigenvalue:
      refMagnitude = std::abs(referenceEigenvalues.at(static_cast<size_t>(index)));
      break;
    case Quantity::Energy:
      refMagnitude = std::abs(referenceEnergy);
      break;
  }
  for (const ErrorRecord& r : records) {
    double err = 0.0;
    switch (q) {
      case Quantity::Norm:
        err = r.normErrors.at(static_cast<size_t>(index));
        break;
      case Quantity::Eigenvalue:
        err = r.eigErrors.at(static_cast<size_t>(index));
        break;
      case Quantity::Energy:
        err = r.energyError;
        break;
    }
    double x = 0.0;
    switch (a) {
      case Abscissa::Cutoff:
        x = r.nc;
        break;
      case Abscissa::CutoffEnergy:
        x = r.ec;
        break;
      case Abscissa::Grid:
        x = r.ng;
        break;
    }
    if (err > 0.0) pts.emplace_back(x, err);
  }
  std::sort(pts.begin(), pts.end());
  // pre-asymptotic guard: the coarsest point is dropped when its error is a
  // sizable fraction of the reference magnitude
  if (pts.size() > 1 && pts.front().second > 0.1 * refMagnitude) pts.erase(pts.begin());
  return pts;
}

std::string ConvergenceReport::csv() const {
  std::string out = gridStudy ? "Ng,Ec" : "Nc,Ec";
  for (double s : norms) {
    if (s == 1.0)
      out += ",err_H1";
    else if (s == 0.0)
      out += ",err_L2";
    else if (s == -1.0)
      out += ",err_Hm1";
    else {
      char buf[32];
      std::snprintf(buf, sizeof buf, ",err_Hs%g", s);
      out += buf;
    }
  }
  const size_t evCount = records.empty() ? referenceEigenvalues.size() : records[0].eigErrors.size();
  for (size_t i = 1; i <= evCount; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, ",err_lambda_%zu", i);
    out += buf;
  }
  out += ",err_energy\n";
  char buf[64];
  for (const ErrorRecord& r : records) {
    std::snprintf(buf, sizeof buf, "%d", gridStudy ? r.ng : r.nc);
    out += buf;
    std::snprintf(buf, sizeof buf, ",%.17g", r.ec);
    out += buf;
    for (double e : r.normErrors) {
      std::snprintf(buf, sizeof buf, ",%.17g", e);
      out += buf;
    }
    for (double e : r.eigErrors) {
      std::snprintf(buf, sizeof buf, ",%.17g", e);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, ",%.17g\n", r.energyError);
    out += buf;
  }
  return out;
}

ConvergenceReport runStudy(const StudySpec& spec) {
  spec.validate();
  const CellSpec& cell = modelCell(spec.model);
  const bool isTfw = std::holds_alternative<TFWModel>(spec.model);

  ConvergenceReport report;
  report.norms = spec.norms;
  report.referenceCutoff = spec.referenceCutoff;
  report.referenceGrid = spec.gridFor(spec.referenceCutoff);

  const int refSolveNg = isTfw ? tfwSolveGrid(spec) : spec.gridFor(spec.referenceCutoff);
  Solution ref;
  try {
    ref = solvePoint(spec.model, spec.referenceCutoff, refSolveNg, spec.tol, spec.seed);
  } catch (const std::exception& e) {
    throw StudyError(std::string("reference solve failed: ") + e.what(), std::move(report));
  }
  fillReferenceData(report, ref, spec.norms);

  std::vector<int> cutoffs = spec.cutoffs;
  std::sort(cutoffs.begin(), cutoffs.end());
  for (int nc : cutoffs) {
    const int solveNg = isTfw ? tfwSolveGrid(spec) : spec.gridFor(nc);
    Solution sol;
    try {
      sol = solvePoint(spec.model, nc, solveNg, spec.tol, spec.seed);
    } catch (const std::exception& e) {
      throw StudyError(std::string("solve failed at cutoff ") + std::to_string(nc) + ": " +
                           e.what(),
                       std::move(report));
    }
    report.records.push_back(makeRecord(sol, ref, nc, spec.gridFor(nc), cell, spec.norms));
  }
  return report;
}

ConvergenceReport ngStudy(const std::variant<TFWModel, KSModel>& model, int nc,
                          const std::vector<int>& ngs, const std::vector<double>& norms,
                          double tol, std::uint64_t seed) {
  if (ngs.empty()) throw std::invalid_argument("ngStudy: empty grid list");
  for (int ng : ngs)
    if (ng % 2 == 0 || ng < 4 * nc + 1)
      throw std::invalid_argument("ngStudy: grids must be odd and >= 4*Nc+1");
  const CellSpec& cell = modelCell(model);

  std::vector<int> sorted = ngs;
  std::sort(sorted.begin(), sorted.end());
  const int refNg = sorted.back();

  ConvergenceReport report;
  report.norms = norms;
  report.gridStudy = true;
  report.referenceCutoff = nc;
  report.referenceGrid = refNg;

  Solution ref;
  try {
    ref = solvePoint(model, nc, refNg, tol, seed);
  } catch (const std::exception& e) {
    throw StudyError(std::string("reference solve failed: ") + e.what(), std::move(report));
  }
  fillReferenceData(report, ref, norms);

  // a single-grid request degenerates to comparing the reference with itself
  if (sorted.size() == 1) {
    report.records.push_back(makeRecord(ref, ref, nc, refNg, cell, norms));
    return report;
  }
  for (size_t i = 0; i + 1 < sorted.size(); ++i) {
    Solution sol;
    try {
      sol = solvePoint(model, nc, sorted[i], tol, seed);
    } catch (const std::exception& e) {
      throw StudyError(std::string("solve failed at grid ") + std::to_string(sorted[i]) + ": " +
                           e.what(),
                       std::move(report));
    }
    report.records.push_back(makeRecord(sol, ref, nc, sorted[i], cell, norms));
  }
  return report;
}

}  // namespace pwdft
