// Command-line entry point: parse run configs, dispatch solves and studies,
// emit result records, CSVs, and field dumps.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pwdft/config.hpp"
#include "pwdft/harness.hpp"
#include "pwdft/io.hpp"
#include "pwdft/norms.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;
using namespace pwdft;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void writeText(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

/// Machine-readable failure record dropped next to the other artifacts.
void writeErrorRecord(const fs::path& outDir, const std::string& stage, const std::string& what) {
  writeText(outDir / "error.txt", "stage = " + stage + "\nmessage = " + what + "\n");
}

void applyThreads(std::optional<int> threads) {
  if (!threads) {
    if (const char* env = std::getenv("PWDFT_THREADS")) threads = std::atoi(env);
  }
#ifdef _OPENMP
  if (threads && *threads > 0) omp_set_num_threads(*threads);
#else
  (void)threads;
#endif
}

struct CommonArgs {
  std::string configPath;
  std::string outDir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

void addCommon(CLI::App* cmd, CommonArgs& args, bool needsConfig) {
  auto* opt = cmd->add_option("--config", args.configPath, "path to the run config file");
  if (needsConfig) opt->required();
  cmd->add_option("--out", args.outDir, "output directory (created if missing)");
  cmd->add_option("--seed", args.seed, "override the config seed");
  cmd->add_option("--threads", args.threads, "worker thread count (or env PWDFT_THREADS)");
}

RunConfig loadAndOverride(const CommonArgs& args) {
  RunConfig cfg = loadRunConfig(args.configPath);
  if (args.seed) cfg.seed = *args.seed;
  return cfg;
}

int requireCutoff(const RunConfig& cfg) {
  if (!cfg.nc) throw ConfigError({{0, "this command requires `nc` in [discretization]"}});
  return *cfg.nc;
}

int runSolveTfw(const RunConfig& cfg, const fs::path& outDir) {
  const int nc = requireCutoff(cfg);
  const TFWModel model = cfg.buildTfwModel();
  TfwOptions opts;
  opts.tol = cfg.tol;
  opts.seed = cfg.seed;
  if (cfg.maxIter > 0) opts.maxIter = cfg.maxIter;

  TFWState state;
  try {
    state = solveTfw(model, nc, cfg.ng.value_or(0), opts);
  } catch (const TfwConvergenceError& e) {
    writeErrorRecord(outDir, "solve-tfw", e.what());
    writeField((outDir / "u.pwf").string(), e.best().v);
    return 1;
  }
  std::string rec;
  rec += "energy = " + fmt(state.energy) + "\n";
  rec += "lambda = " + fmt(state.lambda) + "\n";
  rec += "residual = " + fmt(state.residual) + "\n";
  rec += "iterations = " + std::to_string(state.iterations) + "\n";
  rec += "converged = " + std::string(state.converged ? "true" : "false") + "\n";
  writeText(outDir / "result.txt", rec);
  writeField((outDir / "u.pwf").string(), state.v);
  std::printf("solve-tfw: energy = %s  lambda = %s  (%d iterations)\n", fmt(state.energy).c_str(),
              fmt(state.lambda).c_str(), state.iterations);
  return 0;
}

int runSolveKs(const RunConfig& cfg, const fs::path& outDir) {
  const int nc = requireCutoff(cfg);
  const KSModel model = cfg.buildKsModel();
  KsOptions opts;
  opts.tol = cfg.tol;
  opts.seed = cfg.seed;
  opts.mixing = cfg.mixing;
  opts.andersonDepth = cfg.andersonDepth;
  if (cfg.maxIter > 0) opts.maxIter = cfg.maxIter;

  KSState state;
  try {
    state = solveKs(model, nc, cfg.ng.value_or(4 * nc + 1), opts);
  } catch (const ScfError& e) {
    writeErrorRecord(outDir, "solve-ks", e.what());
    return 1;
  }
  std::string rec;
  rec += "energy = " + fmt(state.energy) + "\n";
  for (int i = 0; i < state.eigenvalues.size(); ++i)
    rec += "epsilon_" + std::to_string(i + 1) + " = " + fmt(state.eigenvalues[i]) + "\n";
  for (int i = 0; i < state.multipliers.rows(); ++i) {
    rec += "lambda_row_" + std::to_string(i + 1) + " =";
    for (int j = 0; j < state.multipliers.cols(); ++j) rec += " " + fmt(state.multipliers(i, j));
    rec += "\n";
  }
  rec += "residual = " + fmt(state.residual) + "\n";
  rec += "iterations = " + std::to_string(state.iterations) + "\n";
  rec += "converged = " + std::string(state.converged ? "true" : "false") + "\n";
  rec += "frontier_gap = " + fmt(state.frontierGap) + "\n";
  rec += "degenerate_frontier = " + std::string(state.degenerateFrontier ? "true" : "false") + "\n";
  writeText(outDir / "result.txt", rec);
  for (int i = 0; i < state.orbitals.count(); ++i)
    writeField((outDir / ("orbital_" + std::to_string(i + 1) + ".pwf")).string(),
               state.orbitals.orbital(i));
  std::printf("solve-ks: energy = %s  (%d iterations)\n", fmt(state.energy).c_str(),
              state.iterations);
  return 0;
}

std::variant<TFWModel, KSModel> buildModel(const RunConfig& cfg) {
  if (cfg.modelKind == RunConfig::ModelKind::Tfw) return cfg.buildTfwModel();
  return cfg.buildKsModel();
}

/// Slope summary rows for every tracked quantity; fits that lack enough
/// points (e.g. all-zero errors on an exact problem) are skipped.
std::string slopesCsv(const ConvergenceReport& report) {
  using Q = ConvergenceReport::Quantity;
  const auto abscissa = report.gridStudy ? ConvergenceReport::Abscissa::Grid
                                         : ConvergenceReport::Abscissa::Cutoff;
  std::string out = "quantity,index,exponent,intercept,residual,points\n";
  auto row = [&](const std::string& name, int index, Q q) {
    try {
      const SlopeFit fit = report.slope(q, index, abscissa);
      out += name + "," + std::to_string(index + 1) + "," + fmt(fit.exponent) + "," +
             fmt(fit.intercept) + "," + fmt(fit.residual) + "," + std::to_string(fit.points) + "\n";
    } catch (const std::invalid_argument&) {
      // not enough positive points for a fit
    }
  };
  for (size_t j = 0; j < report.norms.size(); ++j) row("norm", static_cast<int>(j), Q::Norm);
  for (size_t j = 0; j < report.referenceEigenvalues.size(); ++j)
    row("eigenvalue", static_cast<int>(j), Q::Eigenvalue);
  row("energy", 0, Q::Energy);
  return out;
}

int runConverge(const RunConfig& cfg, const fs::path& outDir) {
  if (cfg.cutoffs.empty() || !cfg.referenceCutoff)
    throw ConfigError({{0, "converge requires `cutoffs` and `reference` in [study]"}});
  StudySpec spec(buildModel(cfg));
  spec.cutoffs = cfg.cutoffs;
  spec.referenceCutoff = *cfg.referenceCutoff;
  spec.norms = cfg.norms;
  spec.tol = cfg.tol;
  spec.seed = cfg.seed;
  if (cfg.ng) {
    spec.ngRule = StudySpec::NgRule::Fixed;
    spec.fixedNg = *cfg.ng;
  }

  ConvergenceReport report;
  try {
    report = runStudy(spec);
  } catch (const StudyError& e) {
    writeText(outDir / "study.csv", e.partial().csv());
    writeErrorRecord(outDir, "converge", e.what());
    return 1;
  }
  writeText(outDir / "study.csv", report.csv());
  writeText(outDir / "slopes.csv", slopesCsv(report));
  std::printf("converge: %zu records, reference Nc = %d\n%s", report.records.size(),
              report.referenceCutoff, slopesCsv(report).c_str());
  return 0;
}

int runNgStudy(const RunConfig& cfg, const fs::path& outDir) {
  const int nc = requireCutoff(cfg);
  if (cfg.grids.empty()) throw ConfigError({{0, "ng-study requires `grids` in [study]"}});

  ConvergenceReport report;
  try {
    report = ngStudy(buildModel(cfg), nc, cfg.grids, cfg.norms, cfg.tol, cfg.seed);
  } catch (const StudyError& e) {
    writeText(outDir / "ng_study.csv", e.partial().csv());
    writeErrorRecord(outDir, "ng-study", e.what());
    return 1;
  }
  writeText(outDir / "ng_study.csv", report.csv());
  writeText(outDir / "slopes.csv", slopesCsv(report));
  std::printf("ng-study: %zu records, reference Ng = %d\n%s", report.records.size(),
              report.referenceGrid, slopesCsv(report).c_str());
  return 0;
}

int runSelfcheck(const std::string& examplesDir, std::uint64_t seed) {
  int failures = 0;
  auto report = [&](const std::string& name, bool pass, const std::string& detail = "") {
    std::printf("%-52s %s%s%s\n", name.c_str(), pass ? "PASS" : "FAIL", detail.empty() ? "" : "  ",
                detail.c_str());
    if (!pass) ++failures;
  };

  const CellSpec cell(10.0);

  // quadrature integrates the V_{4Nc} products exactly
  {
    const int nc = 2, ng = 4 * 4 * nc + 1;
    bool pass = true;
    for (int trial = 0; trial < 20 && pass; ++trial) {
      FourierField v(PlanewaveBasis::ball(cell, 4 * nc));
      for (int i = 0; i < v.basis().size(); ++i) {
        const Eigen::Vector3i& n = v.basis().index(i);
        v.coeffs()[i] = std::pow(1.0 + n.cast<double>().squaredNorm(), -1.5) *
                        hermitianPhase(n, seed + 1000u * trial);
      }
      GridField g = toGrid(v, ng);
      const double quad = g.values().sum() * cell.volume() / g.pointCount();
      if (std::abs(quad - integral(v)) > 1e-12 * (1.0 + std::abs(integral(v)))) pass = false;
    }
    report("exact integration on V_4Nc", pass);
  }

  // Parseval on the grid
  {
    FourierField v(PlanewaveBasis::ball(cell, 4));
    for (int i = 0; i < v.basis().size(); ++i) {
      const Eigen::Vector3i& n = v.basis().index(i);
      v.coeffs()[i] =
          std::pow(1.0 + n.cast<double>().squaredNorm(), -1.0) * hermitianPhase(n, seed + 7u);
    }
    GridField g = toGrid(v, 17);
    const double quad = g.values().squaredNorm() * cell.volume() / g.pointCount();
    const double exact = v.coeffs().squaredNorm();
    report("Parseval identity on the quadrature grid", std::abs(quad - exact) <= 1e-12 * exact);
  }

  // free-particle spectrum
  {
    const int nc = 4;
    KSModel model{cell, 1, {}, {}, {}, XCFunctional::none()};
    FourierField zero(PlanewaveBasis::ball(cell, 2 * nc));
    EigenSolveResult es =
        lowestEigenpairs(model, ChargeDensity(std::move(zero)), 8, nc, 4 * nc + 1);
    std::vector<double> lattice;
    const auto basis = PlanewaveBasis::ball(cell, nc);
    for (int i = 0; i < basis->size(); ++i) lattice.push_back(0.5 * cell.kSquared(basis->index(i)));
    std::sort(lattice.begin(), lattice.end());
    bool pass = true;
    for (int i = 0; i < 8; ++i)
      if (std::abs(es.values[i] - lattice[static_cast<size_t>(i)]) > 1e-10) pass = false;
    report("free-particle spectrum", pass);
  }

  // every bundled example config parses
  if (fs::is_directory(examplesDir)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(examplesDir))
      if (entry.path().extension() == ".cfg") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) report("example configs found in " + examplesDir, false);
    for (const fs::path& file : files) {
      std::string detail;
      bool pass = true;
      try {
        loadRunConfig(file.string());
      } catch (const ConfigError& e) {
        pass = false;
        detail = e.issues().empty() ? "" : e.issues().front().message;
      }
      report("config parses: " + file.filename().string(), pass, detail);
    }
  } else {
    report("example config directory " + examplesDir, false, "not a directory");
  }

  std::printf("selfcheck: %s\n", failures == 0 ? "all checks passed" : "FAILURES detected");
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"planewave TFW / Kohn-Sham ground-state solver and convergence-study harness"};
  app.require_subcommand(1);

  CommonArgs solveTfwArgs, solveKsArgs, convergeArgs, ngStudyArgs, selfcheckArgs;
  std::string examplesDir = "configs";

  auto* cmdSolveTfw =
      app.add_subcommand("solve-tfw", "orbital-free ground state at one discretization");
  addCommon(cmdSolveTfw, solveTfwArgs, true);
  auto* cmdSolveKs = app.add_subcommand("solve-ks", "Kohn-Sham ground state at one discretization");
  addCommon(cmdSolveKs, solveKsArgs, true);
  auto* cmdConverge = app.add_subcommand("converge", "cutoff sweep against a reference solution");
  addCommon(cmdConverge, convergeArgs, true);
  auto* cmdNgStudy = app.add_subcommand("ng-study", "grid sweep at a fixed cutoff");
  addCommon(cmdNgStudy, ngStudyArgs, true);
  auto* cmdSelfcheck = app.add_subcommand("selfcheck", "run the invariant suite");
  addCommon(cmdSelfcheck, selfcheckArgs, false);
  cmdSelfcheck->add_option("--examples", examplesDir, "directory of bundled example configs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmdSelfcheck->parsed()) {
      applyThreads(selfcheckArgs.threads);
      return runSelfcheck(examplesDir, selfcheckArgs.seed.value_or(0));
    }
    const CommonArgs& args = cmdSolveTfw->parsed()    ? solveTfwArgs
                             : cmdSolveKs->parsed()   ? solveKsArgs
                             : cmdConverge->parsed()  ? convergeArgs
                                                      : ngStudyArgs;
    applyThreads(args.threads);
    const RunConfig cfg = loadAndOverride(args);
    const fs::path outDir(args.outDir);
    fs::create_directories(outDir);
    if (cmdSolveTfw->parsed()) return runSolveTfw(cfg, outDir);
    if (cmdSolveKs->parsed()) return runSolveKs(cfg, outDir);
    if (cmdConverge->parsed()) return runConverge(cfg, outDir);
    return runNgStudy(cfg, outDir);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
