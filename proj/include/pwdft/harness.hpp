#ifndef PWDFT_HARNESS_HPP
#define PWDFT_HARNESS_HPP

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "pwdft/ks.hpp"
#include "pwdft/tfw.hpp"

namespace pwdft {

/// Least-squares line through (log x, log y): the exponent of an assumed
/// power law y = C x^p.
struct SlopeFit {
  double exponent = 0.0;
  double intercept = 0.0;  // log C
  double residual = 0.0;   // rms residual of the fit in log-log coordinates
  int points = 0;
};

/// Fits a power-law exponent; requires at least three strictly positive
/// points.
SlopeFit fitSlope(const std::vector<std::pair<double, double>>& points);

/// Convergence study request: solve a model on a list of cutoffs and compare
/// against a single high-cutoff reference.
struct StudySpec {
  enum class NgRule { FourNcPlusOne, Fixed };

  explicit StudySpec(std::variant<TFWModel, KSModel> m) : model(std::move(m)) {}

  std::variant<TFWModel, KSModel> model;
  std::vector<int> cutoffs;
  int referenceCutoff = 0;
  NgRule ngRule = NgRule::FourNcPlusOne;
  int fixedNg = 0;                         // only for NgRule::Fixed
  std::vector<double> norms = {1.0, 0.0, -1.0};
  double tol = 1e-10;
  std::uint64_t seed = 0;

  /// Rejects empty sweeps, references below twice the largest tested cutoff,
  /// and Sobolev indices outside the admissible window (-m+3/2, m+1/2) set by
  /// the potential's decay exponent.
  void validate() const;

  int gridFor(int nc) const;
};

/// Errors of one cutoff (or one grid size) against the study reference.
struct ErrorRecord {
  int nc = 0;
  double ec = 0.0;             // cutoff energy, ec = (2 pi nc / L)^2 / 2
  int ng = 0;
  std::vector<double> normErrors;   // aligned with the requested norm list
  std::vector<double> eigErrors;    // |lambda - lambda_ref| or per-i sorted
  double energyError = 0.0;         // |I - I_ref|
  double energyDifference = 0.0;    // signed I - I_ref
};

/// Assembled study: one record per tested point plus reference metadata used
/// by the pre-asymptotic slope guard.
struct ConvergenceReport {
  std::vector<double> norms;
  std::vector<ErrorRecord> records;
  int referenceCutoff = 0;
  int referenceGrid = 0;
  double referenceEnergy = 0.0;
  std::vector<double> referenceNormValues;  // solution norms at the reference
  std::vector<double> referenceEigenvalues;
  bool gridStudy = false;  // true when the sweep variable is the grid size

  enum class Quantity { Norm, Eigenvalue, Energy };
  enum class Abscissa { Cutoff, CutoffEnergy, Grid };

  /// (x, error) pairs for one tracked quantity. Drops the smallest-cutoff
  /// point when its error exceeds 10% of the reference magnitude
  /// (pre-asymptotic guard); zero-error points are skipped.
  std::vector<std::pair<double, double>> curve(Quantity q, int index, Abscissa a) const;

  SlopeFit slope(Quantity q, int index, Abscissa a) const { return fitSlope(curve(q, index, a)); }

  /// One row per record: Nc,Ec,err_H1,err_L2,err_Hm1,err_lambda_1..N,err_energy
  /// (norm columns follow the requested norm list; 17 significant digits).
  std::string csv() const;
};

/// A solve failed partway through a study; the records gathered before the
/// failure are preserved.
class StudyError : public std::runtime_error {
 public:
  StudyError(const std::string& msg, ConvergenceReport partial)
      : std::runtime_error(msg), partial_(std::move(partial)) {}
  const ConvergenceReport& partial() const { return partial_; }

 private:
  ConvergenceReport partial_;
};

/// Cutoff sweep against a reference solved once at spec.referenceCutoff; each
/// tested cutoff is solved independently. Field errors use the TFW sign
/// convention (u_Nc, u_ref) >= 0, or KS alignment of the orbital sets, and
/// all norms are evaluated in the common Fourier space of the reference.
ConvergenceReport runStudy(const StudySpec& spec);

/// Grid sweep at fixed cutoff; the largest grid is the reference.
ConvergenceReport ngStudy(const std::variant<TFWModel, KSModel>& model, int nc,
                          const std::vector<int>& ngs, const std::vector<double>& norms,
                          double tol = 1e-10, std::uint64_t seed = 0);

}  // namespace pwdft

#endif
