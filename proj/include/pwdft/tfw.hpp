#ifndef PWDFT_TFW_HPP
#define PWDFT_TFW_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include "pwdft/coulomb.hpp"
#include "pwdft/field.hpp"
#include "pwdft/potentials.hpp"
#include "pwdft/transforms.hpp"

namespace pwdft {

/// Thomas-Fermi constant as configured by default; a model parameter, not a
/// universal constant (see README on the choice of normalization).
inline double defaultThomasFermiConstant() {
  return (10.0 / 3.0) * std::pow(3.0 * M_PI * M_PI, 2.0 / 3.0);
}

/// Orbital-free Thomas-Fermi-von Weizsaecker model
///   E(v) = cW/2 ||grad v||^2 + cTF int |v|^{10/3} + int V |v|^2
///          + 1/2 D(|v|^2, |v|^2)
/// minimized over the sphere ||v||^2 = electronCount.
struct TFWModel {
  CellSpec cell;
  double cW = 1.0;
  double cTF = defaultThomasFermiConstant();
  double electronCount = 1.0;
  std::optional<LocalPotential> vIon;  // empty = free model

  void validate() const {
    if (!(cW > 0.0) || !(cTF > 0.0) || !(electronCount > 0.0))
      throw std::invalid_argument("TFWModel: cW, cTF, electronCount must be positive");
  }
};

struct TfwOptions {
  double tol = 1e-10;      // on ||Hv - lambda v|| / sqrt(electronCount)
  int maxIter = 5000;
  std::uint64_t seed = 0;  // used only for the random feasible start
  bool randomInit = false;
  const FourierField* initialGuess = nullptr;  // projected and rescaled if set
  // optional progress hook: (iteration, energy, residual)
  std::function<void(int, double, double)> onIterate;
};

struct TfwEnergyBreakdown {
  double total = 0.0;
  double kinetic = 0.0;
  double thomasFermi = 0.0;
  double external = 0.0;
  double hartree = 0.0;
  bool constraintWarning = false;  // ||v||^2 off the sphere by more than 1e-8
};

struct TFWState {
  FourierField v;
  double lambda = 0.0;
  double energy = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

class TfwConvergenceError : public std::runtime_error {
 public:
  TfwConvergenceError(const std::string& msg, TFWState best)
      : std::runtime_error(msg), best_(std::move(best)) {}

  const TFWState& best() const { return best_; }

 private:
  TFWState best_;
};

/// Shared evaluation engine for both discretizations of the model.
///
/// PotentialMode::Exact uses the true Fourier coefficients of V restricted to
/// the 2Nc interaction box (the variational model; the grid only quadratures
/// the |v|^{10/3} term). PotentialMode::Folded uses the aliased coefficients
/// of the grid interpolant of V (the fully pseudospectral model).
///
/// All multiplicative Hamiltonian terms are applied exactly into the Nc ball:
/// by direct convolution over the 2Nc coefficient box when the basis is
/// small, or by a streamed grid multiply whose aliasing images provably miss
/// the Nc ball when gridSize >= 4Nc+1.
class TFWEvaluator {
 public:
  enum class PotentialMode { Exact, Folded };

  TFWEvaluator(const TFWModel& model, int nc, int gridSize, PotentialMode mode);

  struct Evaluation {
    TfwEnergyBreakdown energy;
    FourierField hv;       // Hamiltonian applied to v, in the Nc ball
    double lambda = 0.0;   // <Hv, v> / electronCount
    double residual = 0.0; // ||Hv - lambda v|| / sqrt(electronCount)
    BoxTensor rho{0};      // coefficients of v^2 on the 2Nc box
  };

  Evaluation evaluate(const FourierField& v) const;

  /// Hamiltonian of a prescribed density applied to w (density and iterate
  /// decoupled, as in fixed-point analyses).
  FourierField applyHamiltonian(const ChargeDensity& rho, const FourierField& w) const;

  const BasisPtr& basis() const { return basis_; }
  int gridSize() const { return n_; }
  int cutoffIndex() const { return nc_; }

 private:
  BoxTensor potentialBox(const BoxTensor& fBox, const BoxTensor& rhoBox) const;
  FourierField multiply(const BoxTensor& cbox, const FourierField& w,
                        const Eigen::VectorXd* wGrid) const;

  const TFWModel& model_;
  int nc_;
  int n_;
  BasisPtr basis_;        // ball Nc
  BoxTensor vIonBox_;     // V coefficients (exact or folded) on the 2Nc box
  bool useConvolution_;   // direct convolution vs grid multiply
  bool storeIterateGrid_; // keep v's grid values for the multiply pass
};

/// Variational energy: kinetic, external, and Hartree terms exact in Fourier
/// space; the |v|^{10/3} term by quadrature on the (default 4Nc+1) grid.
double tfwEnergy(const TFWModel& model, const FourierField& v, int nq);

/// Pseudospectral energy: the |v|^{10/3} and external terms go through the
/// Ng-grid interpolant (requires Ng >= 4Nc+1, odd).
double tfwEnergyPs(const TFWModel& model, const FourierField& v, int ng);

/// Pseudospectral Hamiltonian of the given density applied to w.
FourierField applyTfwHamiltonian(const TFWModel& model, const ChargeDensity& rho,
                                 const FourierField& w, int ng);

/// Ground state on the sphere by preconditioned Riemannian gradient descent
/// with Barzilai-Borwein steps and nonmonotone Armijo backtracking.
/// ng == 0 selects the variational model with the default quadrature grid;
/// ng > 0 selects the pseudospectral model on the Ng grid.
TFWState solveTfw(const TFWModel& model, int nc, int ng, const TfwOptions& opts = {});

/// Euler-Lagrange residual ||P(Hv - lambda v)|| / sqrt(electronCount) of a
/// state, recomputed from scratch.
double tfwResidual(const TFWModel& model, const TFWState& state, int ng);

/// Default quadrature size for the variational model: the smallest odd grid
/// that integrates products of Nc-ball functions exactly.
inline int defaultQuadratureSize(int nc) { return 4 * nc + 1; }

}  // namespace pwdft

#endif
