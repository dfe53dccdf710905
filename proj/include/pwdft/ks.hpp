#ifndef PWDFT_KS_HPP
#define PWDFT_KS_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pwdft/coulomb.hpp"
#include "pwdft/field.hpp"
#include "pwdft/potentials.hpp"
#include "pwdft/transforms.hpp"

namespace pwdft {

/// Kohn-Sham model with a local potential, optional separable nonlocal
/// projectors, an optional smooth core density entering only the
/// exchange-correlation term, and an exchange-correlation variant.
/// pairCount is the number of doubly occupied orbitals.
struct KSModel {
  CellSpec cell;
  int pairCount = 1;
  std::optional<LocalPotential> vLocal;
  NonlocalProjectorSet projectors;
  std::optional<CoreDensity> coreDensity;
  XCFunctional xc = XCFunctional::none();

  void validate() const {
    if (pairCount < 1) throw std::invalid_argument("KSModel: pairCount must be >= 1");
  }
};

/// A finite family of real-valued orbitals sharing one planewave basis.
/// Orthonormality (Gram = identity) is the working invariant for states on
/// the constraint manifold; it is checked by callers via gram(), not forced
/// by the type, because intermediates (e.g. inside alignment) are general.
class OrbitalSet {
 public:
  OrbitalSet() = default;

  explicit OrbitalSet(std::vector<FourierField> orbitals) : orbitals_(std::move(orbitals)) {
    if (orbitals_.empty()) throw std::invalid_argument("OrbitalSet: at least one orbital");
    for (const auto& o : orbitals_)
      if (!o.basis().sameAs(orbitals_.front().basis()))
        throw std::invalid_argument("OrbitalSet: orbitals must share one basis");
  }

  int count() const { return static_cast<int>(orbitals_.size()); }
  const FourierField& orbital(int i) const { return orbitals_[static_cast<size_t>(i)]; }
  FourierField& orbital(int i) { return orbitals_[static_cast<size_t>(i)]; }
  const std::vector<FourierField>& all() const { return orbitals_; }

  const PlanewaveBasis& basis() const { return orbitals_.front().basis(); }
  BasisPtr basisPtr() const { return orbitals_.front().basisPtr(); }

  /// Gram matrix of L2 inner products, G_ij = (phi_i, phi_j).
  Eigen::MatrixXd gram() const;

  /// Largest |G_ij - delta_ij|.
  double orthonormalityDefect() const;

  /// New set with orbitals phi'_i = sum_j u(i, j) phi_j.
  OrbitalSet rotated(const Eigen::MatrixXd& u) const;

  /// Deterministic smooth orthonormal set for tests and initial subspaces.
  static OrbitalSet randomOrthonormal(const BasisPtr& basis, int count, std::uint64_t seed);

 private:
  std::vector<FourierField> orbitals_;
};

/// Cross Gram matrix M_ij = (psi_i, phi_j); bases may differ.
Eigen::MatrixXd gramMatrix(const OrbitalSet& psi, const OrbitalSet& phi);

/// Electron density rho = 2 sum_i |phi_i|^2 of a ball-basis orbital set,
/// represented exactly on the doubled ball (products of V_Nc functions).
ChargeDensity orbitalDensity(const OrbitalSet& phi);

struct KsEnergyBreakdown {
  double total = 0.0;
  double kinetic = 0.0;   // sum_i ||grad phi_i||^2
  double local = 0.0;     // int V_local rho, exact coefficient pairing
  double nonlocal = 0.0;  // 2 sum_ij (chi_j, phi_i)^2
  double hartree = 0.0;   // 1/2 D(rho, rho)
  double xc = 0.0;        // grid quadrature of e_xc(rho_core + rho)
  bool constraintWarning = false;  // Gram off identity by more than 1e-8
};

/// Total energy with the exchange-correlation term integrated on the Ng grid
/// (Ng >= 4Nc+1 odd); every other term is exact in Fourier space.
KsEnergyBreakdown ksEnergyBreakdown(const KSModel& model, const OrbitalSet& phi, int ng);
double ksEnergy(const KSModel& model, const OrbitalSet& phi, int ng);

/// Matrix-free Kohn-Sham Hamiltonian at a fixed density:
///   H = -1/2 Lap + V_local + V_Coulomb(rho) + e_xc'(rho_core + rho) + V_nl,
/// restricted to the Nc ball. The local and Coulomb terms act through their
/// exact coefficients on the 2Nc box (alias-free on the Ng >= 4Nc+1 grid);
/// the xc derivative is sampled pointwise on the grid.
///
/// Holds references to the model and its projectors; the model must outlive
/// the Hamiltonian.
class KSHamiltonian {
 public:
  KSHamiltonian(const KSModel& model, const ChargeDensity& rho, int nc, int ng);

  /// Both entry points require Hermitian-symmetric coefficients (real-valued
  /// fields); the potential acts through real-grid synthesis.
  FourierField apply(const FourierField& phi) const;
  Eigen::VectorXcd applyCoeffs(const Eigen::VectorXcd& coeffs) const;

  const BasisPtr& basis() const { return basis_; }
  int gridSize() const { return n_; }
  int cutoffIndex() const { return nc_; }

 private:
  const KSModel& model_;
  int nc_;
  int n_;
  BasisPtr basis_;
  bool hasPotential_;
  Eigen::VectorXd potGrid_;  // z-major planes, each stored transposed slab
};

/// One Hamiltonian application H_rho phi with phi in a ball basis.
FourierField applyKsHamiltonian(const KSModel& model, const ChargeDensity& rho,
                                const FourierField& phi, int ng);

struct EigenOptions {
  double tol = 1e-10;  // on ||H x - theta x|| per eigenpair
  int maxIter = 500;
  std::uint64_t seed = 0;
};

struct EigenSolveResult {
  Eigen::VectorXd values;      // ascending
  OrbitalSet orbitals;         // orthonormal
  Eigen::VectorXd residuals;   // per eigenpair at exit
  int iterations = 0;
};

class EigensolverError : public std::runtime_error {
 public:
  EigensolverError(const std::string& msg, Eigen::VectorXd residuals)
      : std::runtime_error(msg), residuals_(std::move(residuals)) {}
  const Eigen::VectorXd& residuals() const { return residuals_; }

 private:
  Eigen::VectorXd residuals_;
};

/// Lowest eigenpairs of the matrix-free Hamiltonian by a locally optimal
/// block preconditioned scheme (subspace [X, precond residuals, previous X])
/// with the kinetic-shift preconditioner (1/2 |k|^2 + 1)^{-1}. Deterministic
/// for a fixed seed; `initial` seeds the starting subspace when given.
EigenSolveResult lowestEigenpairs(const KSHamiltonian& h, int count, const EigenOptions& opts = {},
                                  const OrbitalSet* initial = nullptr);
EigenSolveResult lowestEigenpairs(const KSModel& model, const ChargeDensity& rho, int count,
                                  int nc, int ng, const EigenOptions& opts = {});

struct KsOptions {
  double tol = 1e-10;      // on the density-map residual ||rho_out - rho_in||_L2
  int maxIter = 200;
  double mixing = 0.3;     // linear mixing weight
  int andersonDepth = 0;   // 0 = plain linear mixing; > 0 enables Anderson
  double eigTol = 0.0;     // inner eigensolver tolerance; 0 selects tol/10
  std::uint64_t seed = 0;
  // optional warm start: orbitals are projected onto the solve basis and seed
  // both the starting density and the first eigensolve
  const OrbitalSet* initialGuess = nullptr;
  // optional progress hook: (iteration, density-map residual)
  std::function<void(int, double)> onIterate;
};

struct KSState {
  OrbitalSet orbitals;          // multiplier-diagonal representative
  Eigen::MatrixXd multipliers;  // Lambda_ij = <H phi_i, phi_j> before rotation
  Eigen::VectorXd eigenvalues;  // ascending eigenvalues of Lambda
  std::optional<ChargeDensity> density;
  double energy = 0.0;
  double residual = 0.0;  // final density-map residual
  int iterations = 0;
  bool converged = false;
  double frontierGap = 0.0;       // eps_{N+1} - eps_N at the final density
  bool degenerateFrontier = false;  // |gap| < 1e-8
};

class ScfError : public std::runtime_error {
 public:
  ScfError(const std::string& msg, KSState best) : std::runtime_error(msg), best_(std::move(best)) {}
  const KSState& best() const { return best_; }

 private:
  KSState best_;
};

/// Self-consistent field ground state in the Nc ball: eigensolve the
/// Hamiltonian, occupy the lowest pairCount orbitals, mix densities until the
/// density map is a fixed point, then polish with one eigensolve at the
/// converged density so the returned orbitals satisfy the Euler conditions.
KSState solveKs(const KSModel& model, int nc, int ng, const KsOptions& opts = {});

/// Closest unitary rotation of psi to phi in L2: with M_ij = (psi_i, phi_j),
/// returns U psi where U = M^T (M M^T)^{-1/2}. The resulting Gram against phi
/// is symmetric positive semidefinite. Throws when M is numerically singular.
OrbitalSet align(const OrbitalSet& psi, const OrbitalSet& phi,
                 double* conditionNumber = nullptr);

/// Closest point of the constraint manifold inside V_Nc: Loewdin
/// orthonormalization of the coefficient-truncated orbitals. Satisfies
/// ||result - phi|| <= sqrt(2) ||truncation - phi|| in L2.
OrbitalSet manifoldProject(const OrbitalSet& phi, int nc);

/// Second-order (Hessian-minus-multiplier) bilinear form at a converged state
/// phi0 with diagonal multipliers eps0:
///   a(psi, ups) = sum_i <(H - eps_i) psi_i, ups_i>
///               + 4 D(sum_i phi_i psi_i, sum_j phi_j ups_j)
///               + 4 int e_xc''(rho_core + rho0) (sum phi psi)(sum phi ups).
double secondOrderForm(const KSModel& model, const OrbitalSet& phi0,
                       const Eigen::VectorXd& eps0, const OrbitalSet& psi, const OrbitalSet& ups,
                       int ng);

}  // namespace pwdft

#endif
