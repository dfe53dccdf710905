#ifndef PWDFT_CONFIG_HPP
#define PWDFT_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pwdft/ks.hpp"
#include "pwdft/tfw.hpp"

namespace pwdft {

/// One diagnosed problem in a config file.
struct ConfigIssue {
  int line = 0;  // 0 when the issue is not tied to a single line
  std::string message;
};

/// Carries every issue found in one parse, not just the first.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues);
  const std::vector<ConfigIssue>& issues() const { return issues_; }

 private:
  std::vector<ConfigIssue> issues_;
};

/// One [potential] block: an additive local-potential term.
struct PotentialSpec {
  enum class Kind { Synthetic, Gaussian };
  Kind kind = Kind::Synthetic;
  // synthetic
  double decay = 5.0;
  double amplitude = 1.0;
  int modeRange = 64;
  std::uint64_t seed = 0;
  // gaussian
  double depth = -1.0;
  double width = 1.0;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
};

/// One [projector] block: a separable nonlocal channel.
struct ProjectorSpec {
  double decay = 3.5;
  double amplitude = 1.0;
  std::uint64_t seed = 0;
};

/// Fully validated run request assembled from a flat key = value file.
struct RunConfig {
  // [cell]
  double length = 0.0;

  // [model]
  enum class ModelKind { Tfw, Ks };
  ModelKind modelKind = ModelKind::Tfw;
  double electronCount = 1.0;            // TFW
  double cW = 1.0;                       // TFW
  std::optional<double> cTF;             // TFW; default from the library
  int pairCount = 1;                     // KS
  enum class XcKind { None, XAlpha };
  XcKind xc = XcKind::None;              // KS
  double cX = 0.7386;                    // KS x-alpha coefficient
  std::optional<double> coreCharge;      // KS optional core density
  double coreWidth = 1.0;
  Eigen::Vector3d coreCenter = Eigen::Vector3d::Zero();

  std::vector<PotentialSpec> potentials;
  std::vector<ProjectorSpec> projectors;

  // [discretization]
  std::optional<int> nc;
  std::optional<int> ng;

  // [solver]
  double tol = 1e-10;
  int maxIter = 0;  // 0 selects the solver default
  double mixing = 0.3;
  int andersonDepth = 2;
  std::uint64_t seed = 0;

  // [study]
  std::vector<int> cutoffs;
  std::optional<int> referenceCutoff;
  std::vector<int> grids;
  std::vector<double> norms = {1.0, 0.0, -1.0};

  CellSpec cell() const { return CellSpec(length); }
  TFWModel buildTfwModel() const;
  KSModel buildKsModel() const;
  LocalPotential buildPotential(const PotentialSpec& spec) const;
};

/// Parses and validates the flat sectioned `key = value` text; throws
/// ConfigError carrying every diagnosed issue with its line number.
RunConfig parseRunConfig(const std::string& text);
RunConfig loadRunConfig(const std::string& path);

}  // namespace pwdft

#endif
