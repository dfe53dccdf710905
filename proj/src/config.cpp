#include "pwdft/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace pwdft {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

struct Entry {
  std::string key;
  std::string value;
  int line = 0;
};

struct Block {
  std::string name;
  int line = 0;
  std::vector<Entry> entries;
};

/// Splits the text into [section] blocks of key = value entries, diagnosing
/// syntax problems as it goes.
std::vector<Block> lex(const std::string& text, std::vector<ConfigIssue>& issues) {
  std::vector<Block> blocks;
  std::istringstream in(text);
  std::string rawLine;
  int lineNo = 0;
  while (std::getline(in, rawLine)) {
    ++lineNo;
    const size_t hash = rawLine.find('#');
    if (hash != std::string::npos) rawLine.erase(hash);
    const std::string line = trim(rawLine);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        issues.push_back({lineNo, "malformed section header: " + line});
        continue;
      }
      blocks.push_back({trim(line.substr(1, line.size() - 2)), lineNo, {}});
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      issues.push_back({lineNo, "expected `key = value` or a [section] header: " + line});
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      issues.push_back({lineNo, "missing key before `=`"});
      continue;
    }
    if (value.empty()) {
      issues.push_back({lineNo, "missing value for key `" + key + "`"});
      continue;
    }
    if (blocks.empty()) {
      issues.push_back({lineNo, "key `" + key + "` appears before any [section] header"});
      continue;
    }
    blocks.back().entries.push_back({key, value, lineNo});
  }
  return blocks;
}

/// Typed access to the keys of one logical section with duplicate and
/// unknown-key diagnostics.
class SectionReader {
 public:
  SectionReader(std::string section, std::vector<ConfigIssue>& issues)
      : section_(std::move(section)), issues_(issues) {}

  void absorb(const Block& block) {
    for (const Entry& e : block.entries) {
      auto [it, inserted] = entries_.try_emplace(e.key, e);
      if (!inserted)
        issues_.push_back({e.line, "duplicate key `" + e.key + "` in [" + section_ +
                                       "]: first set on line " + std::to_string(it->second.line)});
    }
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  int lineOf(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
  }

  std::optional<std::string> raw(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    consumed_.push_back(key);
    return it->second.value;
  }

  void getDouble(const std::string& key, double& out) {
    const auto v = raw(key);
    if (!v) return;
    char* end = nullptr;
    const double parsed = std::strtod(v->c_str(), &end);
    if (end != v->c_str() + v->size())
      issues_.push_back({lineOf(key), "key `" + key + "`: expected a number, got `" + *v + "`"});
    else
      out = parsed;
  }

  void getInt(const std::string& key, int& out) {
    const auto v = raw(key);
    if (!v) return;
    char* end = nullptr;
    const long parsed = std::strtol(v->c_str(), &end, 10);
    if (end != v->c_str() + v->size())
      issues_.push_back({lineOf(key), "key `" + key + "`: expected an integer, got `" + *v + "`"});
    else
      out = static_cast<int>(parsed);
  }

  void getU64(const std::string& key, std::uint64_t& out) {
    const auto v = raw(key);
    if (!v) return;
    char* end = nullptr;
    const std::uint64_t parsed = std::strtoull(v->c_str(), &end, 10);
    if (end != v->c_str() + v->size() || v->front() == '-')
      issues_.push_back(
          {lineOf(key), "key `" + key + "`: expected an unsigned integer, got `" + *v + "`"});
    else
      out = parsed;
  }

  void getString(const std::string& key, std::string& out) {
    const auto v = raw(key);
    if (v) out = *v;
  }

  template <typename T, typename Parse>
  void getList(const std::string& key, std::vector<T>& out, Parse parse) {
    const auto v = raw(key);
    if (!v) return;
    std::vector<T> items;
    std::istringstream in(*v);
    std::string tok;
    bool ok = true;
    while (in >> tok) {
      char* end = nullptr;
      items.push_back(parse(tok.c_str(), &end));
      if (end != tok.c_str() + tok.size()) ok = false;
    }
    if (!ok || items.empty())
      issues_.push_back(
          {lineOf(key), "key `" + key + "`: expected a space-separated number list, got `" + *v + "`"});
    else
      out = std::move(items);
  }

  void getIntList(const std::string& key, std::vector<int>& out) {
    getList<int>(key, out,
                 [](const char* s, char** end) { return static_cast<int>(std::strtol(s, end, 10)); });
  }

  void getDoubleList(const std::string& key, std::vector<double>& out) {
    getList<double>(key, out, [](const char* s, char** end) { return std::strtod(s, end); });
  }

  /// Flags every key that no getter touched.
  void finish() {
    for (const auto& [key, entry] : entries_) {
      if (std::find(consumed_.begin(), consumed_.end(), key) == consumed_.end())
        issues_.push_back({entry.line, "unknown key `" + key + "` in [" + section_ + "]"});
    }
  }

 private:
  std::string section_;
  std::vector<ConfigIssue>& issues_;
  std::map<std::string, Entry> entries_;
  std::vector<std::string> consumed_;
};

PotentialSpec readPotential(const Block& block, std::vector<ConfigIssue>& issues) {
  SectionReader r("potential", issues);
  r.absorb(block);
  PotentialSpec spec;
  std::string kind;
  r.getString("kind", kind);
  if (kind == "synthetic") {
    spec.kind = PotentialSpec::Kind::Synthetic;
    r.getDouble("decay", spec.decay);
    r.getDouble("amplitude", spec.amplitude);
    r.getInt("mode_range", spec.modeRange);
    r.getU64("seed", spec.seed);
    if (!(spec.decay > 3.0))
      issues.push_back({r.lineOf("decay"), "potential decay exponent must exceed 3"});
    if (spec.modeRange < 0)
      issues.push_back({r.lineOf("mode_range"), "mode_range must be nonnegative"});
  } else if (kind == "gaussian") {
    spec.kind = PotentialSpec::Kind::Gaussian;
    r.getDouble("depth", spec.depth);
    r.getDouble("width", spec.width);
    r.getDouble("center_x", spec.center.x());
    r.getDouble("center_y", spec.center.y());
    r.getDouble("center_z", spec.center.z());
    if (!(spec.width > 0.0)) issues.push_back({r.lineOf("width"), "gaussian width must be positive"});
  } else {
    issues.push_back({kind.empty() ? block.line : r.lineOf("kind"),
                      "potential kind must be `synthetic` or `gaussian`"});
  }
  r.finish();
  return spec;
}

ProjectorSpec readProjector(const Block& block, std::vector<ConfigIssue>& issues) {
  SectionReader r("projector", issues);
  r.absorb(block);
  ProjectorSpec spec;
  r.getDouble("decay", spec.decay);
  r.getDouble("amplitude", spec.amplitude);
  r.getU64("seed", spec.seed);
  if (!(spec.decay > 0.0)) issues.push_back({r.lineOf("decay"), "projector decay must be positive"});
  r.finish();
  return spec;
}

std::string formatIssues(const std::vector<ConfigIssue>& issues) {
  std::string out = "config error";
  if (issues.size() > 1) out += "s (" + std::to_string(issues.size()) + ")";
  out += ":";
  for (const ConfigIssue& issue : issues) {
    out += "\n  ";
    if (issue.line > 0) out += "line " + std::to_string(issue.line) + ": ";
    out += issue.message;
  }
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<ConfigIssue> issues)
    : std::runtime_error(formatIssues(issues)), issues_(std::move(issues)) {}

RunConfig parseRunConfig(const std::string& text) {
  std::vector<ConfigIssue> issues;
  const std::vector<Block> blocks = lex(text, issues);

  RunConfig cfg;
  SectionReader cell("cell", issues);
  SectionReader model("model", issues);
  SectionReader disc("discretization", issues);
  SectionReader solver("solver", issues);
  SectionReader study("study", issues);

  for (const Block& block : blocks) {
    if (block.name == "cell")
      cell.absorb(block);
    else if (block.name == "model")
      model.absorb(block);
    else if (block.name == "discretization")
      disc.absorb(block);
    else if (block.name == "solver")
      solver.absorb(block);
    else if (block.name == "study")
      study.absorb(block);
    else if (block.name == "potential")
      cfg.potentials.push_back(readPotential(block, issues));
    else if (block.name == "projector")
      cfg.projectors.push_back(readProjector(block, issues));
    else
      issues.push_back({block.line, "unknown section [" + block.name + "]"});
  }

  // [cell]
  cell.getDouble("L", cfg.length);
  if (!cell.has("L"))
    issues.push_back({0, "missing required key `L` in [cell]"});
  else if (!(cfg.length > 0.0))
    issues.push_back({cell.lineOf("L"), "cell length L must be positive"});
  cell.finish();

  // [model]
  std::string kind;
  model.getString("kind", kind);
  if (kind == "tfw") {
    cfg.modelKind = RunConfig::ModelKind::Tfw;
    model.getDouble("electron_count", cfg.electronCount);
    model.getDouble("c_w", cfg.cW);
    double ctf = 0.0;
    if (model.has("c_tf")) {
      model.getDouble("c_tf", ctf);
      cfg.cTF = ctf;
    }
    if (!(cfg.electronCount > 0.0))
      issues.push_back({model.lineOf("electron_count"), "electron_count must be positive"});
    if (!(cfg.cW > 0.0)) issues.push_back({model.lineOf("c_w"), "c_w must be positive"});
    if (cfg.cTF && !(*cfg.cTF > 0.0))
      issues.push_back({model.lineOf("c_tf"), "c_tf must be positive"});
  } else if (kind == "ks") {
    cfg.modelKind = RunConfig::ModelKind::Ks;
    model.getInt("pairs", cfg.pairCount);
    if (cfg.pairCount < 1) issues.push_back({model.lineOf("pairs"), "pairs must be >= 1"});
    std::string xc = "none";
    model.getString("xc", xc);
    if (xc == "none")
      cfg.xc = RunConfig::XcKind::None;
    else if (xc == "xalpha")
      cfg.xc = RunConfig::XcKind::XAlpha;
    else
      issues.push_back({model.lineOf("xc"), "xc must be `none` or `xalpha`"});
    model.getDouble("c_x", cfg.cX);
    if (!(cfg.cX > 0.0)) issues.push_back({model.lineOf("c_x"), "c_x must be positive"});
    if (model.has("core_charge")) {
      double charge = 0.0;
      model.getDouble("core_charge", charge);
      cfg.coreCharge = charge;
      model.getDouble("core_width", cfg.coreWidth);
      model.getDouble("core_center_x", cfg.coreCenter.x());
      model.getDouble("core_center_y", cfg.coreCenter.y());
      model.getDouble("core_center_z", cfg.coreCenter.z());
      if (!(charge > 0.0))
        issues.push_back({model.lineOf("core_charge"), "core_charge must be positive"});
      if (!(cfg.coreWidth > 0.0))
        issues.push_back({model.lineOf("core_width"), "core_width must be positive"});
    }
  } else {
    issues.push_back(
        {model.lineOf("kind"), kind.empty() ? "missing required key `kind` in [model]"
                                            : "model kind must be `tfw` or `ks`"});
  }
  model.finish();

  // [discretization]
  if (disc.has("nc")) {
    int nc = 0;
    disc.getInt("nc", nc);
    cfg.nc = nc;
    if (nc < 1) issues.push_back({disc.lineOf("nc"), "N_c must be >= 1"});
  }
  if (disc.has("ng")) {
    int ng = 0;
    disc.getInt("ng", ng);
    cfg.ng = ng;
    if (!cfg.nc)
      issues.push_back({disc.lineOf("ng"), "N_g requires N_c to be set"});
    else if (ng % 2 == 0 || ng < 4 * *cfg.nc + 1)
      issues.push_back({disc.lineOf("ng"), "N_g must be odd and >= 4*N_c+1"});
  }
  disc.finish();

  // [solver]
  solver.getDouble("tol", cfg.tol);
  solver.getInt("max_iter", cfg.maxIter);
  solver.getDouble("mixing", cfg.mixing);
  solver.getInt("anderson_depth", cfg.andersonDepth);
  solver.getU64("seed", cfg.seed);
  if (!(cfg.tol > 0.0)) issues.push_back({solver.lineOf("tol"), "tol must be positive"});
  if (cfg.maxIter < 0) issues.push_back({solver.lineOf("max_iter"), "max_iter must be >= 0"});
  if (!(cfg.mixing > 0.0 && cfg.mixing <= 1.0))
    issues.push_back({solver.lineOf("mixing"), "mixing must lie in (0, 1]"});
  if (cfg.andersonDepth < 0)
    issues.push_back({solver.lineOf("anderson_depth"), "anderson_depth must be >= 0"});
  solver.finish();

  // [study]
  study.getIntList("cutoffs", cfg.cutoffs);
  if (study.has("reference")) {
    int ref = 0;
    study.getInt("reference", ref);
    cfg.referenceCutoff = ref;
    if (ref < 1) issues.push_back({study.lineOf("reference"), "reference must be >= 1"});
  }
  study.getIntList("grids", cfg.grids);
  study.getDoubleList("norms", cfg.norms);
  for (int nc : cfg.cutoffs)
    if (nc < 1) {
      issues.push_back({study.lineOf("cutoffs"), "cutoffs must all be >= 1"});
      break;
    }
  study.finish();

  if (!issues.empty()) {
    std::sort(issues.begin(), issues.end(),
              [](const ConfigIssue& a, const ConfigIssue& b) { return a.line < b.line; });
    throw ConfigError(std::move(issues));
  }
  return cfg;
}

RunConfig loadRunConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({{0, "cannot open config file: " + path}});
  std::ostringstream buf;
  buf << in.rdbuf();
  return parseRunConfig(buf.str());
}

LocalPotential RunConfig::buildPotential(const PotentialSpec& spec) const {
  if (spec.kind == PotentialSpec::Kind::Synthetic)
    return synthPotential(cell(), spec.decay, spec.amplitude, spec.modeRange, spec.seed);
  return gaussianPotential(cell(), spec.depth, spec.width, spec.center);
}

TFWModel RunConfig::buildTfwModel() const {
  TFWModel m{cell(), cW, cTF ? *cTF : defaultThomasFermiConstant(), electronCount, {}};
  for (const PotentialSpec& spec : potentials) {
    LocalPotential v = buildPotential(spec);
    m.vIon = m.vIon ? *m.vIon + v : v;
  }
  return m;
}

KSModel RunConfig::buildKsModel() const {
  KSModel m{cell(), pairCount, {}, {}, {}, XCFunctional::none()};
  for (const PotentialSpec& spec : potentials) {
    LocalPotential v = buildPotential(spec);
    m.vLocal = m.vLocal ? *m.vLocal + v : v;
  }
  if (xc == XcKind::XAlpha) m.xc = XCFunctional::xAlpha(cX);
  if (coreCharge) m.coreDensity = gaussianCoreDensity(cell(), *coreCharge, coreWidth, coreCenter);
  if (!projectors.empty()) {
    // projectors are materialized once on a fixed ball so the model does not
    // change across the cutoffs of a convergence study
    const int projNc = nc ? std::max(*nc, 16) : 16;
    BasisPtr basis = PlanewaveBasis::ball(cell(), projNc);
    for (const ProjectorSpec& spec : projectors)
      m.projectors.projectors.push_back(synthProjector(basis, spec.decay, spec.amplitude, spec.seed));
  }
  return m;
}

}  // namespace pwdft
