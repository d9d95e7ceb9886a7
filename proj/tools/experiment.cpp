#include "experiment.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace ccnmab::cli {
namespace {

class Reader {
 public:
  void issue(std::string key, std::string message) { issues_.push_back({std::move(key), std::move(message)}); }
  const std::vector<ConfigIssue>& issues() const { return issues_; }

  // Reports keys of `node` outside `allowed`.
  void check_keys(const YAML::Node& node, const std::string& path, std::set<std::string> allowed) {
    if (!node.IsMap()) return;
    for (const auto& kv : node) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.count(key)) issue(join(path, key), "unknown key");
    }
  }

  bool expect_map(const YAML::Node& node, const std::string& path) {
    if (node.IsMap()) return true;
    issue(path, "expected a mapping");
    return false;
  }

  template <class T>
  std::optional<T> get(const YAML::Node& parent, const std::string& path, const std::string& key, bool required) {
    const YAML::Node node = parent[key];
    if (!node) {
      if (required) issue(join(path, key), "missing required key");
      return std::nullopt;
    }
    try {
      return node.as<T>();
    } catch (const YAML::Exception&) {
      issue(join(path, key), std::string("expected ") + type_name<T>());
      return std::nullopt;
    }
  }

  template <class T>
  std::vector<T> get_list(const YAML::Node& parent, const std::string& path, const std::string& key, bool required) {
    const YAML::Node node = parent[key];
    std::vector<T> out;
    if (!node) {
      if (required) issue(join(path, key), "missing required key");
      return out;
    }
    if (!node.IsSequence()) {
      issue(join(path, key), "expected a list");
      return out;
    }
    for (std::size_t i = 0; i < node.size(); ++i) {
      try {
        out.push_back(node[i].as<T>());
      } catch (const YAML::Exception&) {
        issue(join(path, key) + "[" + std::to_string(i) + "]", std::string("expected ") + type_name<T>());
      }
    }
    return out;
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

 private:
  template <class T>
  static const char* type_name() {
    if constexpr (std::is_same_v<T, std::string>) return "a string";
    else if constexpr (std::is_floating_point_v<T>) return "a number";
    else if constexpr (std::is_unsigned_v<T>) return "a nonnegative integer";
    else return "an integer";
  }

  std::vector<ConfigIssue> issues_;
};

std::optional<DelayDistribution> parse_arm(Reader& rd, const YAML::Node& node, const std::string& path) {
  if (!rd.expect_map(node, path)) return std::nullopt;
  rd.check_keys(node, path, {"name", "kind", "shift", "p", "r", "truncation", "probabilities"});
  const auto kind = rd.get<std::string>(node, path, "kind", true);
  const auto truncation = rd.get<int>(node, path, "truncation", false);
  if (!kind) return std::nullopt;
  try {
    if (*kind == "shifted-negative-binomial" || *kind == "truncated-shifted-negative-binomial") {
      const auto shift = rd.get<int>(node, path, "shift", true);
      const auto p = rd.get<double>(node, path, "p", true);
      const auto r = rd.get<int>(node, path, "r", true);
      if (*kind == "truncated-shifted-negative-binomial" && !truncation) {
        rd.issue(Reader::join(path, "truncation"), "missing required key");
      }
      if (!shift || !p || !r) return std::nullopt;
      if (truncation) return DelayDistribution::truncated_shifted_negative_binomial(*shift, *p, *r, *truncation);
      return DelayDistribution::shifted_negative_binomial(*shift, *p, *r);
    }
    if (*kind == "explicit-table") {
      const auto probs = rd.get_list<double>(node, path, "probabilities", true);
      if (probs.empty()) return std::nullopt;
      auto d = DelayDistribution::explicit_table(probs);
      return truncation ? truncate(d, *truncation) : d;
    }
    rd.issue(Reader::join(path, "kind"),
             "unknown kind '" + *kind +
                 "' (expected shifted-negative-binomial, truncated-shifted-negative-binomial or explicit-table)");
  } catch (const InvalidTruncation& e) {
    rd.issue(Reader::join(path, "truncation"), e.what());
  } catch (const InvalidDistribution& e) {
    rd.issue(path, e.what());
  }
  return std::nullopt;
}

std::optional<InitStrategy> parse_strategy(Reader& rd, const std::string& key, const std::string& text) {
  const auto s = parse_init_strategy(text);
  if (!s) rd.issue(key, "unknown strategy '" + text + "' (expected round-robin or uniform-random)");
  return s;
}

void append_double(std::string& s, double v) { detail::append_double(s, v); }

}  // namespace

ExperimentSpec parse_experiment(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("<document>", std::string("YAML syntax error: ") + e.what());
  }
  if (!root.IsMap()) throw ConfigError("<document>", "expected a mapping at top level");

  Reader rd;
  rd.check_keys(root, "", {"name", "seed", "horizon", "replications", "arms", "initial_phase", "policies", "sweep",
                           "bounds", "output"});
  ExperimentSpec spec;
  if (auto v = rd.get<std::string>(root, "", "name", false)) spec.name = *v;
  if (auto v = rd.get<std::uint64_t>(root, "", "seed", false)) spec.seed = *v;
  if (auto v = rd.get<Slot>(root, "", "horizon", false)) spec.horizon = *v;
  if (auto v = rd.get<std::int64_t>(root, "", "replications", false)) spec.replications = *v;
  if (spec.horizon < 1) rd.issue("horizon", "must be at least 1");
  if (spec.replications < 1) rd.issue("replications", "must be at least 1");

  // Arms.
  const YAML::Node arms = root["arms"];
  if (!arms) {
    rd.issue("arms", "missing required key");
  } else if (!arms.IsSequence()) {
    rd.issue("arms", "expected a list");
  } else {
    if (arms.size() < 2) rd.issue("arms", "at least two arms are required");
    for (std::size_t i = 0; i < arms.size(); ++i) {
      const std::string path = "arms[" + std::to_string(i) + "]";
      auto d = parse_arm(rd, arms[i], path);
      if (d) {
        spec.arms.push_back(std::move(*d));
        std::string label = "router" + std::to_string(i + 1);
        if (arms[i].IsMap() && arms[i]["name"]) {
          if (auto n = rd.get<std::string>(arms[i], path, "name", false)) label = *n;
        }
        spec.arm_names.push_back(label);
      }
    }
  }

  // Initial-phase defaults shared by all policies.
  Slot default_t0 = 1;
  InitStrategy default_init = InitStrategy::RoundRobin;
  if (const YAML::Node ip = root["initial_phase"]) {
    if (rd.expect_map(ip, "initial_phase")) {
      rd.check_keys(ip, "initial_phase", {"t0", "strategy"});
      if (auto v = rd.get<Slot>(ip, "initial_phase", "t0", false)) default_t0 = *v;
      if (auto v = rd.get<std::string>(ip, "initial_phase", "strategy", false)) {
        if (auto s = parse_strategy(rd, "initial_phase.strategy", *v)) default_init = *s;
      }
    }
  }

  // Policies.
  const YAML::Node policies = root["policies"];
  if (!policies) {
    rd.issue("policies", "missing required key");
  } else if (!policies.IsSequence() || policies.size() == 0) {
    rd.issue("policies", "expected a non-empty list");
  } else {
    for (std::size_t i = 0; i < policies.size(); ++i) {
      const std::string path = "policies[" + std::to_string(i) + "]";
      const YAML::Node p = policies[i];
      if (!rd.expect_map(p, path)) continue;
      rd.check_keys(p, path, {"label", "algorithm", "eps", "eps0", "L", "t0", "strategy"});
      NamedPolicy np;
      np.config.t0 = default_t0;
      np.config.init = default_init;
      const auto alg_text = rd.get<std::string>(p, path, "algorithm", true);
      if (!alg_text) continue;
      const auto alg = parse_algorithm(*alg_text);
      if (!alg) {
        rd.issue(path + ".algorithm", "unknown algorithm '" + *alg_text + "' (expected eps-greedy, tuned-eps-greedy or ucb)");
        continue;
      }
      np.config.algorithm = *alg;
      np.label = rd.get<std::string>(p, path, "label", false).value_or(*alg_text);
      if (auto v = rd.get<double>(p, path, "eps", false)) np.config.eps = *v;
      np.config.eps0 = rd.get<double>(p, path, "eps0", false);
      if (auto v = rd.get<double>(p, path, "L", false)) np.config.L = *v;
      if (auto v = rd.get<Slot>(p, path, "t0", false)) np.config.t0 = *v;
      if (auto v = rd.get<std::string>(p, path, "strategy", false)) {
        if (auto s = parse_strategy(rd, path + ".strategy", *v)) np.config.init = *s;
      }
      for (const auto& problem : np.config.problems()) {
        const auto colon = problem.find(':');
        rd.issue(path + "." + problem.substr(0, colon), problem.substr(colon + 2));
      }
      if (np.config.t0 > spec.horizon) rd.issue(path + ".t0", "exceeds the horizon");
      spec.policies.push_back(np);
    }
  }

  // Initial-phase sweep.
  if (const YAML::Node sw = root["sweep"]) {
    if (rd.expect_map(sw, "sweep")) {
      rd.check_keys(sw, "sweep", {"t0", "strategies"});
      spec.sweep_t0 = rd.get_list<Slot>(sw, "sweep", "t0", false);
      for (std::size_t i = 0; i < spec.sweep_t0.size(); ++i) {
        if (spec.sweep_t0[i] < 1) rd.issue("sweep.t0[" + std::to_string(i) + "]", "must be at least 1");
      }
      for (const auto& s : rd.get_list<std::string>(sw, "sweep", "strategies", false)) {
        if (auto v = parse_strategy(rd, "sweep.strategies", s)) spec.sweep_strategies.push_back(*v);
      }
    }
  }

  // Bound evaluation.
  if (const YAML::Node b = root["bounds"]) {
    if (rd.expect_map(b, "bounds")) {
      rd.check_keys(b, "bounds", {"D", "t0_grid", "replications", "theorem4"});
      BoundsRequest req;
      req.D = rd.get<int>(b, "bounds", "D", false);
      if (req.D && *req.D < 1) rd.issue("bounds.D", "must be at least 1");
      req.t0_grid = rd.get_list<Slot>(b, "bounds", "t0_grid", false);
      if (auto v = rd.get<std::int64_t>(b, "bounds", "replications", false)) req.replications = *v;
      if (req.replications < 1) rd.issue("bounds.replications", "must be at least 1");
      if (const YAML::Node t4 = b["theorem4"]) {
        if (rd.expect_map(t4, "bounds.theorem4")) {
          rd.check_keys(t4, "bounds.theorem4", {"a", "d", "t0", "t_multiples", "replications"});
          Theorem4Request r;
          r.a = rd.get<double>(t4, "bounds.theorem4", "a", true).value_or(0.0);
          r.d = rd.get<double>(t4, "bounds.theorem4", "d", true).value_or(0.0);
          r.t0 = rd.get<Slot>(t4, "bounds.theorem4", "t0", false);
          r.t_multiples = rd.get_list<double>(t4, "bounds.theorem4", "t_multiples", true);
          if (auto v = rd.get<std::int64_t>(t4, "bounds.theorem4", "replications", false)) r.replications = *v;
          if (!(r.a > 0.0)) rd.issue("bounds.theorem4.a", "must be positive");
          if (!(r.d > 0.0)) rd.issue("bounds.theorem4.d", "must be positive");
          for (double m : r.t_multiples) {
            if (!(m >= 1.0)) rd.issue("bounds.theorem4.t_multiples", "multiples of t0 must be at least 1");
          }
          if (r.replications < 1) rd.issue("bounds.theorem4.replications", "must be at least 1");
          if (!spec.arms.empty() && r.a > 0.0 && r.d > 0.0 && r.t0) {
            const double eps0 = r.a * static_cast<double>(spec.arms.size()) / (r.d * r.d);
            if (!(static_cast<double>(*r.t0) > eps0)) rd.issue("bounds.theorem4.t0", "must exceed aK/d^2");
          }
          req.theorem4 = r;
        }
      }
      spec.bounds = req;
    }
  }

  if (const YAML::Node out = root["output"]) {
    if (rd.expect_map(out, "output")) {
      rd.check_keys(out, "output", {"traces"});
      if (auto v = rd.get<int>(out, "output", "traces", false)) spec.traces = *v;
      if (spec.traces < 0) rd.issue("output.traces", "must be nonnegative");
    }
  }

  if (!rd.issues().empty()) throw ConfigError(rd.issues());
  return spec;
}

ExperimentSpec load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot read config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment(buf.str());
}

std::string ExperimentSpec::canonical() const {
  std::string s = "schema=" + std::to_string(kSchemaVersion) + "|rng=" + std::string(kRngAlgorithm);
  s += "|name=" + name + "|seed=" + std::to_string(seed) + "|horizon=" + std::to_string(horizon) +
       "|replications=" + std::to_string(replications) + "|arms=";
  for (const auto& a : arms) s += detail::canonical(a) + ",";
  s += "|policies=";
  for (const auto& p : policies) s += p.label + ":" + detail::canonical(p.config) + ",";
  s += "|sweep_t0=";
  for (auto t : sweep_t0) s += std::to_string(t) + ",";
  s += "|sweep_strategies=";
  for (auto st : sweep_strategies) s += std::string(to_string(st)) + ",";
  if (bounds) {
    s += "|bounds(D=" + (bounds->D ? std::to_string(*bounds->D) : std::string("auto")) + ";grid=";
    for (auto t : bounds->t0_grid) s += std::to_string(t) + ",";
    s += ";replications=" + std::to_string(bounds->replications);
    if (bounds->theorem4) {
      const auto& t4 = *bounds->theorem4;
      s += ";thm4(a=";
      append_double(s, t4.a);
      s += ";d=";
      append_double(s, t4.d);
      s += ";t0=" + (t4.t0 ? std::to_string(*t4.t0) : std::string("auto")) + ";t=";
      for (double m : t4.t_multiples) {
        append_double(s, m);
        s += ",";
      }
      s += ";replications=" + std::to_string(t4.replications) + ")";
    }
    s += ")";
  }
  return s;
}

std::filesystem::path preset_directory() {
  if (const char* env = std::getenv("CCNMAB_PRESET_DIR"); env && *env) return env;
#ifdef CCNMAB_PRESET_DIR
  return CCNMAB_PRESET_DIR;
#else
  return "presets";
#endif
}

std::filesystem::path preset_path(const std::string& name) { return preset_directory() / (name + ".yaml"); }

}  // namespace ccnmab::cli
