#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccnmab/delay_models.hpp"
#include "ccnmab/policy.hpp"
#include "ccnmab/sim_engine.hpp"

namespace ccnmab::cli {

inline constexpr const char* kArtifactVersion = "1.0.0";
inline constexpr int kSchemaVersion = 1;

struct ConfigIssue {
  std::string key;
  std::string message;
};

/// Every problem found in a config file, reported together.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues)
      : std::runtime_error(summarize(issues)), issues_(std::move(issues)) {}
  ConfigError(std::string key, std::string message)
      : ConfigError(std::vector<ConfigIssue>{{std::move(key), std::move(message)}}) {}

  const std::vector<ConfigIssue>& issues() const { return issues_; }

 private:
  static std::string summarize(const std::vector<ConfigIssue>& issues) {
    std::string s;
    for (const auto& i : issues) s += i.key + ": " + i.message + "\n";
    return s;
  }

  std::vector<ConfigIssue> issues_;
};

struct NamedPolicy {
  std::string label;
  PolicyConfig config;
};

struct Theorem4Request {
  double a = 0.0;
  double d = 0.0;
  // Defaults to floor(aK/d^2) + 1.
  std::optional<Slot> t0;
  std::vector<double> t_multiples;
  std::int64_t replications = 1000;
};

struct BoundsRequest {
  std::optional<int> D;
  std::vector<Slot> t0_grid;
  std::int64_t replications = 20'000;
  std::optional<Theorem4Request> theorem4;
};

/// One experiment: arms, the policies to compare, and what to evaluate.
struct ExperimentSpec {
  std::string name = "experiment";
  std::uint64_t seed = 1;
  Slot horizon = 10'000;
  std::int64_t replications = 200;
  std::vector<std::string> arm_names;
  std::vector<DelayDistribution> arms;
  std::vector<NamedPolicy> policies;
  std::vector<Slot> sweep_t0;
  std::vector<InitStrategy> sweep_strategies;
  std::optional<BoundsRequest> bounds;
  int traces = 0;

  ScenarioConfig scenario(const PolicyConfig& policy) const {
    ScenarioConfig s;
    s.arms = arms;
    s.policy = policy;
    s.horizon = horizon;
    s.replications = replications;
    s.seed = seed;
    return s;
  }

  /// Canonical text of everything that affects results.
  std::string canonical() const;
  std::uint64_t digest() const { return detail::fnv1a(canonical()); }
};

/// Parses the YAML experiment description; throws ConfigError listing every
/// invalid or missing key.
ExperimentSpec parse_experiment(const std::string& yaml_text);
ExperimentSpec load_experiment(const std::filesystem::path& path);

/// Directory holding the shipped presets (fig2 ... thm4).
std::filesystem::path preset_directory();
std::filesystem::path preset_path(const std::string& name);

}  // namespace ccnmab::cli
