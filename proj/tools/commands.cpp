#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>

#include "ccnmab/analysis.hpp"

namespace ccnmab::cli {
namespace {

namespace fs = std::filesystem;

std::string num(double v) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// CSV file with a metadata preamble of '#' lines followed by the header row.
class CsvFile {
 public:
  CsvFile(const fs::path& path, const ExperimentSpec& spec, const std::vector<std::string>& header)
      : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot write '" + path.string() + "'");
    out_ << "# artifact_version=" << kArtifactVersion << "\n";
    out_ << "# schema_version=" << kSchemaVersion << "\n";
    out_ << "# experiment=" << spec.name << "\n";
    out_ << "# config_digest=" << hex(spec.digest()) << "\n";
    out_ << "# master_seed=" << spec.seed << "\n";
    row(header);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

ScenarioConfig checked_scenario(const ExperimentSpec& spec, const NamedPolicy& policy, const std::string& key) {
  ScenarioConfig s = spec.scenario(policy.config);
  std::vector<ConfigIssue> issues;
  for (const auto& p : s.problems()) {
    const auto colon = p.find(':');
    issues.push_back({key + "." + p.substr(0, colon), p.substr(colon + 2)});
  }
  if (!issues.empty()) throw ConfigError(issues);
  return s;
}

void write_trace(const fs::path& dir, const ExperimentSpec& spec, std::uint64_t seed, unsigned threads) {
  (void)threads;
  std::vector<std::string> header{"policy", "slot", "arm", "exploratory", "answered", "pending"};
  for (std::size_t k = 0; k < spec.arms.size(); ++k) header.push_back("cum_sends_" + std::to_string(k));
  CsvFile csv(dir / ("trace_" + std::to_string(seed) + ".csv"), spec, header);
  for (std::size_t i = 0; i < spec.policies.size(); ++i) {
    const auto& p = spec.policies[i];
    const RunTrace trace = run(checked_scenario(spec, p, "policies[" + std::to_string(i) + "]"), seed);
    for (const auto& rec : trace.slots) {
      std::vector<std::string> cells{p.label, std::to_string(rec.slot), std::to_string(rec.arm),
                                     rec.exploratory ? "1" : "0", std::to_string(rec.answered),
                                     std::to_string(rec.pending)};
      for (std::size_t k = 0; k < trace.arm_count; ++k) {
        cells.push_back(std::to_string(trace.cumulative_sends(rec.slot, k)));
      }
      csv.row(cells);
    }
  }
}

analysis::ArmGapSpec gap_spec_for(const ExperimentSpec& spec, int D) {
  return analysis::make_arm_gap_spec(std::span<const DelayDistribution>(spec.arms), D);
}

int bounds_D(const ExperimentSpec& spec) {
  if (spec.bounds && spec.bounds->D) return *spec.bounds->D;
  int d = 1;
  for (const auto& a : spec.arms) d = std::max(d, a.max_support());
  return d;
}

Slot theorem4_t0(const Theorem4Request& r, std::size_t K) {
  if (r.t0) return *r.t0;
  return static_cast<Slot>(std::floor(r.a * static_cast<double>(K) / (r.d * r.d))) + 1;
}

}  // namespace

int cmd_simulate(const ExperimentSpec& spec, const CommandOptions& opt, std::ostream& out) {
  std::vector<ScenarioConfig> scenarios;
  for (std::size_t i = 0; i < spec.policies.size(); ++i) {
    scenarios.push_back(checked_scenario(spec, spec.policies[i], "policies[" + std::to_string(i) + "]"));
  }
  fs::create_directories(opt.out_dir);
  CsvFile curves(opt.out_dir / "curves.csv", spec,
                 {"slot", "policy", "mean_fraction_optimal", "stderr", "replications"});
  CsvFile regret(opt.out_dir / "regret.csv", spec,
                 {"slot", "policy", "mean_suboptimal_sends", "suboptimal_frequency"});
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const Aggregate agg = monte_carlo(scenarios[i], opt.threads);
    const auto& label = spec.policies[i].label;
    for (Slot t = 0; t < spec.horizon; ++t) {
      curves.row({std::to_string(t), label, num(agg.mean_fraction_optimal(t)), num(agg.fraction_stderr(t)),
                  std::to_string(agg.replications)});
      regret.row({std::to_string(t), label, num(agg.mean_suboptimal_sends(t)), num(agg.suboptimal_frequency(t))});
    }
    out << label << ": mean fraction optimal at slot " << spec.horizon - 1 << " = "
        << num(agg.mean_fraction_optimal(spec.horizon - 1)) << " (stderr " << num(agg.fraction_stderr(spec.horizon - 1))
        << ", " << agg.replications << " replications)\n";
  }
  const int traces = opt.traces.value_or(spec.traces);
  for (int i = 0; i < traces; ++i) {
    write_trace(opt.out_dir, spec, replication_seed(spec.seed, static_cast<std::uint64_t>(i)), opt.threads);
  }
  out << "wrote " << (opt.out_dir / "curves.csv").string() << "\n";
  return kSuccess;
}

int cmd_sweep_t0(const ExperimentSpec& spec, const CommandOptions& opt, std::ostream& out) {
  const auto& t0s = opt.t0_list.empty() ? spec.sweep_t0 : opt.t0_list;
  const auto& strategies = opt.strategies.empty() ? spec.sweep_strategies : opt.strategies;

  struct Curve {
    std::string label;
    ScenarioConfig scenario;
  };
  std::vector<Curve> curves;
  for (std::size_t i = 0; i < spec.policies.size(); ++i) {
    const auto& base = spec.policies[i];
    const std::vector<Slot> ts = t0s.empty() ? std::vector<Slot>{base.config.t0} : t0s;
    const std::vector<InitStrategy> ss = strategies.empty() ? std::vector<InitStrategy>{base.config.init} : strategies;
    for (Slot t0 : ts) {
      for (InitStrategy s : ss) {
        NamedPolicy p = base;
        p.config.t0 = t0;
        p.config.init = s;
        const std::string key = "policies[" + std::to_string(i) + "] (t0=" + std::to_string(t0) + ")";
        curves.push_back({base.label, checked_scenario(spec, p, key)});
      }
    }
  }

  fs::create_directories(opt.out_dir);
  CsvFile csv(opt.out_dir / "sweep.csv", spec, {"slot", "policy", "t0", "init_strategy", "mean_fraction_optimal"});
  for (const auto& c : curves) {
    const Aggregate agg = monte_carlo(c.scenario, opt.threads);
    const std::string t0 = std::to_string(c.scenario.policy.t0);
    const std::string init = to_string(c.scenario.policy.init);
    for (Slot t = 0; t < spec.horizon; ++t) {
      csv.row({std::to_string(t), c.label, t0, init, num(agg.mean_fraction_optimal(t))});
    }
    out << c.label << " t0=" << t0 << " " << init << ": final fraction optimal "
        << num(agg.mean_fraction_optimal(spec.horizon - 1)) << "\n";
  }
  out << "wrote " << (opt.out_dir / "sweep.csv").string() << "\n";
  return kSuccess;
}

int cmd_bounds(const ExperimentSpec& spec, const CommandOptions& opt, std::ostream& out) {
  if (!spec.bounds) throw ConfigError("bounds", "missing required key");
  const BoundsRequest& req = *spec.bounds;
  const int D = bounds_D(spec);
  const auto gap = gap_spec_for(spec, D);
  const auto& grid = opt.t0_grid.empty() ? req.t0_grid : opt.t0_grid;
  const double NA = std::numeric_limits<double>::quiet_NaN();

  fs::create_directories(opt.out_dir);
  {
    CsvFile csv(opt.out_dir / "bounds.csv", spec,
                {"grid_value", "thm1_bound", "thm2_approx", "thm3_approx", "empirical", "empirical_ci_halfwidth",
                 "empirical_uni", "empirical_uni_ci_halfwidth", "status"});
    ScenarioConfig rr = spec.scenario(PolicyConfig{});
    rr.seed = spec.seed;
    rr.policy.init = InitStrategy::RoundRobin;
    ScenarioConfig uni = rr;
    uni.policy.init = InitStrategy::UniformRandom;
    for (Slot t0 : grid) {
      double thm1 = NA, thm2 = NA, thm3 = NA;
      double emp = NA, emp_hw = NA, emp_uni = NA, emp_uni_hw = NA;
      std::string status = "ok";
      try {
        thm1 = analysis::thm1_success_lower_bound(gap, static_cast<double>(t0));
        thm2 = analysis::thm2_success_approx(gap, static_cast<double>(t0));
        thm3 = analysis::thm3_success_approx_rr(gap, static_cast<double>(t0));
        const auto e = empirical_best_arm_prob(rr, t0, req.replications, SampleCut::SentBeforeT0MinusD, D, opt.threads);
        const auto u = empirical_best_arm_prob(uni, t0, req.replications, SampleCut::SentBeforeT0MinusD, D, opt.threads);
        emp = e.probability;
        emp_hw = e.half_width;
        emp_uni = u.probability;
        emp_uni_hw = u.half_width;
      } catch (const analysis::DomainError& e) {
        status = std::string("invalid: ") + e.what();
      }
      csv.row({std::to_string(t0), num(thm1), num(thm2), num(thm3), num(emp), num(emp_hw), num(emp_uni),
               num(emp_uni_hw), status});
      out << "t0=" << t0 << " thm1=" << num(thm1) << " thm2=" << num(thm2) << " thm3=" << num(thm3)
          << " empirical(rr)=" << num(emp) << " empirical(uni)=" << num(emp_uni) << " [" << status << "]\n";
    }
  }

  {
    CsvFile csv(opt.out_dir / "transient.csv", spec, {"basis", "D", "unrounded", "slots", "success_floor", "status"});
    const auto emit = [&](const std::string& basis, const analysis::ArmGapSpec& g) {
      try {
        const auto te = analysis::transient_slots_estimate(g);
        csv.row({basis, std::to_string(g.D), num(te.unrounded), std::to_string(te.slots), num(te.success_floor), "ok"});
        out << "transient (" << basis << "): T >= " << num(te.unrounded) << " -> " << te.slots
            << " slots, success probability >= " << num(te.success_floor) << "\n";
      } catch (const analysis::DomainError& e) {
        csv.row({basis, std::to_string(g.D), "NA", "NA", "NA", std::string("invalid: ") + e.what()});
      }
    };
    emit("configured", gap);
    // Same estimate with the untruncated parents of truncated negative binomial arms.
    const bool any_truncated_nb = std::any_of(spec.arms.begin(), spec.arms.end(), [](const DelayDistribution& a) {
      return a.kind() == DelayKind::TruncatedShiftedNegativeBinomial;
    });
    if (any_truncated_nb) {
      std::vector<DelayDistribution> parents;
      for (const auto& a : spec.arms) {
        parents.push_back(a.kind() == DelayKind::TruncatedShiftedNegativeBinomial
                              ? DelayDistribution::shifted_negative_binomial(a.shift(), a.p(), a.r())
                              : a);
      }
      emit("untruncated", analysis::make_arm_gap_spec(std::span<const DelayDistribution>(parents), D));
    }
  }

  if (req.theorem4) {
    const auto& r = *req.theorem4;
    const std::size_t K = spec.arms.size();
    const Slot t0 = theorem4_t0(r, K);
    std::vector<Slot> ts;
    for (double m : r.t_multiples) ts.push_back(static_cast<Slot>(std::llround(m * static_cast<double>(t0))));

    ScenarioConfig sc = spec.scenario(PolicyConfig{});
    sc.policy.algorithm = Algorithm::TunedEpsGreedy;
    sc.policy.t0 = t0;
    sc.policy.eps0 = r.a * static_cast<double>(K) / (r.d * r.d);
    sc.policy.init = InitStrategy::UniformRandom;
    sc.horizon = *std::max_element(ts.begin(), ts.end()) + 1;
    sc.replications = r.replications;
    const Aggregate agg = monte_carlo(sc, opt.threads);

    if (r.d > gap.min_gap()) {
      out << "warning: d = " << num(r.d) << " exceeds the smallest gap " << num(gap.min_gap())
          << "; the bound's hypothesis does not hold for these arms\n";
    }
    CsvFile csv(opt.out_dir / "thm4.csv", spec,
                {"t", "bound", "empirical_suboptimal_freq", "empirical_any_suboptimal_freq", "concentration_term",
                 "delayed_term", "exploration_term", "status"});
    for (Slot t : ts) {
      analysis::Theorem4Params p{r.a, r.d, D, static_cast<int>(K), static_cast<double>(t0), static_cast<double>(t)};
      double worst = 0.0;
      for (ArmId k = 0; k < K; ++k) {
        if (k != agg.optimal) worst = std::max(worst, agg.arm_frequency(t, k));
      }
      try {
        const auto terms = analysis::thm4_bound_terms(p);
        csv.row({std::to_string(t), num(analysis::thm4_suboptimal_prob_bound(p)), num(worst),
                 num(agg.suboptimal_frequency(t)), num(terms.concentration), num(terms.delayed),
                 num(terms.exploration), "ok"});
        out << "t=" << t << " bound=" << num(analysis::thm4_suboptimal_prob_bound(p))
            << " empirical per-arm suboptimal frequency=" << num(worst) << "\n";
      } catch (const analysis::DomainError& e) {
        csv.row({std::to_string(t), "NA", num(worst), num(agg.suboptimal_frequency(t)), "NA", "NA", "NA",
                 std::string("invalid: ") + e.what()});
      }
    }
  }
  out << "wrote " << (opt.out_dir / "bounds.csv").string() << "\n";
  return kSuccess;
}

int cmd_validate(const fs::path& config_path, std::ostream& out) {
  ExperimentSpec spec;
  try {
    spec = load_experiment(config_path);
  } catch (const ConfigError& e) {
    for (const auto& i : e.issues()) out << "error: " << i.key << ": " << i.message << "\n";
    out << "invalid (" << e.issues().size() << " error" << (e.issues().size() == 1 ? "" : "s") << ")\n";
    return kConfigError;
  }

  std::vector<std::string> warnings;
  for (std::size_t k = 0; k < spec.arms.size(); ++k) {
    const auto& a = spec.arms[k];
    const auto m = a.moments();
    char line[256];
    std::snprintf(line, sizeof line, "arm %zu (%s): %s mean=%.4f std=%.4f support=[%d,%d]%s\n", k + 1,
                  spec.arm_names[k].c_str(), to_string(a.kind()), m.mean, m.stddev(), a.min_support(),
                  a.max_support(), a.bounded() ? "" : " (tail cut)");
    out << line;
  }
  ScenarioConfig sc = spec.scenario(spec.policies.front().config);
  const ArmId best = sc.optimal_arm();
  out << "best arm: " << best + 1 << " (" << spec.arm_names[best] << ")\n";
  if (!sc.unique_optimum()) warnings.push_back("arms: two or more arms share the smallest mean; the analytic bounds assume a unique best arm");

  for (const auto& p : spec.policies) {
    out << "policy " << p.label << ": " << detail::canonical(p.config) << "\n";
  }

  if (spec.bounds) {
    const int D = bounds_D(spec);
    for (std::size_t k = 0; k < spec.arms.size(); ++k) {
      if (!spec.arms[k].bounded()) {
        warnings.push_back("arms[" + std::to_string(k) + "]: unbounded delay law; the bounds assume support in [1, D]");
      } else if (spec.arms[k].max_support() > D) {
        warnings.push_back("arms[" + std::to_string(k) + "]: support exceeds bounds.D = " + std::to_string(D));
      }
    }
    for (Slot t0 : spec.bounds->t0_grid) {
      if (t0 <= D) warnings.push_back("bounds.t0_grid: t0 = " + std::to_string(t0) + " <= D; row will be marked invalid");
    }
    if (spec.bounds->theorem4 && sc.unique_optimum()) {
      const auto& r = *spec.bounds->theorem4;
      const auto g = gap_spec_for(spec, D);
      if (r.d > g.min_gap()) {
        warnings.push_back("bounds.theorem4.d: exceeds the smallest gap " + num(g.min_gap()));
      }
      out << "theorem4: eps0 = aK/d^2 = " << num(r.a * static_cast<double>(spec.arms.size()) / (r.d * r.d))
          << ", t0 = " << theorem4_t0(r, spec.arms.size()) << "\n";
    }
    out << "bounds: D = " << D << "\n";
  }
  for (const auto& w : warnings) out << "warning: " << w << "\n";
  out << "valid\n";
  return kSuccess;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-armed bandit interest forwarding with delayed feedback", "ccnmab"};
  app.require_subcommand(1);

  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> replications;
  std::optional<Slot> horizon;
  std::string out_dir;
  std::vector<Slot> t0_list;
  std::vector<std::string> strategy_names;
  std::vector<Slot> t0_grid;
  std::optional<int> traces;
  unsigned threads = 0;

  const auto common = [&](CLI::App* sub) {
    auto* cfg = sub->add_option("--config", config, "Experiment file (YAML)");
    auto* pre = sub->add_option("--preset", preset, "Shipped preset: fig2 fig3 fig4 fig5 fig6 thm4");
    cfg->excludes(pre);
    sub->add_option("--seed", seed, "Master seed");
    sub->add_option("--replications", replications, "Replications (all Monte Carlo stages)");
    sub->add_option("--horizon", horizon, "Slots per run");
    sub->add_option("--out-dir", out_dir, std::string("Output directory (default $") + kOutDirEnv + " or ./out)");
    sub->add_option("--threads", threads, "Worker threads (0 = all cores)");
  };
  auto* simulate = app.add_subcommand("simulate", "Fraction-optimal curves for each policy");
  common(simulate);
  simulate->add_option("--traces", traces, "Write trace_<seed>.csv for the first N replications");
  auto* sweep = app.add_subcommand("sweep-t0", "Curves across initial-phase lengths and strategies");
  common(sweep);
  sweep->add_option("--t0", t0_list, "Initial phase lengths")->delimiter(',');
  sweep->add_option("--strategies", strategy_names, "round-robin,uniform-random")->delimiter(',');
  auto* bounds = app.add_subcommand("bounds", "Closed-form bounds against Monte Carlo");
  common(bounds);
  bounds->add_option("--t0-grid", t0_grid, "Initial phase lengths")->delimiter(',');
  auto* validate = app.add_subcommand("validate", "Check a config without running it");
  common(validate);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    if (config.empty() && preset.empty()) {
      err << "error: --config: one of --config or --preset is required\n";
      return kConfigError;
    }
    const fs::path path = config.empty() ? preset_path(preset) : fs::path(config);
    if (!preset.empty() && !fs::exists(path)) {
      err << "error: --preset: unknown preset '" << preset << "' (looked in " << preset_directory().string() << ")\n";
      return kConfigError;
    }
    if (validate->parsed()) return cmd_validate(path, out);

    ExperimentSpec spec = load_experiment(path);
    if (seed) spec.seed = *seed;
    if (horizon) spec.horizon = *horizon;
    if (replications) {
      spec.replications = *replications;
      if (spec.bounds) {
        spec.bounds->replications = *replications;
        if (spec.bounds->theorem4) spec.bounds->theorem4->replications = *replications;
      }
    }

    CommandOptions opt;
    if (!out_dir.empty()) {
      opt.out_dir = out_dir;
    } else if (const char* env = std::getenv(kOutDirEnv); env && *env) {
      opt.out_dir = env;
    }
    opt.t0_list = t0_list;
    for (const auto& s : strategy_names) {
      const auto st = parse_init_strategy(s);
      if (!st) throw ConfigError("--strategies", "unknown strategy '" + s + "'");
      opt.strategies.push_back(*st);
    }
    opt.t0_grid = t0_grid;
    opt.traces = traces;
    opt.threads = threads;

    if (simulate->parsed()) return cmd_simulate(spec, opt, out);
    if (sweep->parsed()) return cmd_sweep_t0(spec, opt, out);
    return cmd_bounds(spec, opt, out);
  } catch (const ConfigError& e) {
    for (const auto& i : e.issues()) err << "error: " << i.key << ": " << i.message << "\n";
    return kConfigError;
  } catch (const ConfigurationError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
}

}  // namespace ccnmab::cli
