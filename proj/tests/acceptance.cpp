// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ccnmab/analysis.hpp"
#include "ccnmab/sim_engine.hpp"
#include "experiment.hpp"

using namespace ccnmab;
using namespace ccnmab::analysis;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "  violated: " << what << "\n";
    }
  }
};

std::string fmt(double v, int digits = 4) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

const std::vector<Slot> kGrid{20, 40, 68, 100, 150};
constexpr int kD = 15;

ScenarioConfig truncated_scenario(InitStrategy init, std::uint64_t seed) {
  ScenarioConfig c;
  c.arms = reference_routers(kD);
  c.policy.init = init;
  c.seed = seed;
  return c;
}

ArmGapSpec truncated_spec() {
  const auto arms = reference_routers(kD);
  return make_arm_gap_spec(std::span<const DelayDistribution>(arms), kD);
}

// Shared Monte Carlo estimates for criteria 3-5.
struct BestArmTable {
  std::vector<BestArmEstimate> rr;
  std::vector<BestArmEstimate> uni;
};

const BestArmTable& best_arm_table() {
  static const BestArmTable table = [] {
    BestArmTable t;
    for (Slot t0 : kGrid) {
      t.rr.push_back(empirical_best_arm_prob(truncated_scenario(InitStrategy::RoundRobin, 3101), t0, 20'000,
                                             SampleCut::SentBeforeT0MinusD, kD));
      t.uni.push_back(empirical_best_arm_prob(truncated_scenario(InitStrategy::UniformRandom, 3102), t0, 20'000,
                                              SampleCut::SentBeforeT0MinusD, kD));
    }
    return t;
  }();
  return table;
}

void criterion1(Outcome& o) {
  const auto arms = reference_routers();
  const double mean[] = {4.5, 6.29, 8.67};
  const double sd[] = {1.77, 2.47, 3.33};
  for (std::size_t k = 0; k < 3; ++k) {
    const auto m = arms[k].moments();
    o.detail << "  router" << k + 1 << ": mean " << fmt(m.mean) << " std " << fmt(m.stddev()) << "\n";
    o.require(std::abs(m.mean - mean[k]) <= 0.005, "router" + std::to_string(k + 1) + " mean");
    o.require(std::abs(m.stddev() - sd[k]) <= 0.005, "router" + std::to_string(k + 1) + " std");
  }
}

void criterion2(Outcome& o) {
  const auto arms = reference_routers();
  const auto spec = make_arm_gap_spec(std::span<const DelayDistribution>(arms), kD);
  const auto e = transient_slots_estimate(spec);
  o.detail << "  T = " << fmt(e.unrounded) << " (rounded up " << e.slots << "), floor " << fmt(e.success_floor) << "\n";
  o.require(std::abs(e.unrounded - 68.6) <= 0.2, "unrounded estimate within 68.6 +- 0.2");
  o.require(0.977 * 0.977 > 0.95 && e.success_floor > 0.95, "0.977^2 > 0.95");
}

void criterion3(Outcome& o) {
  const auto spec = truncated_spec();
  const auto& tab = best_arm_table();
  for (std::size_t i = 0; i < kGrid.size(); ++i) {
    const double approx = thm3_success_approx_rr(spec, static_cast<double>(kGrid[i]));
    const double emp = tab.rr[i].probability;
    o.detail << "  t0=" << kGrid[i] << " approx " << fmt(approx) << " empirical " << fmt(emp) << " +- "
             << fmt(tab.rr[i].half_width) << " diff " << fmt(std::abs(approx - emp)) << "\n";
    o.require(std::abs(approx - emp) <= 0.03, "t0=" + std::to_string(kGrid[i]) + " within 0.03");
    if (kGrid[i] == 68) o.require(emp >= 0.95, "empirical at t0=68 >= 0.95");
  }
}

void criterion4(Outcome& o) {
  const auto spec = truncated_spec();
  const auto& tab = best_arm_table();
  for (std::size_t i = 0; i < kGrid.size(); ++i) {
    const double t0 = static_cast<double>(kGrid[i]);
    const double thm2 = thm2_success_approx(spec, t0);
    const double thm3 = thm3_success_approx_rr(spec, t0);
    const double emp = tab.uni[i].probability;
    o.detail << "  t0=" << kGrid[i] << " approx " << fmt(thm2) << " empirical " << fmt(emp) << " +- "
             << fmt(tab.uni[i].half_width) << " diff " << fmt(std::abs(thm2 - emp)) << " (rr approx " << fmt(thm3)
             << ")\n";
    o.require(std::abs(thm2 - emp) <= 0.04, "t0=" + std::to_string(kGrid[i]) + " within 0.04");
    o.require(thm3 >= thm2, "t0=" + std::to_string(kGrid[i]) + " round-robin approx >= uniform approx");
  }
}

void criterion5(Outcome& o) {
  const auto spec = truncated_spec();
  const auto& tab = best_arm_table();
  for (std::size_t i = 0; i < kGrid.size(); ++i) {
    const double bound = thm1_success_lower_bound(spec, static_cast<double>(kGrid[i]));
    const auto& e = tab.uni[i];
    const double upper = e.probability + 2.576 * std::sqrt(e.probability * (1 - e.probability) / e.trials);
    o.detail << "  t0=" << kGrid[i] << " bound " << bound << " empirical upper 99% " << fmt(upper) << "\n";
    o.require(bound <= upper, "t0=" + std::to_string(kGrid[i]) + " lower bound direction");
    o.require(bound <= tab.rr[i].probability + 2.576 * tab.rr[i].half_width / 1.96, "round-robin direction");
  }
}

void criterion6(Outcome& o) {
  const double a = 8.0 * kD * kD;
  const double d = 1.78;
  const int K = 3;
  const double eps0 = a * K / (d * d);
  const Slot t0 = static_cast<Slot>(std::floor(eps0)) + 1;

  ScenarioConfig c;
  c.arms = reference_routers(kD);
  c.policy.algorithm = Algorithm::TunedEpsGreedy;
  c.policy.t0 = t0;
  c.policy.eps0 = eps0;
  c.policy.init = InitStrategy::UniformRandom;
  c.horizon = 100 * t0 + 1;
  c.replications = 10'000;
  c.seed = 3106;
  const auto agg = monte_carlo(c);

  const auto spec = truncated_spec();
  o.detail << "  eps0 = " << fmt(eps0) << ", t0 = " << t0 << ", smallest gap " << fmt(spec.min_gap()) << "\n";
  for (Slot m : {2, 10, 100}) {
    const Slot t = m * t0;
    const Theorem4Params p{a, d, kD, K, static_cast<double>(t0), static_cast<double>(t)};
    const double bound = thm4_suboptimal_prob_bound(p);
    for (ArmId k = 1; k < 3; ++k) {
      const double f = agg.arm_frequency(t, k);
      const double lower = f - 2.576 * std::sqrt(f * (1 - f) / static_cast<double>(agg.replications));
      o.detail << "  t=" << t << " arm " << k + 1 << " frequency " << fmt(f) << " bound " << fmt(bound) << "\n";
      o.require(lower <= bound, "t=" + std::to_string(t) + " dominance");
    }
  }
}

void criterion7(Outcome& o) {
  const auto spec = cli::load_experiment(cli::preset_path("fig2"));
  o.require(spec.horizon == 10'000 && spec.replications == 200, "fig2 preset scale");
  double eps_final = 0.0, tuned_final = 0.0;
  for (const auto& p : spec.policies) {
    o.require(p.config.t0 == 3 && p.config.init == InitStrategy::RoundRobin, p.label + " uses t0=3 round robin");
    const auto agg = monte_carlo(spec.scenario(p.config));
    const double f = agg.mean_fraction_optimal(spec.horizon - 1);
    o.detail << "  " << p.label << ": " << fmt(f) << "\n";
    o.require(f >= 0.85, p.label + " reaches 0.85");
    if (p.config.algorithm == Algorithm::EpsGreedy) eps_final = f;
    if (p.config.algorithm == Algorithm::TunedEpsGreedy) tuned_final = f;
  }
  o.require(tuned_final - eps_final >= 0.02, "tuned exceeds eps-greedy by 0.02");
}

void criterion8(Outcome& o) {
  for (const char* name : {"fig3", "fig4", "fig5"}) {
    const auto spec = cli::load_experiment(cli::preset_path(name));
    for (const auto& base : spec.policies) {
      std::map<std::pair<Slot, InitStrategy>, double> final;
      for (Slot t0 : {3, 9, 30}) {
        for (auto init : {InitStrategy::RoundRobin, InitStrategy::UniformRandom}) {
          auto cfg = spec.scenario(base.config);
          cfg.policy.t0 = t0;
          cfg.policy.init = init;
          cfg.replications = 2000;
          final[{t0, init}] = monte_carlo(cfg).mean_fraction_optimal(spec.horizon - 1);
        }
      }
      for (Slot t0 : {3, 9, 30}) {
        const double rr = final[{t0, InitStrategy::RoundRobin}];
        const double uni = final[{t0, InitStrategy::UniformRandom}];
        o.detail << "  " << base.label << " t0=" << t0 << ": round-robin " << fmt(rr) << " uniform " << fmt(uni)
                 << "\n";
        o.require(rr >= uni - 0.01, base.label + " t0=" + std::to_string(t0) + " round-robin >= uniform - 0.01");
      }
      for (auto init : {InitStrategy::RoundRobin, InitStrategy::UniformRandom}) {
        o.require(final[{3, init}] >= final[{30, init}] - 0.01,
                  base.label + " " + to_string(init) + " t0=3 >= t0=30 - 0.01");
      }
    }
  }
}

// One-sided check: the bound must not fall below the lower 99% edge of the
// simulated tail frequency.
void check_tail(Outcome& o, const std::string& name, int hits, int trials, double bound) {
  const double f = static_cast<double>(hits) / trials;
  const double lower = f - 2.576 * std::sqrt(f * (1 - f) / trials);
  o.detail << "  " << name << ": frequency " << fmt(f, 5) << " bound " << fmt(bound, 5) << "\n";
  o.require(lower <= bound, name);
}

void criterion9(Outcome& o) {
  const int trials = 100'000;
  Rng rng(3109);

  // Independent sums: centered uniform, centered Bernoulli, heterogeneous
  // uniform ranges.
  struct Setting {
    std::string name;
    std::vector<std::pair<double, double>> ranges;
    double M;
    double V;
    double eta;
    std::function<double(Rng&, std::size_t)> draw;
  };
  std::vector<Setting> settings;
  settings.push_back({"uniform(-1,1) x 10", std::vector<std::pair<double, double>>(10, {-1.0, 1.0}), 1.0, 10.0 / 3.0,
                      3.0, [](Rng& r, std::size_t) { return 2.0 * r.uniform01() - 1.0; }});
  settings.push_back({"bernoulli(0.3) x 30", std::vector<std::pair<double, double>>(30, {-0.3, 0.7}), 0.7, 30 * 0.21,
                      4.0, [](Rng& r, std::size_t) { return (r.uniform01() < 0.3 ? 1.0 : 0.0) - 0.3; }});
  {
    Setting s{"uniform(-c_t,c_t) x 20", {}, 0.0, 0.0, 5.0, {}};
    std::vector<double> c;
    for (int t = 0; t < 20; ++t) c.push_back(0.5 + t / 20.0);
    for (double ct : c) {
      s.ranges.push_back({-ct, ct});
      s.M = std::max(s.M, ct);
      s.V += ct * ct / 3.0;
    }
    s.draw = [c](Rng& r, std::size_t t) { return c[t] * (2.0 * r.uniform01() - 1.0); };
    settings.push_back(std::move(s));
  }
  for (const auto& s : settings) {
    int hits = 0;
    for (int i = 0; i < trials; ++i) {
      double sum = 0.0;
      for (std::size_t t = 0; t < s.ranges.size(); ++t) sum += s.draw(rng, t);
      hits += sum >= s.eta;
    }
    check_tail(o, "hoeffding " + s.name, hits, trials, hoeffding_tail(s.eta, s.ranges));
    check_tail(o, "bernstein " + s.name, hits, trials, bernstein_tail(s.eta, s.M, s.V));
    check_tail(o, "bennett " + s.name, hits, trials, bennett_tail(s.eta, s.M, s.V));
  }

  // Martingales with bounded increments.
  {
    // Simple random walk, 50 steps.
    std::vector<double> c(50, 1.0);
    int hits = 0;
    for (int i = 0; i < trials; ++i) {
      double z = 0.0;
      for (double ci : c) z += rng.uniform01() < 0.5 ? ci : -ci;
      hits += z >= 12.0;
    }
    check_tail(o, "azuma random walk", hits, trials, azuma_tail(12.0, c));
  }
  {
    // Growing step sizes.
    std::vector<double> c;
    for (int s = 1; s <= 40; ++s) c.push_back(0.2 + 0.05 * s);
    int hits = 0;
    for (int i = 0; i < trials; ++i) {
      double z = 0.0;
      for (double ci : c) z += ci * (2.0 * rng.uniform01() - 1.0);
      hits += z >= 5.0;
    }
    check_tail(o, "azuma varying steps", hits, trials, azuma_tail(5.0, c));
  }
  {
    // History-dependent step: full step when behind, half step when ahead.
    std::vector<double> c(60, 1.0);
    int hits = 0;
    for (int i = 0; i < trials; ++i) {
      double z = 0.0;
      for (double ci : c) {
        const double scale = z > 0.0 ? 0.5 : 1.0;
        z += scale * ci * (rng.uniform01() < 0.5 ? 1.0 : -1.0);
      }
      hits += z >= 10.0;
    }
    check_tail(o, "azuma adaptive steps", hits, trials, azuma_tail(10.0, c));
  }

  int grid_violations = 0;
  for (int i = 0; i < 100; ++i) {
    const double eta = 0.1 + 0.2 * (i % 10);
    const double M = 0.05 + 0.4 * ((i / 10) % 5);
    const double V = (i < 50) ? 0.5 : 3.0;
    if (bennett_tail(eta, M, V) > bernstein_tail(eta, M, V) * (1.0 + 1e-12)) ++grid_violations;
  }
  o.detail << "  bennett <= bernstein violations on 100-point grid: " << grid_violations << "\n";
  o.require(grid_violations == 0, "bennett <= bernstein pointwise");
}

void criterion10(Outcome& o) {
  struct Audit : NullObserver {
    std::vector<PendingReply> sent;
    std::int64_t causality = 0;
    void on_reply(const PendingReply& r, Slot t) {
      if (t < r.sent_at + 1 || r.arrives_at != t) ++causality;
    }
    void on_send(const PendingReply& r) { sent.push_back(r); }
  };
  Rng gen(3110);
  std::int64_t conservation = 0, pending_bound = 0, causality = 0, determinism = 0;
  const int configs = 400;
  for (int trial = 0; trial < configs; ++trial) {
    const std::size_t K = 2 + gen.uniform_index(4);
    std::vector<DelayDistribution> arms;
    int D = 1;
    for (std::size_t k = 0; k < K; ++k) {
      const int kind = static_cast<int>(gen.uniform_index(3));
      if (kind == 0) {
        const int shift = 1 + static_cast<int>(gen.uniform_index(4));
        const int dmax = shift + static_cast<int>(gen.uniform_index(15));
        arms.push_back(DelayDistribution::truncated_shifted_negative_binomial(
            shift, 0.2 + 0.7 * gen.uniform01(), 1 + static_cast<int>(gen.uniform_index(10)), dmax));
      } else if (kind == 1) {
        std::vector<double> w(1 + gen.uniform_index(12));
        double s = 0.0;
        for (auto& x : w) s += (x = gen.uniform01());
        for (auto& x : w) x /= s;
        arms.push_back(DelayDistribution::explicit_table(w));
      } else {
        arms.push_back(DelayDistribution::point_mass(1 + static_cast<int>(gen.uniform_index(8))));
      }
      D = std::max(D, arms.back().max_support());
    }
    ScenarioConfig c;
    c.arms = arms;
    c.policy.algorithm = static_cast<Algorithm>(gen.uniform_index(3));
    c.policy.t0 = 1 + static_cast<Slot>(gen.uniform_index(20));
    c.policy.eps = 0.3 * gen.uniform01();
    c.policy.eps0 = 0.9 * static_cast<double>(c.policy.t0);
    c.policy.init = static_cast<InitStrategy>(gen.uniform_index(2));
    c.horizon = c.policy.t0 + static_cast<Slot>(gen.uniform_index(static_cast<std::uint64_t>(501 - c.policy.t0)));
    const std::uint64_t seed = gen.next_u64();

    Audit audit;
    const auto tr = run(c, seed, audit);
    causality += audit.causality;
    for (const auto& r : audit.sent) causality += r.arrives_at < r.sent_at + 1;
    for (const auto& rec : tr.slots) {
      std::int64_t sent = 0;
      for (ArmId k = 0; k < K; ++k) sent += tr.cumulative_sends(rec.slot, k);
      conservation += (rec.answered + rec.pending != rec.slot + 1) || (sent != rec.slot + 1);
      pending_bound += rec.pending > D;
    }
    std::int64_t total_sent = 0;
    for (const auto& s : tr.final_stats) total_sent += s.sent;
    conservation += total_sent != c.horizon;

    const auto again = run(c, seed);
    bool same = again.cumulative == tr.cumulative && again.final_stats == tr.final_stats;
    for (std::size_t i = 0; same && i < tr.slots.size(); ++i) {
      same = again.slots[i].arm == tr.slots[i].arm && again.slots[i].pending == tr.slots[i].pending &&
             again.slots[i].answered == tr.slots[i].answered;
    }
    determinism += !same;
  }
  o.detail << "  " << configs << " random configurations; violations: conservation " << conservation << ", pending "
           << pending_bound << ", causality " << causality << ", determinism " << determinism << "\n";
  o.require(conservation == 0, "conservation");
  o.require(pending_bound == 0, "pending <= D");
  o.require(causality == 0, "causality");
  o.require(determinism == 0, "determinism");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"Router delay moments", criterion1},
      {"Transient length estimate", criterion2},
      {"Round-robin approximation vs Monte Carlo", criterion3},
      {"Uniform approximation vs Monte Carlo", criterion4},
      {"Lower bound direction", criterion5},
      {"Tuned eps-greedy suboptimality bound dominates", criterion6},
      {"Policy comparison curves", criterion7},
      {"Initial phase ordering", criterion8},
      {"Concentration inequalities dominate simulation", criterion9},
      {"Bookkeeping invariants", criterion10},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "  exception: " << e.what() << "\n";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::cout << "CRITERION " << i + 1 << ": " << (o.pass ? "PASS" : "FAIL") << " - " << criteria[i].first << " ("
              << fmt(secs, 1) << " s)\n"
              << o.detail.str() << std::flush;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed\n";
  return failures == 0 ? 0 : 1;
}
