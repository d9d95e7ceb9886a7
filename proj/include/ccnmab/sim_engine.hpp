#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "ccnmab/delay_models.hpp"
#include "ccnmab/policy.hpp"
#include "ccnmab/rng.hpp"

namespace ccnmab {

/// An in-flight interest. The delay is drawn at send time.
struct PendingReply {
  ArmId arm = 0;
  Slot sent_at = 0;
  Slot arrives_at = 0;

  std::int64_t delay() const { return arrives_at - sent_at; }
};

namespace detail {

inline void append_double(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

inline std::string canonical(const DelayDistribution& d) {
  std::string s = to_string(d.kind());
  if (d.kind() == DelayKind::ExplicitTable) {
    s += "(offset=" + std::to_string(d.min_support()) + ";";
    for (double w : d.table()) {
      append_double(s, w);
      s += ',';
    }
    s += ')';
    return s;
  }
  s += "(shift=" + std::to_string(d.shift()) + ";p=";
  append_double(s, d.p());
  s += ";r=" + std::to_string(d.r());
  if (d.truncation()) s += ";dmax=" + std::to_string(*d.truncation());
  s += ')';
  return s;
}

inline std::string canonical(const PolicyConfig& p) {
  std::string s = to_string(p.algorithm);
  s += "(t0=" + std::to_string(p.t0) + ";init=" + to_string(p.init);
  switch (p.algorithm) {
    case Algorithm::EpsGreedy: s += ";eps="; append_double(s, p.eps); break;
    case Algorithm::TunedEpsGreedy: s += ";eps0="; append_double(s, p.eps0.value_or(0.0)); break;
    case Algorithm::Ucb: s += ";L="; append_double(s, p.L); break;
  }
  s += ')';
  return s;
}

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

struct ScenarioConfig {
  std::vector<DelayDistribution> arms;
  PolicyConfig policy;
  Slot horizon = 10'000;
  std::int64_t replications = 200;
  std::uint64_t seed = 1;

  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    if (arms.size() < 2) out.push_back("arms: at least two arms are required");
    for (auto& p : policy.problems()) out.push_back("policy." + p);
    if (horizon < policy.t0) out.push_back("horizon: must be at least t0");
    if (replications < 1) out.push_back("replications: must be at least 1");
    return out;
  }

  void validate() const {
    const auto p = problems();
    if (!p.empty()) throw ConfigurationError(p.front());
  }

  /// Arm of smallest true mean delay; ties go to the lowest id.
  ArmId optimal_arm() const {
    ArmId best = 0;
    for (ArmId k = 1; k < arms.size(); ++k) {
      if (arms[k].moments().mean < arms[best].moments().mean) best = k;
    }
    return best;
  }

  bool unique_optimum() const {
    const double m = arms.at(optimal_arm()).moments().mean;
    return std::count_if(arms.begin(), arms.end(),
                         [m](const DelayDistribution& d) { return d.moments().mean == m; }) == 1;
  }

  /// Largest delay any arm can produce (tail cut for unbounded laws).
  int max_delay() const {
    int d = 1;
    for (const auto& a : arms) d = std::max(d, a.max_support());
    return d;
  }

  std::string canonical() const {
    std::string s = "rng=" + std::string(kRngAlgorithm) + "|arms=";
    for (const auto& a : arms) s += detail::canonical(a) + ",";
    s += "|policy=" + detail::canonical(policy);
    s += "|horizon=" + std::to_string(horizon);
    s += "|replications=" + std::to_string(replications);
    s += "|seed=" + std::to_string(seed);
    return s;
  }

  std::uint64_t digest() const { return detail::fnv1a(canonical()); }
};

struct SlotRecord {
  Slot slot = 0;
  ArmId arm = 0;
  bool exploratory = false;
  // Replies observed by the decision at this slot.
  std::int64_t answered = 0;
  // Interests still in flight after this slot's send.
  std::int64_t pending = 0;
};

struct RunTrace {
  std::vector<SlotRecord> slots;
  // Row-major horizon x K: sends to arm k in slots [0, t].
  std::vector<std::int64_t> cumulative;
  std::size_t arm_count = 0;
  std::vector<ArmStats> final_stats;
  ArmId optimal = 0;
  std::uint64_t seed = 0;
  std::uint64_t config_digest = 0;

  std::int64_t cumulative_sends(Slot t, ArmId k) const {
    return cumulative.at(static_cast<std::size_t>(t) * arm_count + k);
  }
};

/// Hooks invoked by the slot loop. All members are optional no-ops.
struct NullObserver {
  void on_reply(const PendingReply&, Slot) {}
  void on_decision(Slot, const Decision&, const PolicyState&) {}
  void on_send(const PendingReply&) {}
  void on_slot_end(Slot, const PolicyState&, std::int64_t) {}
};

/// Runs the slot loop without validating `config`.
///
/// Each slot t: deliver replies with arrives_at == t (earlier ones were
/// delivered at their own slot) in ascending send order, select an arm, draw
/// its delay and enqueue the reply. Replies still pending at the horizon are
/// dropped.
template <class Observer>
void simulate(const ScenarioConfig& config, std::uint64_t seed, Observer& observer) {
  Rng rng(seed);
  PolicyState state(config.arms.size());
  const auto ring_size = static_cast<std::size_t>(config.max_delay()) + 1;
  std::vector<std::vector<PendingReply>> ring(ring_size);
  std::int64_t pending = 0;

  for (Slot t = 0; t < config.horizon; ++t) {
    auto& due = ring[static_cast<std::size_t>(t) % ring_size];
    for (const PendingReply& r : due) {
      state.record_reply(r.arm, r.delay());
      observer.on_reply(r, t);
    }
    pending -= static_cast<std::int64_t>(due.size());
    due.clear();

    const Decision d = select_arm(state, config.policy, rng);
    observer.on_decision(t, d, state);

    const int delay = config.arms[d.arm].sample(rng);
    const PendingReply reply{d.arm, t, t + delay};
    state.record_send(d.arm);
    ring[static_cast<std::size_t>(reply.arrives_at) % ring_size].push_back(reply);
    ++pending;
    observer.on_send(reply);
    observer.on_slot_end(t, state, pending);
  }
}

namespace detail {

class TraceBuilder : public NullObserver {
 public:
  TraceBuilder(RunTrace& trace, std::size_t K) : trace_(trace), counts_(K, 0) {}

  void on_decision(Slot t, const Decision& d, const PolicyState& state) {
    counts_[d.arm] += 1;
    trace_.slots.push_back({t, d.arm, d.exploratory, state.total_answered(), 0});
    trace_.cumulative.insert(trace_.cumulative.end(), counts_.begin(), counts_.end());
  }

  void on_slot_end(Slot, const PolicyState& state, std::int64_t pending) {
    trace_.slots.back().pending = pending;
    trace_.final_stats = state.arms();
  }

 private:
  RunTrace& trace_;
  std::vector<std::int64_t> counts_;
};

}  // namespace detail

template <class Observer>
RunTrace run(const ScenarioConfig& config, std::uint64_t seed, Observer& extra) {
  config.validate();
  RunTrace trace;
  trace.arm_count = config.arms.size();
  trace.optimal = config.optimal_arm();
  trace.seed = seed;
  trace.config_digest = config.digest();
  trace.slots.reserve(static_cast<std::size_t>(config.horizon));
  trace.cumulative.reserve(static_cast<std::size_t>(config.horizon) * trace.arm_count);

  struct Both : NullObserver {
    detail::TraceBuilder builder;
    Observer& extra;
    void on_reply(const PendingReply& r, Slot t) { extra.on_reply(r, t); }
    void on_decision(Slot t, const Decision& d, const PolicyState& s) {
      builder.on_decision(t, d, s);
      extra.on_decision(t, d, s);
    }
    void on_send(const PendingReply& r) { extra.on_send(r); }
    void on_slot_end(Slot t, const PolicyState& s, std::int64_t pending) {
      builder.on_slot_end(t, s, pending);
      extra.on_slot_end(t, s, pending);
    }
  } both{{}, detail::TraceBuilder(trace, trace.arm_count), extra};

  simulate(config, seed, both);
  return trace;
}

/// Single replication: validates the config and records the full trace.
inline RunTrace run(const ScenarioConfig& config, std::uint64_t seed) {
  NullObserver none;
  return run(config, seed, none);
}

inline double fraction_optimal(const RunTrace& trace, Slot t) {
  return static_cast<double>(trace.cumulative_sends(t, trace.optimal)) / static_cast<double>(t + 1);
}

/// Per-slot statistics over replications, kept as integer sums so that any
/// merge order gives identical results.
struct Aggregate {
  std::size_t arm_count = 0;
  ArmId optimal = 0;
  Slot horizon = 0;
  std::int64_t replications = 0;
  // horizon x K: replications that chose arm k at slot t.
  std::vector<std::int64_t> choices;
  // Sum over replications of optimal-arm sends in [0, t], and of its square.
  std::vector<std::int64_t> optimal_sum;
  std::vector<std::int64_t> optimal_sq_sum;

  Aggregate() = default;
  Aggregate(std::size_t K, ArmId opt, Slot h)
      : arm_count(K),
        optimal(opt),
        horizon(h),
        choices(static_cast<std::size_t>(h) * K, 0),
        optimal_sum(static_cast<std::size_t>(h), 0),
        optimal_sq_sum(static_cast<std::size_t>(h), 0) {}

  void merge(const Aggregate& other) {
    replications += other.replications;
    for (std::size_t i = 0; i < choices.size(); ++i) choices[i] += other.choices[i];
    for (std::size_t i = 0; i < optimal_sum.size(); ++i) {
      optimal_sum[i] += other.optimal_sum[i];
      optimal_sq_sum[i] += other.optimal_sq_sum[i];
    }
  }

  void add(const RunTrace& trace) {
    replications += 1;
    for (std::size_t t = 0; t < static_cast<std::size_t>(horizon); ++t) {
      choices[t * arm_count + trace.slots[t].arm] += 1;
      const std::int64_t c = trace.cumulative[t * arm_count + optimal];
      optimal_sum[t] += c;
      optimal_sq_sum[t] += c * c;
    }
  }

  double mean_fraction_optimal(Slot t) const {
    return static_cast<double>(optimal_sum.at(static_cast<std::size_t>(t))) /
           (static_cast<double>(replications) * static_cast<double>(t + 1));
  }

  /// Standard error of mean_fraction_optimal across replications.
  double fraction_stderr(Slot t) const {
    if (replications < 2) return 0.0;
    const auto i = static_cast<std::size_t>(t);
    const double n = static_cast<double>(replications);
    const double s = static_cast<double>(optimal_sum[i]);
    const double ss = static_cast<double>(optimal_sq_sum[i]);
    const double var_counts = std::max(0.0, (ss - s * s / n) / (n - 1.0));
    return std::sqrt(var_counts / n) / static_cast<double>(t + 1);
  }

  /// Mean number of sends to suboptimal arms in [0, t].
  double mean_suboptimal_sends(Slot t) const {
    return static_cast<double>(t + 1) -
           static_cast<double>(optimal_sum.at(static_cast<std::size_t>(t))) / static_cast<double>(replications);
  }

  double arm_frequency(Slot t, ArmId k) const {
    return static_cast<double>(choices.at(static_cast<std::size_t>(t) * arm_count + k)) /
           static_cast<double>(replications);
  }

  /// Fraction of replications choosing any suboptimal arm at slot t.
  double suboptimal_frequency(Slot t) const { return 1.0 - arm_frequency(t, optimal); }
};

/// Runs fn(index, local_state) for index in [0, count) on a pool of threads.
/// Each worker gets its own copy of `init`; the copies are returned for the
/// caller to merge.
template <class Local, class Fn>
std::vector<Local> parallel_replications(std::int64_t count, const Local& init, Fn fn, unsigned threads = 0) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::int64_t>(threads, std::max<std::int64_t>(count, 1)));
  std::vector<Local> locals(threads, init);
  if (threads == 1) {
    for (std::int64_t i = 0; i < count; ++i) fn(i, locals[0]);
    return locals;
  }
  std::atomic<std::int64_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (std::int64_t i = next++; i < count; i = next++) fn(i, locals[w]);
    });
  }
  for (auto& th : pool) th.join();
  return locals;
}

namespace detail {

class AggregatingObserver : public NullObserver {
 public:
  explicit AggregatingObserver(Aggregate& agg) : agg_(agg) {}

  void on_decision(Slot t, const Decision& d, const PolicyState&) {
    const auto i = static_cast<std::size_t>(t);
    agg_.choices[i * agg_.arm_count + d.arm] += 1;
    if (d.arm == agg_.optimal) ++count_;
    agg_.optimal_sum[i] += count_;
    agg_.optimal_sq_sum[i] += count_ * count_;
  }

 private:
  Aggregate& agg_;
  std::int64_t count_ = 0;
};

}  // namespace detail

/// Aggregate over config.replications runs. Replication i uses
/// replication_seed(config.seed, i).
inline Aggregate monte_carlo(const ScenarioConfig& config, unsigned threads = 0) {
  config.validate();
  const Aggregate empty(config.arms.size(), config.optimal_arm(), config.horizon);
  auto locals = parallel_replications(
      config.replications, empty,
      [&](std::int64_t i, Aggregate& local) {
        detail::AggregatingObserver obs(local);
        simulate(config, replication_seed(config.seed, static_cast<std::uint64_t>(i)), obs);
        local.replications += 1;
      },
      threads);
  Aggregate total = empty;
  for (const auto& l : locals) total.merge(l);
  return total;
}

inline Aggregate aggregate_traces(std::span<const RunTrace> traces) {
  if (traces.empty()) throw std::invalid_argument("no traces to aggregate");
  Aggregate agg(traces[0].arm_count, traces[0].optimal, static_cast<Slot>(traces[0].slots.size()));
  for (const auto& t : traces) agg.add(t);
  return agg;
}

/// Which replies feed the end-of-phase sample means.
enum class SampleCut {
  // Every reply observable at the decision at slot t0 (arrives_at <= t0).
  ObservedByT0,
  // Every interest sent in the first t0 - D slots, all of which are answered
  // by t0 when delays are bounded by D.
  SentBeforeT0MinusD,
};

struct BestArmEstimate {
  double probability = 0.0;
  // 95% normal-approximation half-width.
  double half_width = 0.0;
  // Trials the best arm won outright.
  std::int64_t strict_wins = 0;
  std::int64_t trials = 0;
  // Trials where the best arm tied for the smallest sample mean.
  std::int64_t ties = 0;
};

/// Frequency with which the arm of smallest sample mean at the end of an
/// initial phase of length t0 is the true best arm.
///
/// Only config.arms, config.policy.init and config.seed are used. A
/// replication in which any arm has no sample counts as a failure. When m
/// arms share the smallest sample mean and the best arm is among them, the
/// trial scores 1/m, which makes the estimate independent of arm labels.
/// `max_delay` (the D of the SentBeforeT0MinusD cut) defaults to
/// config.max_delay().
inline BestArmEstimate empirical_best_arm_prob(const ScenarioConfig& config, Slot t0, std::int64_t replications,
                                               SampleCut cut, std::optional<int> max_delay = std::nullopt,
                                               unsigned threads = 0) {
  if (replications < 1) throw ConfigurationError("replications: must be at least 1");
  if (t0 < 1) throw ConfigurationError("t0: must be positive");
  ScenarioConfig phase;
  phase.arms = config.arms;
  phase.policy.algorithm = Algorithm::EpsGreedy;
  phase.policy.t0 = t0;
  phase.policy.init = config.policy.init;
  phase.horizon = t0;
  phase.replications = replications;
  phase.seed = config.seed;
  phase.validate();

  const std::size_t K = phase.arms.size();
  const ArmId best = phase.optimal_arm();
  const Slot D = max_delay.value_or(phase.max_delay());

  struct Counts {
    std::int64_t strict_wins = 0;
    // tied_wins[m]: trials where the best arm tied with m - 1 other arms.
    std::vector<std::int64_t> tied_wins;
  };
  struct Collector : NullObserver {
    SampleCut cut;
    Slot t0;
    Slot D;
    std::vector<ArmStats> stats;
    void on_send(const PendingReply& r) {
      const bool use = cut == SampleCut::ObservedByT0 ? r.arrives_at <= t0 : r.sent_at < t0 - D;
      if (use) {
        stats[r.arm].answered += 1;
        stats[r.arm].delay_sum += r.delay();
      }
    }
  };

  auto locals = parallel_replications(
      replications, Counts{0, std::vector<std::int64_t>(K + 1, 0)},
      [&](std::int64_t i, Counts& local) {
        Collector c;
        c.cut = cut;
        c.t0 = t0;
        c.D = D;
        c.stats.assign(K, ArmStats{});
        simulate(phase, replication_seed(phase.seed, static_cast<std::uint64_t>(i)), c);
        for (const auto& s : c.stats) {
          if (s.answered == 0) return;
        }
        // Exact comparison of sum_a / n_a against sum_b / n_b.
        const auto cmp = [&](ArmId a, ArmId b) {
          const auto lhs = c.stats[a].delay_sum * c.stats[b].answered;
          const auto rhs = c.stats[b].delay_sum * c.stats[a].answered;
          return (lhs > rhs) - (lhs < rhs);
        };
        std::size_t tied = 1;
        for (ArmId j = 0; j < K; ++j) {
          if (j == best) continue;
          const int o = cmp(j, best);
          if (o < 0) return;
          if (o == 0) ++tied;
        }
        if (tied == 1) {
          ++local.strict_wins;
        } else {
          ++local.tied_wins[tied];
        }
      },
      threads);

  BestArmEstimate est;
  std::vector<std::int64_t> tied_wins(K + 1, 0);
  for (const auto& l : locals) {
    est.strict_wins += l.strict_wins;
    for (std::size_t m = 0; m <= K; ++m) tied_wins[m] += l.tied_wins[m];
  }
  double score = static_cast<double>(est.strict_wins);
  for (std::size_t m = 2; m <= K; ++m) {
    est.ties += tied_wins[m];
    score += static_cast<double>(tied_wins[m]) / static_cast<double>(m);
  }
  est.trials = replications;
  est.probability = score / static_cast<double>(replications);
  est.half_width = 1.96 * std::sqrt(est.probability * (1.0 - est.probability) / static_cast<double>(replications));
  return est;
}

}  // namespace ccnmab
