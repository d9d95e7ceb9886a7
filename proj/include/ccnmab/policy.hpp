#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ccnmab/rng.hpp"

namespace ccnmab {

using ArmId = std::size_t;
using Slot = std::int64_t;

class ConfigurationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Algorithm { EpsGreedy, TunedEpsGreedy, Ucb };
enum class InitStrategy { RoundRobin, UniformRandom };

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::EpsGreedy: return "eps-greedy";
    case Algorithm::TunedEpsGreedy: return "tuned-eps-greedy";
    case Algorithm::Ucb: return "ucb";
  }
  return "?";
}

inline const char* to_string(InitStrategy s) {
  return s == InitStrategy::RoundRobin ? "round-robin" : "uniform-random";
}

inline std::optional<Algorithm> parse_algorithm(std::string_view s) {
  if (s == "eps-greedy") return Algorithm::EpsGreedy;
  if (s == "tuned-eps-greedy") return Algorithm::TunedEpsGreedy;
  if (s == "ucb") return Algorithm::Ucb;
  return std::nullopt;
}

inline std::optional<InitStrategy> parse_init_strategy(std::string_view s) {
  if (s == "round-robin" || s == "rr") return InitStrategy::RoundRobin;
  if (s == "uniform-random" || s == "uni") return InitStrategy::UniformRandom;
  return std::nullopt;
}

struct PolicyConfig {
  Algorithm algorithm = Algorithm::EpsGreedy;
  Slot t0 = 1;
  double eps = 0.1;
  // No default: the natural value aK/d^2 depends on the problem's gap.
  std::optional<double> eps0;
  double L = 2.0;
  InitStrategy init = InitStrategy::RoundRobin;

  /// Problems with the configuration, empty when valid. eps = 0 (pure greedy)
  /// is accepted as a degenerate case.
  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    if (t0 < 1) out.push_back("t0: must be a positive number of slots");
    switch (algorithm) {
      case Algorithm::EpsGreedy:
        if (!(eps >= 0.0 && eps < 1.0)) out.push_back("eps: must lie in [0, 1)");
        break;
      case Algorithm::TunedEpsGreedy:
        if (!eps0) {
          out.push_back("eps0: required for tuned-eps-greedy");
        } else if (!(*eps0 > 0.0 && *eps0 < static_cast<double>(t0))) {
          out.push_back("eps0: must lie in (0, t0) (tuned eps-greedy requires eps0 in (0, t0))");
        }
        break;
      case Algorithm::Ucb:
        if (!(L > 0.0)) out.push_back("L: must be positive");
        break;
    }
    return out;
  }

  void validate() const {
    const auto p = problems();
    if (!p.empty()) throw ConfigurationError(p.front());
  }
};

/// Per-arm learned statistics. `sent` counts interests forwarded to the arm,
/// `answered` those whose reply has been observed.
struct ArmStats {
  std::int64_t sent = 0;
  std::int64_t answered = 0;
  std::int64_t delay_sum = 0;

  friend bool operator==(const ArmStats&, const ArmStats&) = default;
};

inline std::optional<double> average_delay(const ArmStats& stats) {
  if (stats.answered == 0) return std::nullopt;
  return static_cast<double>(stats.delay_sum) / static_cast<double>(stats.answered);
}

/// Index minimized by the policy at slot `t` (t >= 1 for UCB).
/// Sample mean for the eps-greedy variants; for UCB the sample mean minus
/// sqrt(L ln t / answered).
inline std::optional<double> index(const PolicyConfig& policy, const ArmStats& stats, double t) {
  const auto mean = average_delay(stats);
  if (!mean || policy.algorithm != Algorithm::Ucb) return mean;
  return *mean - std::sqrt(policy.L * std::log(t) / static_cast<double>(stats.answered));
}

inline double exploration_prob(const PolicyConfig& policy, Slot t) {
  switch (policy.algorithm) {
    case Algorithm::EpsGreedy: return policy.eps;
    case Algorithm::TunedEpsGreedy:
      if (t <= 0) return 1.0;
      return std::min(1.0, policy.eps0.value_or(0.0) / static_cast<double>(t));
    case Algorithm::Ucb: return 0.0;
  }
  return 0.0;
}

struct Decision {
  ArmId arm = 0;
  // True when the arm was chosen without looking at indices: initial phase
  // or a uniform exploration draw.
  bool exploratory = false;
};

class PolicyState;
inline Decision select_arm(PolicyState& state, const PolicyConfig& policy, Rng& rng);

class PolicyState {
 public:
  explicit PolicyState(std::size_t arm_count) : arms_(arm_count) {
    if (arm_count == 0) throw ConfigurationError("arm set is empty");
  }

  std::size_t arm_count() const { return arms_.size(); }
  const std::vector<ArmStats>& arms() const { return arms_; }
  const ArmStats& arm(ArmId k) const { return arms_.at(k); }
  Slot t() const { return t_; }

  /// Arm order used by round-robin and by the unobserved-arm rule. Empty
  /// until the first selection draws it.
  const std::vector<ArmId>& order() const { return order_; }

  void record_send(ArmId k) {
    arms_.at(k).sent += 1;
    ++t_;
  }

  void record_reply(ArmId k, std::int64_t delay) {
    ArmStats& a = arms_.at(k);
    if (a.answered >= a.sent) {
      throw std::logic_error("reply for arm " + std::to_string(k) + " without an outstanding interest");
    }
    if (delay < 1) throw std::logic_error("reply delay must be at least one slot");
    a.answered += 1;
    a.delay_sum += delay;
  }

  std::int64_t total_sent() const {
    return std::accumulate(arms_.begin(), arms_.end(), std::int64_t{0},
                           [](std::int64_t s, const ArmStats& a) { return s + a.sent; });
  }

  std::int64_t total_answered() const {
    return std::accumulate(arms_.begin(), arms_.end(), std::int64_t{0},
                           [](std::int64_t s, const ArmStats& a) { return s + a.answered; });
  }

  // Test hook: install statistics directly.
  void set_stats(ArmId k, ArmStats s) { arms_.at(k) = s; }

  void draw_order(Rng& rng) {
    order_.resize(arms_.size());
    std::iota(order_.begin(), order_.end(), ArmId{0});
    for (std::size_t i = order_.size() - 1; i > 0; --i) {
      std::swap(order_[i], order_[rng.uniform_index(i + 1)]);
    }
  }

 private:
  std::vector<ArmStats> arms_;
  std::vector<ArmId> order_;
  std::size_t cursor_ = 0;
  Slot t_ = 0;

  friend Decision select_arm(PolicyState&, const PolicyConfig&, Rng&);
};

/// Chooses the arm for slot state.t().
///
/// Before t0 the initial strategy governs; round-robin follows a uniformly
/// random permutation drawn at the first call. From t0 on, with probability
/// exploration_prob a uniformly random arm is taken; otherwise the arm of
/// smallest index. Arms without any observed reply come first (in the order
/// of order()), and ties between defined indices go to the lowest arm id.
inline Decision select_arm(PolicyState& state, const PolicyConfig& policy, Rng& rng) {
  const std::size_t K = state.arms_.size();
  if (state.order_.empty()) state.draw_order(rng);
  const Slot t = state.t_;

  if (t < policy.t0) {
    if (policy.init == InitStrategy::RoundRobin) {
      const ArmId k = state.order_[state.cursor_];
      state.cursor_ = (state.cursor_ + 1) % K;
      return {k, true};
    }
    return {static_cast<ArmId>(rng.uniform_index(K)), true};
  }

  const double explore = exploration_prob(policy, t);
  if (explore > 0.0 && rng.uniform01() < explore) {
    return {static_cast<ArmId>(rng.uniform_index(K)), true};
  }

  for (ArmId k : state.order_) {
    if (state.arms_[k].answered == 0) return {k, false};
  }
  ArmId best = 0;
  double best_index = 0.0;
  for (ArmId k = 0; k < K; ++k) {
    const double v = *index(policy, state.arms_[k], static_cast<double>(t));
    if (k == 0 || v < best_index) {
      best = k;
      best_index = v;
    }
  }
  return {best, false};
}

}  // namespace ccnmab
