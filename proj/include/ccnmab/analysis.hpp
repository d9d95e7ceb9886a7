#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ccnmab/delay_models.hpp"

namespace ccnmab::analysis {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// ---------------------------------------------------------------------------
// Concentration inequalities. Every bound is a tail probability, capped at 1.

/// Chernoff-Hoeffding: P[sum Y_t >= eta] <= exp(-2 eta^2 / sum (b_t - a_t)^2)
/// for independent zero-mean Y_t in [a_t, b_t].
inline double hoeffding_tail(double eta, std::span<const std::pair<double, double>> ranges) {
  if (!(eta > 0.0)) throw DomainError("hoeffding_tail: eta must be positive");
  double width_sq = 0.0;
  for (auto [a, b] : ranges) {
    if (b < a) throw DomainError("hoeffding_tail: range upper end below lower end");
    width_sq += (b - a) * (b - a);
  }
  if (width_sq == 0.0) return 0.0;
  return std::min(1.0, std::exp(-2.0 * eta * eta / width_sq));
}

/// B(lambda) = 2 lambda^-2 [(1 + lambda) ln(1 + lambda) - lambda], B(0) = 1.
inline double bennett_b(double lambda) {
  if (lambda < 0.0) throw DomainError("bennett_b: lambda must be nonnegative");
  if (lambda < 1e-3) {
    // 2 * sum_{n>=2} (-1)^n lambda^(n-2) / (n (n-1))
    double term = 1.0;
    double sum = 0.0;
    for (int n = 2; n < 12; ++n) {
      sum += ((n % 2 == 0) ? 1.0 : -1.0) * term / (n * (n - 1.0));
      term *= lambda;
    }
    return 2.0 * sum;
  }
  return 2.0 * ((1.0 + lambda) * std::log1p(lambda) - lambda) / (lambda * lambda);
}

/// Bennett: exp{-eta^2 B(M eta / V) / (2V)} for |Y_t| <= M and V >= sum Var Y_t.
inline double bennett_tail(double eta, double M, double V) {
  if (!(eta > 0.0 && M > 0.0 && V > 0.0)) throw DomainError("bennett_tail: eta, M and V must be positive");
  return std::min(1.0, std::exp(-0.5 * eta * eta / V * bennett_b(M * eta / V)));
}

/// Bernstein: exp{-eta^2 / (2 (V + M eta / 3))}.
inline double bernstein_tail(double eta, double M, double V) {
  if (!(eta > 0.0 && M >= 0.0 && V >= 0.0)) throw DomainError("bernstein_tail: invalid arguments");
  const double denom = V + M * eta / 3.0;
  if (denom == 0.0) return 0.0;
  return std::min(1.0, std::exp(-0.5 * eta * eta / denom));
}

/// Azuma: P[Z_t >= lambda] <= exp(-lambda^2 / (2 sum c(s)^2)) for a
/// zero-mean martingale with |Z_s - Z_{s-1}| <= c(s).
inline double azuma_tail(double lambda, std::span<const double> increments) {
  if (!(lambda > 0.0)) throw DomainError("azuma_tail: lambda must be positive");
  double sum_sq = 0.0;
  for (double c : increments) {
    if (c < 0.0) throw DomainError("azuma_tail: increments must be nonnegative");
    sum_sq += c * c;
  }
  if (sum_sq == 0.0) return 0.0;
  return std::min(1.0, std::exp(-lambda * lambda / (2.0 * sum_sq)));
}

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// ---------------------------------------------------------------------------
// End-of-initial-phase success probability.

/// True means, variances and gaps of a K-arm problem with delays in [1, D].
struct ArmGapSpec {
  std::vector<double> means;
  std::vector<double> variances;
  std::size_t best = 0;
  std::vector<double> gaps;
  int D = 1;
  // Probability that the initial phase picks arm j in a slot.
  std::vector<double> probs;

  std::size_t K() const { return means.size(); }

  /// Smallest gap over suboptimal arms.
  double min_gap() const {
    double g = INFINITY;
    for (std::size_t j = 0; j < K(); ++j) {
      if (j != best) g = std::min(g, gaps[j]);
    }
    return g;
  }

  double max_suboptimal_variance() const {
    double v = 0.0;
    for (std::size_t j = 0; j < K(); ++j) {
      if (j != best) v = std::max(v, variances[j]);
    }
    return v;
  }
};

/// Builds the gap description from explicit moments. `probs` defaults to 1/K.
inline ArmGapSpec make_arm_gap_spec(std::vector<double> means, std::vector<double> variances, int D,
                                    std::optional<std::vector<double>> probs = std::nullopt) {
  if (means.size() < 2 || variances.size() != means.size()) {
    throw DomainError("arm gap spec: need at least two arms with one variance each");
  }
  if (D < 1) throw DomainError("arm gap spec: D must be at least 1");
  ArmGapSpec s;
  s.means = std::move(means);
  s.variances = std::move(variances);
  s.D = D;
  s.best = static_cast<std::size_t>(std::min_element(s.means.begin(), s.means.end()) - s.means.begin());
  for (double m : s.means) s.gaps.push_back(m - s.means[s.best]);
  const auto K = s.means.size();
  s.probs = probs.value_or(std::vector<double>(K, 1.0 / static_cast<double>(K)));
  if (s.probs.size() != K) throw DomainError("arm gap spec: one selection probability per arm");
  double total = 0.0;
  for (double p : s.probs) total += p;
  if (std::abs(total - 1.0) > 1e-9) throw DomainError("arm gap spec: selection probabilities must sum to 1");
  return s;
}

/// Gap description of a set of delay laws, using their exact moments.
inline ArmGapSpec make_arm_gap_spec(std::span<const DelayDistribution> arms, int D,
                                    std::optional<std::vector<double>> probs = std::nullopt) {
  std::vector<double> means, variances;
  for (const auto& a : arms) {
    const auto m = a.moments();
    means.push_back(m.mean);
    variances.push_back(m.variance);
  }
  return make_arm_gap_spec(std::move(means), std::move(variances), D, std::move(probs));
}

/// c_j = D^2 + (gap/2) D + (gap/2) p_best D.
inline double c_coefficient(int D, double gap, double p_best) {
  return D * static_cast<double>(D) + 0.5 * gap * D + 0.5 * gap * p_best * D;
}

inline double c_coefficient(const ArmGapSpec& spec, std::size_t j) {
  if (j == spec.best) throw DomainError("c_coefficient: j must differ from the best arm");
  return c_coefficient(spec.D, spec.gaps.at(j), spec.probs[spec.best]);
}

namespace detail {

inline void require_strict_best(const ArmGapSpec& spec) {
  for (std::size_t j = 0; j < spec.K(); ++j) {
    if (j != spec.best && !(spec.gaps[j] > 0.0)) throw DomainError("best arm is not unique");
  }
}

inline void require_t0_above_D(const ArmGapSpec& spec, double t0) {
  if (!(t0 > spec.D)) throw DomainError("initial phase length t0 must exceed D");
}

}  // namespace detail

/// Lower bound on the probability that the end-of-phase sample means rank
/// the best arm first, for uniform random selection during the phase:
///
///   prod_{j != *} (1 - exp(-gap_j^2 (t0 - D)^2 / (8 K^2 c_j^2 t0)))^2.
inline double thm1_success_lower_bound(const ArmGapSpec& spec, double t0) {
  detail::require_t0_above_D(spec, t0);
  detail::require_strict_best(spec);
  const double K = static_cast<double>(spec.K());
  double product = 1.0;
  for (std::size_t j = 0; j < spec.K(); ++j) {
    if (j == spec.best) continue;
    const double c = c_coefficient(spec, j);
    const double gap = spec.gaps[j];
    const double exponent = gap * gap * (t0 - spec.D) * (t0 - spec.D) / (8.0 * K * K * c * c * t0);
    const double factor = std::clamp(-std::expm1(-exponent), 0.0, 1.0);
    product *= factor * factor;
  }
  return std::clamp(product, 0.0, 1.0);
}

/// Normal approximation of the success probability when every arm is
/// picked independently with probability probs[j] during the phase and the
/// means use the first t0 - D sends:
///
///   prod_{j != *} Phi(gap_j p_j sqrt(t0-D) / (2 sqrt(p_j V_j + gap_j^2 p_j (1-p_j) / 4)))
///               * Phi(gap_j p_* sqrt(t0-D) / (2 sqrt(p_* V_* + gap_j^2 p_* (1-p_*) / 4))).
inline double thm2_success_approx(const ArmGapSpec& spec, double t0) {
  detail::require_t0_above_D(spec, t0);
  detail::require_strict_best(spec);
  const double root_n = std::sqrt(t0 - spec.D);
  const auto arg = [&](double gap, double p, double var) {
    return gap * p * root_n / (2.0 * std::sqrt(p * var + gap * gap * p * (1.0 - p) / 4.0));
  };
  const double p_best = spec.probs[spec.best];
  const double v_best = spec.variances[spec.best];
  double product = 1.0;
  for (std::size_t j = 0; j < spec.K(); ++j) {
    if (j == spec.best) continue;
    const double gap = spec.gaps[j];
    product *= normal_cdf(arg(gap, spec.probs[j], spec.variances[j])) * normal_cdf(arg(gap, p_best, v_best));
  }
  return product;
}

/// Normal approximation of the success probability under round-robin,
/// where each arm receives (t0 - D) / K of the first t0 - D sends:
///
///   prod_{j != *} Phi(gap_j sqrt((t0 - D) / (K (V_* + V_j)))).
///
/// For K = 3 this is the familiar factor 3 under the square root.
inline double thm3_success_approx_rr(const ArmGapSpec& spec, double t0) {
  detail::require_t0_above_D(spec, t0);
  detail::require_strict_best(spec);
  const double K = static_cast<double>(spec.K());
  double product = 1.0;
  for (std::size_t j = 0; j < spec.K(); ++j) {
    if (j == spec.best) continue;
    const double var_sum = spec.variances[spec.best] + spec.variances[j];
    const double z = var_sum > 0.0 ? spec.gaps[j] * std::sqrt((t0 - spec.D) / (K * var_sum)) : INFINITY;
    product *= normal_cdf(z);
  }
  return product;
}

struct TransientEstimate {
  // D + 4K (V_* + max_j V_j) / min_j gap_j^2 before rounding.
  double unrounded = 0.0;
  long slots = 0;
  // Success probability guaranteed by the two-sigma rule, 0.977^(K-1).
  double success_floor = 0.0;
};

/// Phase length after which the round-robin normal approximation puts every
/// factor at Phi(2) or above. With K = 3 the coefficient 4K is 12.
inline TransientEstimate transient_slots_estimate(const ArmGapSpec& spec) {
  detail::require_strict_best(spec);
  const double K = static_cast<double>(spec.K());
  const double gap = spec.min_gap();
  TransientEstimate e;
  e.unrounded = spec.D + 4.0 * K * (spec.variances[spec.best] + spec.max_suboptimal_variance()) / (gap * gap);
  e.slots = static_cast<long>(std::ceil(e.unrounded - 1e-9));
  e.success_floor = std::pow(0.977, K - 1.0);
  return e;
}

// ---------------------------------------------------------------------------
// Exploitation phase of tuned eps-greedy.

struct Theorem4Params {
  double a = 0.0;
  double d = 0.0;
  int D = 1;
  int K = 2;
  double t0 = 0.0;
  double t = 0.0;

  /// Exploration constant eps0 = aK/d^2.
  double eps0() const { return a * K / (d * d); }
};

struct Theorem4Terms {
  double concentration = 0.0;  // 2D (a/d^2) ln(x) x^{-3a/(14 d^2)}
  double delayed = 0.0;        // (16 D^3 / d^2) e^{(D+1)/8} x^{-a/(8 D^2)}
  double exploration = 0.0;    // a / (d^2 t)

  double sum() const { return concentration + delayed + exploration; }
};

/// The three terms of the per-slot bound on choosing a given suboptimal arm
/// at slot t, with x = t d^2 e^{1/2} / (aK). Power terms are evaluated in log
/// space.
inline Theorem4Terms thm4_bound_terms(const Theorem4Params& p) {
  if (!(p.a > 0.0 && p.d > 0.0)) throw DomainError("frequency bound: a and d must be positive");
  if (p.D < 1 || p.K < 2) throw DomainError("frequency bound: need D >= 1 and K >= 2");
  if (!(p.t0 > p.eps0())) throw DomainError("frequency bound: t0 must exceed aK/d^2");
  if (!(p.t >= p.t0)) throw DomainError("frequency bound: t must be at least t0");
  const double d2 = p.d * p.d;
  const double D = p.D;
  const double log_x = std::log(p.t) + std::log(d2) + 0.5 - std::log(p.a) - std::log(static_cast<double>(p.K));
  Theorem4Terms terms;
  terms.concentration = 2.0 * D * (p.a / d2) * log_x * std::exp(-(3.0 * p.a / (14.0 * d2)) * log_x);
  terms.delayed = std::exp(std::log(16.0 * D * D * D / d2) + (D + 1.0) / 8.0 - (p.a / (8.0 * D * D)) * log_x);
  terms.exploration = p.a / (d2 * p.t);
  return terms;
}

inline double thm4_suboptimal_prob_bound(const Theorem4Params& p) {
  return std::min(1.0, thm4_bound_terms(p).sum());
}

}  // namespace ccnmab::analysis
