#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ccnmab/rng.hpp"

namespace ccnmab {

class InvalidDistribution : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidTruncation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Moments {
  double mean = 0.0;
  double variance = 0.0;

  double stddev() const { return std::sqrt(variance); }
};

enum class DelayKind {
  ShiftedNegativeBinomial,
  TruncatedShiftedNegativeBinomial,
  ExplicitTable,
};

inline const char* to_string(DelayKind kind) {
  switch (kind) {
    case DelayKind::ShiftedNegativeBinomial: return "shifted-negative-binomial";
    case DelayKind::TruncatedShiftedNegativeBinomial: return "truncated-shifted-negative-binomial";
    case DelayKind::ExplicitTable: return "explicit-table";
  }
  return "?";
}

namespace detail {

// log P[K = k] for K ~ NB(r, p) counting failures before the r-th success.
inline double nb_log_pmf(std::int64_t k, double p, int r) {
  const double kd = static_cast<double>(k);
  return std::lgamma(kd + r) - std::lgamma(kd + 1.0) - std::lgamma(static_cast<double>(r)) +
         r * std::log(p) + kd * std::log1p(-p);
}

inline constexpr double kTailCut = 1e-12;
inline constexpr std::size_t kMaxTableSize = 10'000'000;

}  // namespace detail

/// Bounded discrete delay law of one router, in whole slots.
///
/// Every distribution is backed by a pmf table over a contiguous support
/// [min_support(), max_support()]. Shifted negative binomial laws use the
/// "failures before the r-th success" convention:
///
///   P[X = shift + k] = C(k + r - 1, k) p^r (1 - p)^k,  k >= 0,
///
/// so that E[X] = shift + r(1-p)/p and Var[X] = r(1-p)/p^2. The untruncated
/// law's table is cut at the first x whose tail mass drops below 1e-12; pmf()
/// and cdf() still evaluate the exact law outside the table.
///
/// Objects are immutable after construction.
class DelayDistribution {
 public:
  static DelayDistribution shifted_negative_binomial(int shift, double p, int r) {
    validate_nb(shift, p, r);
    DelayDistribution d;
    d.kind_ = DelayKind::ShiftedNegativeBinomial;
    d.shift_ = shift;
    d.p_ = p;
    d.r_ = r;
    d.offset_ = shift;

    double cumulative = 0.0;
    double compensation = 0.0;
    for (std::int64_t k = 0;; ++k) {
      const double w = std::exp(detail::nb_log_pmf(k, p, r));
      d.pmf_.push_back(w);
      const double y = w - compensation;
      const double s = cumulative + y;
      compensation = (s - cumulative) - y;
      cumulative = s;
      if (1.0 - cumulative < detail::kTailCut) break;
      if (d.pmf_.size() >= detail::kMaxTableSize) {
        throw InvalidDistribution("negative binomial table exceeds size limit; p too small for r");
      }
    }
    d.finish_tables(/*finite=*/false);
    return d;
  }

  static DelayDistribution truncated_shifted_negative_binomial(int shift, double p, int r,
                                                               int d_max) {
    validate_nb(shift, p, r);
    if (d_max < shift) {
      throw InvalidTruncation("truncation bound " + std::to_string(d_max) +
                              " is below the minimum support " + std::to_string(shift));
    }
    DelayDistribution d;
    d.kind_ = DelayKind::TruncatedShiftedNegativeBinomial;
    d.shift_ = shift;
    d.p_ = p;
    d.r_ = r;
    d.truncation_ = d_max;
    d.offset_ = shift;
    d.pmf_.reserve(static_cast<std::size_t>(d_max - shift + 1));
    for (std::int64_t k = 0; k <= d_max - shift; ++k) {
      d.pmf_.push_back(std::exp(detail::nb_log_pmf(k, p, r)));
    }
    d.normalize();
    d.finish_tables(/*finite=*/true);
    return d;
  }

  /// Law with P[X = i + 1] = probabilities[i]. The list must sum to one
  /// within 1e-9; it is renormalized exactly.
  static DelayDistribution explicit_table(std::vector<double> probabilities) {
    if (probabilities.empty()) throw InvalidDistribution("explicit table is empty");
    double total = 0.0;
    for (double w : probabilities) {
      if (!std::isfinite(w) || w < 0.0) {
        throw InvalidDistribution("explicit table entries must be finite and nonnegative");
      }
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw InvalidDistribution("explicit table sums to " + std::to_string(total) + ", not 1");
    }
    DelayDistribution d;
    d.kind_ = DelayKind::ExplicitTable;
    const auto first = std::find_if(probabilities.begin(), probabilities.end(),
                                    [](double w) { return w > 0.0; });
    const auto last = std::find_if(probabilities.rbegin(), probabilities.rend(),
                                   [](double w) { return w > 0.0; }).base();
    d.offset_ = 1 + static_cast<int>(first - probabilities.begin());
    d.pmf_.assign(first, last);
    d.normalize();
    d.finish_tables(/*finite=*/true);
    return d;
  }

  /// Point mass at `delay` (>= 1).
  static DelayDistribution point_mass(int delay) {
    if (delay < 1) throw InvalidDistribution("point mass delay must be at least 1 slot");
    std::vector<double> probabilities(static_cast<std::size_t>(delay), 0.0);
    probabilities.back() = 1.0;
    return explicit_table(std::move(probabilities));
  }

  DelayKind kind() const { return kind_; }
  int shift() const { return shift_; }
  double p() const { return p_; }
  int r() const { return r_; }
  std::optional<int> truncation() const { return truncation_; }
  bool bounded() const { return kind_ != DelayKind::ShiftedNegativeBinomial; }

  int min_support() const { return offset_; }
  /// Largest tabulated value. For untruncated laws this is the tail cut.
  int max_support() const { return offset_ + static_cast<int>(pmf_.size()) - 1; }

  /// pmf values for x = min_support() .. max_support().
  std::span<const double> table() const { return pmf_; }

  double pmf(std::int64_t x) const {
    if (x < offset_) return 0.0;
    if (x <= max_support()) return pmf_[static_cast<std::size_t>(x - offset_)];
    if (kind_ == DelayKind::ShiftedNegativeBinomial) {
      return std::exp(detail::nb_log_pmf(x - shift_, p_, r_));
    }
    return 0.0;
  }

  double cdf(std::int64_t x) const {
    if (x < offset_) return 0.0;
    if (x <= max_support()) return cdf_[static_cast<std::size_t>(x - offset_)];
    if (kind_ != DelayKind::ShiftedNegativeBinomial) return 1.0;
    double c = cdf_.back();
    for (std::int64_t y = max_support() + 1; y <= x; ++y) {
      const double w = std::exp(detail::nb_log_pmf(y - shift_, p_, r_));
      c += w;
      if (w < 1e-300) break;
    }
    return std::min(c, 1.0);
  }

  Moments moments() const {
    if (kind_ == DelayKind::ShiftedNegativeBinomial) {
      const double q = 1.0 - p_;
      return {shift_ + r_ * q / p_, r_ * q / (p_ * p_)};
    }
    Moments m;
    for (std::size_t i = 0; i < pmf_.size(); ++i) m.mean += value_at(i) * pmf_[i];
    for (std::size_t i = 0; i < pmf_.size(); ++i) {
      const double dev = value_at(i) - m.mean;
      m.variance += dev * dev * pmf_[i];
    }
    return m;
  }

  /// Inverse-CDF draw over the pmf table.
  int sample(Rng& rng) const {
    const double u = rng.uniform01();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    const auto idx = it == cdf_.end() ? cdf_.size() - 1 : static_cast<std::size_t>(it - cdf_.begin());
    return offset_ + static_cast<int>(idx);
  }

  friend bool operator==(const DelayDistribution&, const DelayDistribution&) = default;

 private:
  DelayDistribution() = default;

  static void validate_nb(int shift, double p, int r) {
    if (shift < 1) {
      throw InvalidDistribution("shift must be at least 1 slot (a reply never arrives in its sending slot)");
    }
    if (!(p > 0.0 && p < 1.0)) throw InvalidDistribution("p must lie in (0, 1)");
    if (r < 1) throw InvalidDistribution("r must be a positive integer");
  }

  double value_at(std::size_t i) const { return static_cast<double>(offset_) + static_cast<double>(i); }

  void normalize() {
    double total = 0.0;
    for (double w : pmf_) total += w;
    if (!(total > 0.0)) throw InvalidTruncation("truncated law has no mass");
    for (double& w : pmf_) w /= total;
  }

  void finish_tables(bool finite) {
    cdf_.resize(pmf_.size());
    double c = 0.0;
    for (std::size_t i = 0; i < pmf_.size(); ++i) {
      c += pmf_[i];
      cdf_[i] = std::min(c, 1.0);
    }
    if (finite) cdf_.back() = 1.0;
  }

  friend DelayDistribution truncate(const DelayDistribution& dist, int d_max);

  DelayKind kind_ = DelayKind::ExplicitTable;
  int shift_ = 0;
  double p_ = 0.0;
  int r_ = 0;
  std::optional<int> truncation_;
  int offset_ = 1;
  std::vector<double> pmf_;
  std::vector<double> cdf_;
};

/// Conditional law X | X <= d_max.
inline DelayDistribution truncate(const DelayDistribution& dist, int d_max) {
  if (d_max < dist.min_support()) {
    throw InvalidTruncation("truncation bound " + std::to_string(d_max) +
                            " is below the minimum support " + std::to_string(dist.min_support()));
  }
  if (dist.bounded() && d_max >= dist.max_support()) return dist;
  if (dist.kind() != DelayKind::ExplicitTable) {
    return DelayDistribution::truncated_shifted_negative_binomial(dist.shift(), dist.p(), dist.r(), d_max);
  }
  DelayDistribution out = dist;
  out.truncation_ = d_max;
  out.pmf_.resize(static_cast<std::size_t>(d_max - dist.min_support() + 1));
  while (out.pmf_.back() == 0.0) out.pmf_.pop_back();
  out.normalize();
  out.finish_tables(/*finite=*/true);
  return out;
}

/// The three router laws of the reference CCN example: shift 2, r = 10 and
/// p = 0.8, 0.7, 0.6.
inline std::vector<DelayDistribution> reference_routers(std::optional<int> d_max = std::nullopt) {
  std::vector<DelayDistribution> arms;
  for (double p : {0.8, 0.7, 0.6}) {
    arms.push_back(d_max ? DelayDistribution::truncated_shifted_negative_binomial(2, p, 10, *d_max)
                         : DelayDistribution::shifted_negative_binomial(2, p, 10));
  }
  return arms;
}

}  // namespace ccnmab
