#pragma once

// Univariate Gaussian mixture head: raw network output -> (weights, means,
// scales), the negative log-likelihood loss and closed-form density,
// distribution, quantile and moment evaluation.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "mdnomad/error.hpp"
#include "mdnomad/nn.hpp"
#include "mdnomad/random.hpp"

namespace mdnomad {

inline constexpr double kScaleFloor = 1e-4;

/// Weights, means and scales of an m-component univariate Gaussian mixture.
class MixtureParams {
 public:
  MixtureParams() = default;

  /// Validates: equal non-zero lengths, finite entries, weights a simplex
  /// (|sum - 1| <= 1e-10), scales >= `scale_floor`.
  MixtureParams(std::vector<double> weights, std::vector<double> means, std::vector<double> scales,
                double scale_floor = kScaleFloor)
      : weights_(std::move(weights)), means_(std::move(means)), scales_(std::move(scales)) {
    const std::size_t m = weights_.size();
    if (m == 0 || means_.size() != m || scales_.size() != m)
      throw ShapeError("mixture needs equal, non-zero numbers of weights/means/scales");
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (!std::isfinite(weights_[i]) || !std::isfinite(means_[i]) || !std::isfinite(scales_[i]))
        throw InvalidOutputError("non-finite mixture entry at component " + std::to_string(i));
      if (weights_[i] < 0.0) throw InvalidOutputError("negative mixture weight");
      if (scales_[i] < scale_floor) throw InvalidOutputError("mixture scale below floor");
      total += weights_[i];
    }
    if (std::abs(total - 1.0) > 1e-10) throw InvalidOutputError("mixture weights do not sum to 1");
  }

  std::size_t size() const { return weights_.size(); }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& means() const { return means_; }
  const std::vector<double>& scales() const { return scales_; }

 private:
  std::vector<double> weights_;
  std::vector<double> means_;
  std::vector<double> scales_;
};

inline constexpr double kLogSqrtTwoPi = 0.91893853320467274178032973640562;

inline double normal_pdf(double y, double mean, double scale) {
  const double z = (y - mean) / scale;
  return std::exp(-0.5 * z * z - kLogSqrtTwoPi) / scale;
}

inline double normal_log_pdf(double y, double mean, double scale) {
  const double z = (y - mean) / scale;
  return -0.5 * z * z - kLogSqrtTwoPi - std::log(scale);
}

/// Standard normal CDF via erfc (keeps full relative accuracy in both tails).
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z * std::numbers::sqrt2 * 0.5); }

/// Raw layout: [weight logits (m) | means (m) | scale pre-activations (m)].
inline MixtureParams mixture_from_raw(std::span<const double> raw) {
  if (raw.empty() || raw.size() % 3 != 0) throw ShapeError("raw mixture vector length must be a positive multiple of 3");
  for (std::size_t i = 0; i < raw.size(); ++i)
    if (!std::isfinite(raw[i])) throw InvalidOutputError("non-finite raw entry " + std::to_string(i));
  const std::size_t m = raw.size() / 3;
  std::vector<double> weights = softmax(raw.subspan(0, m));
  std::vector<double> means(raw.begin() + m, raw.begin() + 2 * m);
  std::vector<double> scales(m);
  for (std::size_t i = 0; i < m; ++i) scales[i] = softplus(raw[2 * m + i]) + kScaleFloor;
  // Renormalise against round-off so the simplex check is exact.
  double total = 0.0;
  for (double w : weights) total += w;
  for (double& w : weights) w /= total;
  return MixtureParams(std::move(weights), std::move(means), std::move(scales));
}

inline MixtureParams mixture_from_raw(const Vector& raw) {
  return mixture_from_raw(std::span<const double>(raw.data(), static_cast<std::size_t>(raw.size())));
}

inline double mixture_pdf(const MixtureParams& p, double y) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += p.weights()[i] * normal_pdf(y, p.means()[i], p.scales()[i]);
  return s;
}

inline double mixture_log_pdf(const MixtureParams& p, double y) {
  std::vector<double> terms(p.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    terms[i] = p.weights()[i] > 0.0 ? std::log(p.weights()[i]) + normal_log_pdf(y, p.means()[i], p.scales()[i])
                                    : -INFINITY;
  return log_sum_exp(terms);
}

inline double mixture_mean(const MixtureParams& p) {
  double m = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) m += p.weights()[i] * p.means()[i];
  return m;
}

inline double mixture_variance(const MixtureParams& p) {
  const double mean = mixture_mean(p);
  // Centred form of sum pi (sigma^2 + mu^2) - mean^2; avoids cancellation.
  double v = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p.means()[i] - mean;
    v += p.weights()[i] * (p.scales()[i] * p.scales()[i] + d * d);
  }
  return std::max(v, 0.0);
}

inline double mixture_cdf(const MixtureParams& p, double y) {
  double c = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) c += p.weights()[i] * normal_cdf((y - p.means()[i]) / p.scales()[i]);
  return std::clamp(c, 0.0, 1.0);
}

namespace detail {

inline void check_probability(double v) {
  if (!(v > 0.0 && v < 1.0)) throw UsageError("quantile level must lie in (0,1), got " + std::to_string(v));
}

inline std::pair<double, double> quantile_bracket(const MixtureParams& p) {
  const auto [mn, mx] = std::minmax_element(p.means().begin(), p.means().end());
  const double smax = *std::max_element(p.scales().begin(), p.scales().end());
  return {*mn - 12.0 * smax, *mx + 12.0 * smax};
}

inline double bisect_cdf(const MixtureParams& p, double v, double lo, double hi) {
  double span = hi - lo;
  while (mixture_cdf(p, lo) > v) {
    lo -= span;
    span *= 2.0;
  }
  span = hi - lo;
  while (mixture_cdf(p, hi) < v) {
    hi += span;
    span *= 2.0;
  }
  // Run to floating-point convergence: narrow components far from zero make
  // any x tolerance relative to |x| too coarse in probability.
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (mixture_cdf(p, mid) < v) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Solves cdf(q) = v by bisection.
inline double mixture_quantile(const MixtureParams& p, double v) {
  detail::check_probability(v);
  const auto [lo, hi] = detail::quantile_bracket(p);
  return detail::bisect_cdf(p, v, lo, hi);
}

/// Quantiles at ascending levels; each solve starts its bracket at the
/// previous root, which is otherwise identical to calling mixture_quantile.
inline std::vector<double> mixture_quantiles(const MixtureParams& p, std::span<const double> ascending_levels) {
  std::vector<double> q(ascending_levels.size());
  auto [lo, hi] = detail::quantile_bracket(p);
  double prev_v = 0.0;
  for (std::size_t k = 0; k < ascending_levels.size(); ++k) {
    const double v = ascending_levels[k];
    detail::check_probability(v);
    if (v < prev_v) throw UsageError("quantile levels must be ascending");
    const double start = k == 0 ? lo : std::min(q[k - 1], hi);
    q[k] = detail::bisect_cdf(p, v, start, std::max(hi, start + 1e-12));
    prev_v = v;
  }
  return q;
}

inline double mixture_sample(const MixtureParams& p, Rng& rng, StandardNormal& normal) {
  const double u = uniform01(rng);
  double acc = 0.0;
  std::size_t pick = p.size() - 1;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p.weights()[i];
    if (u < acc) {
      pick = i;
      break;
    }
  }
  while (p.weights()[pick] == 0.0 && pick > 0) --pick;  // round-off landing on an empty tail component
  return p.means()[pick] + p.scales()[pick] * normal(rng);
}

inline double mixture_sample(const MixtureParams& p, Rng& rng) {
  StandardNormal normal;
  return mixture_sample(p, rng, normal);
}

// ---------------------------------------------------------------------------
// Negative log-likelihood

enum class LossReduction { kSum, kMean };

struct NllResult {
  double loss = 0.0;
  Matrix gradient;  // d loss / d raw, same shape as the raw batch (3m x B)
};

/// Loss over a batch of raw head outputs (one column per sample). With kSum
/// the loss is the sum of per-sample negative log densities.
inline NllResult nll_loss(const Matrix& batch_raw, std::span<const double> targets,
                          LossReduction reduction = LossReduction::kSum) {
  const Eigen::Index batch = batch_raw.cols();
  if (batch == 0) throw UsageError("nll_loss needs a non-empty batch");
  if (static_cast<std::size_t>(batch) != targets.size()) throw UsageError("nll_loss: raw/target count mismatch");
  if (batch_raw.rows() == 0 || batch_raw.rows() % 3 != 0) throw ShapeError("raw rows must be a positive multiple of 3");
  const Eigen::Index m = batch_raw.rows() / 3;
  NllResult r;
  r.gradient.resize(batch_raw.rows(), batch);
  const double scale = reduction == LossReduction::kMean ? 1.0 / static_cast<double>(batch) : 1.0;
  std::vector<double> log_w(m), log_joint(m);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const double y = targets[b];
    const auto col = batch_raw.col(b);
    if (!col.allFinite() || !std::isfinite(y)) throw InvalidOutputError("non-finite raw output or target in batch");
    double lmax = col(0);
    for (Eigen::Index i = 1; i < m; ++i) lmax = std::max(lmax, col(i));
    double lsum = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) lsum += std::exp(col(i) - lmax);
    const double log_norm = lmax + std::log(lsum);
    for (Eigen::Index i = 0; i < m; ++i) {
      log_w[i] = col(i) - log_norm;
      const double sigma = softplus(col(2 * m + i)) + kScaleFloor;
      log_joint[i] = log_w[i] + normal_log_pdf(y, col(m + i), sigma);
    }
    const double log_p = log_sum_exp(log_joint);
    r.loss -= log_p * scale;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double resp = std::exp(log_joint[i] - log_p);
      const double w = std::exp(log_w[i]);
      const double mu = col(m + i);
      const double pre = col(2 * m + i);
      const double sigma = softplus(pre) + kScaleFloor;
      const double d = y - mu;
      r.gradient(i, b) = (w - resp) * scale;
      r.gradient(m + i, b) = -resp * d / (sigma * sigma) * scale;
      r.gradient(2 * m + i, b) = resp * (1.0 / sigma - d * d / (sigma * sigma * sigma)) * logistic(pre) * scale;
    }
  }
  return r;
}

}  // namespace mdnomad
