#pragma once

// Distribution-level error metrics: empirical quantiles, squared
// 2-Wasserstein via quantile functions, KL against a KDE-smoothed reference,
// relative l1 of statistic fields.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "mdnomad/error.hpp"
#include "mdnomad/mixture.hpp"

namespace mdnomad {

class EmpiricalDistribution {
 public:
  EmpiricalDistribution() = default;
  explicit EmpiricalDistribution(std::vector<double> samples) : sorted_(std::move(samples)) {
    if (sorted_.size() < 2) throw MetricError("empirical distribution needs at least two samples");
    for (double v : sorted_)
      if (!std::isfinite(v)) throw MetricError("non-finite sample in empirical distribution");
    std::sort(sorted_.begin(), sorted_.end());
  }

  std::size_t size() const { return sorted_.size(); }
  const std::vector<double>& sorted() const { return sorted_; }
  double min() const { return sorted_.front(); }
  double max() const { return sorted_.back(); }

  double mean() const {
    double s = 0.0;
    for (double v : sorted_) s += v;
    return s / static_cast<double>(sorted_.size());
  }
  /// Unbiased sample variance.
  double variance() const {
    const double m = mean();
    double s = 0.0;
    for (double v : sorted_) s += (v - m) * (v - m);
    return s / static_cast<double>(sorted_.size() - 1);
  }

 private:
  std::vector<double> sorted_;
};

/// Type-7 quantile: linear interpolation between order statistics at (n-1)v.
inline double empirical_quantile(const EmpiricalDistribution& d, double v) {
  if (!(v > 0.0 && v < 1.0)) throw UsageError("quantile level must lie in (0,1), got " + std::to_string(v));
  const auto& x = d.sorted();
  const double h = static_cast<double>(x.size() - 1) * v;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= x.size()) return x.back();
  return x[lo] + (h - static_cast<double>(lo)) * (x[lo + 1] - x[lo]);
}

inline std::vector<double> empirical_quantiles(const EmpiricalDistribution& d, std::span<const double> levels) {
  std::vector<double> q;
  q.reserve(levels.size());
  for (double v : levels) q.push_back(empirical_quantile(d, v));
  return q;
}

// ---------------------------------------------------------------------------
// Squared 2-Wasserstein

inline constexpr int kW2Nodes = 2000;
inline constexpr double kW2TailClip = 5e-4;

/// Midpoint nodes (k + 1/2)/K, clipped into [5e-4, 1 - 5e-4]; each carries
/// weight 1/K.
inline const std::vector<double>& w2_levels() {
  static const std::vector<double> levels = [] {
    std::vector<double> v(kW2Nodes);
    for (int k = 0; k < kW2Nodes; ++k)
      v[k] = std::clamp((k + 0.5) / kW2Nodes, kW2TailClip, 1.0 - kW2TailClip);
    return v;
  }();
  return levels;
}

/// Squared W2 from two quantile functions tabulated at w2_levels().
inline double w2_squared(std::span<const double> qa, std::span<const double> qb) {
  if (qa.size() != static_cast<std::size_t>(kW2Nodes) || qb.size() != qa.size())
    throw ShapeError("w2_squared expects quantiles at the 2000 standard levels");
  double s = 0.0;
  for (std::size_t k = 0; k < qa.size(); ++k) {
    if (!std::isfinite(qa[k]) || !std::isfinite(qb[k])) throw MetricError("non-finite quantile value in W2");
    const double d = qa[k] - qb[k];
    s += d * d;
  }
  return s / kW2Nodes;
}

inline double w2_squared(const std::function<double(double)>& qa, const std::function<double(double)>& qb) {
  std::vector<double> a, b;
  a.reserve(kW2Nodes);
  b.reserve(kW2Nodes);
  for (double v : w2_levels()) {
    a.push_back(qa(v));
    b.push_back(qb(v));
  }
  return w2_squared(a, b);
}

// ---------------------------------------------------------------------------
// Kernel density smoothing on a grid

/// Gaussian mixture sum_i w_i N(y; c_i, h^2) tabulated on a uniform grid by
/// linear binning of the centres followed by a truncated discrete
/// convolution. Weights need not be normalised.
class BinnedGaussianSmoother {
 public:
  BinnedGaussianSmoother(std::span<const double> centres, std::span<const double> weights, double bandwidth,
                         std::size_t max_points = 16384)
      : h_(bandwidth) {
    if (!(bandwidth > 0.0)) throw MetricError("KDE bandwidth must be positive");
    if (centres.empty() || centres.size() != weights.size()) throw ShapeError("KDE centres/weights mismatch");
    const auto [mn, mx] = std::minmax_element(centres.begin(), centres.end());
    lo_ = *mn - 6.0 * h_;
    const double hi = *mx + 6.0 * h_;
    const std::size_t want = static_cast<std::size_t>(std::ceil((hi - lo_) / (h_ / 8.0))) + 1;
    const std::size_t n = std::clamp<std::size_t>(want, 64, max_points);
    dy_ = (hi - lo_) / static_cast<double>(n - 1);
    std::vector<double> bins(n, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < centres.size(); ++i) {
      const double pos = (centres[i] - lo_) / dy_;
      const std::size_t b = std::min(static_cast<std::size_t>(pos), n - 2);
      const double frac = pos - static_cast<double>(b);
      bins[b] += weights[i] * (1.0 - frac);
      bins[b + 1] += weights[i] * frac;
      total += weights[i];
    }
    if (!(total > 0.0)) throw MetricError("KDE weights sum to zero");
    const std::size_t taps = std::min(n - 1, static_cast<std::size_t>(std::ceil(6.0 * h_ / dy_)));
    std::vector<double> kernel(taps + 1);
    for (std::size_t t = 0; t <= taps; ++t) kernel[t] = normal_pdf(static_cast<double>(t) * dy_, 0.0, h_);
    density_.assign(n, 0.0);
    for (std::size_t b = 0; b < n; ++b) {
      if (bins[b] == 0.0) continue;
      const double w = bins[b] / total;
      const std::size_t a = b >= taps ? b - taps : 0;
      const std::size_t e = std::min(n - 1, b + taps);
      for (std::size_t g = a; g <= e; ++g) density_[g] += w * kernel[g > b ? g - b : b - g];
    }
  }

  /// Density by linear interpolation; zero outside the grid.
  double pdf(double y) const {
    const double pos = (y - lo_) / dy_;
    if (pos < 0.0 || pos > static_cast<double>(density_.size() - 1)) return 0.0;
    const std::size_t b = std::min(static_cast<std::size_t>(pos), density_.size() - 2);
    const double frac = pos - static_cast<double>(b);
    return density_[b] * (1.0 - frac) + density_[b + 1] * frac;
  }

  /// Quantiles at ascending levels from the trapezoid-integrated CDF.
  std::vector<double> quantiles(std::span<const double> levels) const {
    const std::size_t n = density_.size();
    std::vector<double> cdf(n, 0.0);
    for (std::size_t g = 1; g < n; ++g) cdf[g] = cdf[g - 1] + 0.5 * (density_[g - 1] + density_[g]) * dy_;
    const double total = cdf.back();
    std::vector<double> q;
    q.reserve(levels.size());
    std::size_t g = 1;
    for (double v : levels) {
      const double target = v * total;
      while (g < n - 1 && cdf[g] < target) ++g;
      const double span = cdf[g] - cdf[g - 1];
      const double frac = span > 0.0 ? std::clamp((target - cdf[g - 1]) / span, 0.0, 1.0) : 0.5;
      q.push_back(lo_ + (static_cast<double>(g - 1) + frac) * dy_);
    }
    return q;
  }

  double bandwidth() const { return h_; }

 private:
  double h_;
  double lo_ = 0.0;
  double dy_ = 1.0;
  std::vector<double> density_;
};

/// Silverman's rule, 0.9 min(sd, IQR/1.34) n^(-1/5); falls back to sd when
/// the IQR vanishes.
inline double silverman_bandwidth(const EmpiricalDistribution& d) {
  const double sd = std::sqrt(d.variance());
  const double iqr = empirical_quantile(d, 0.75) - empirical_quantile(d, 0.25);
  double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  if (!(spread > 0.0)) throw MetricError("degenerate reference distribution (zero spread)");
  return 0.9 * spread * std::pow(static_cast<double>(d.size()), -0.2);
}

inline BinnedGaussianSmoother reference_kde(const EmpiricalDistribution& d) {
  const std::vector<double> w(d.size(), 1.0);
  return BinnedGaussianSmoother(d.sorted(), w, silverman_bandwidth(d));
}

inline constexpr double kDensityClamp = 1e-300;

/// KL(reference || model) ~ mean over reference samples of
/// log(kde(y) / model_pdf(y)), both densities clamped at 1e-300.
inline double kl_divergence(const EmpiricalDistribution& reference, const std::function<double(double)>& model_pdf) {
  const BinnedGaussianSmoother kde = reference_kde(reference);
  double s = 0.0;
  for (double y : reference.sorted()) {
    const double p = std::max(kde.pdf(y), kDensityClamp);
    const double q = std::max(model_pdf(y), kDensityClamp);
    if (!std::isfinite(q)) throw MetricError("non-finite model density in KL");
    s += std::log(p) - std::log(q);
  }
  return s / static_cast<double>(reference.size());
}

inline double relative_l1(std::span<const double> reference, std::span<const double> predicted) {
  if (reference.size() != predicted.size()) throw ShapeError("relative_l1 fields differ in size");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    num += std::abs(reference[i] - predicted[i]);
    den += std::abs(reference[i]);
  }
  if (!(den > 0.0)) throw MetricError("relative_l1 reference field has zero norm");
  return num / den;
}

// ---------------------------------------------------------------------------
// Conditional densities under evaluation

class ConditionalDensity {
 public:
  virtual ~ConditionalDensity() = default;
  virtual double pdf(double y) const = 0;
  /// Quantiles at ascending levels in (0,1).
  virtual std::vector<double> quantiles(std::span<const double> levels) const = 0;
  virtual double mean() const = 0;
  virtual double variance() const = 0;
};

class MixtureConditional final : public ConditionalDensity {
 public:
  explicit MixtureConditional(MixtureParams p) : p_(std::move(p)) {}
  double pdf(double y) const override { return mixture_pdf(p_, y); }
  std::vector<double> quantiles(std::span<const double> levels) const override { return mixture_quantiles(p_, levels); }
  double mean() const override { return mixture_mean(p_); }
  double variance() const override { return mixture_variance(p_); }
  const MixtureParams& params() const { return p_; }

 private:
  MixtureParams p_;
};

class EmpiricalConditional final : public ConditionalDensity {
 public:
  explicit EmpiricalConditional(EmpiricalDistribution d) : d_(std::move(d)), kde_(reference_kde(d_)) {}
  double pdf(double y) const override { return kde_.pdf(y); }
  std::vector<double> quantiles(std::span<const double> levels) const override {
    return empirical_quantiles(d_, levels);
  }
  double mean() const override { return d_.mean(); }
  double variance() const override { return d_.variance(); }

 private:
  EmpiricalDistribution d_;
  BinnedGaussianSmoother kde_;
};

}  // namespace mdnomad
