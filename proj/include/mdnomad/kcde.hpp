#pragma once

// Kernel conditional density estimation baseline: Nadaraya-Watson ratio of
// Gaussian product kernels, bandwidths picked by validation NLL.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "mdnomad/dataset.hpp"
#include "mdnomad/error.hpp"
#include "mdnomad/metrics.hpp"
#include "mdnomad/random.hpp"

namespace mdnomad {

struct KcdeModel {
  Matrix inputs;  // d x n, columns are training inputs (branch then decoder features)
  std::vector<double> targets;
  std::vector<double> input_bandwidths;
  double target_bandwidth = 1.0;
  double selection_nll = 0.0;  // validation NLL at the selected bandwidths

  std::size_t dims() const { return static_cast<std::size_t>(inputs.rows()); }
  std::size_t size() const { return targets.size(); }

  void validate() const {
    if (targets.empty() || inputs.cols() != static_cast<Eigen::Index>(targets.size()))
      throw UsageError("KCDE needs a non-empty training set");
    if (input_bandwidths.size() != dims()) throw ShapeError("KCDE bandwidth count does not match input width");
    for (double h : input_bandwidths)
      if (!(h > 0.0)) throw UsageError("KCDE bandwidths must be positive");
    if (!(target_bandwidth > 0.0)) throw UsageError("KCDE bandwidths must be positive");
  }
};

/// Conditional density at one input: a Gaussian mixture over training
/// targets with Nadaraya-Watson weights.
class KcdeConditional final : public ConditionalDensity {
 public:
  KcdeConditional(std::vector<double> centres, std::vector<double> weights, double h, bool fallback)
      : centres_(std::move(centres)), weights_(std::move(weights)), h_(h), fallback_(fallback) {}

  double pdf(double y) const override {
    double s = 0.0;
    for (std::size_t i = 0; i < centres_.size(); ++i) s += weights_[i] * normal_pdf(y, centres_[i], h_);
    return s;
  }
  std::vector<double> quantiles(std::span<const double> levels) const override {
    return BinnedGaussianSmoother(centres_, weights_, h_).quantiles(levels);
  }
  double mean() const override {
    double m = 0.0;
    for (std::size_t i = 0; i < centres_.size(); ++i) m += weights_[i] * centres_[i];
    return m;
  }
  double variance() const override {
    const double m = mean();
    double v = 0.0;
    for (std::size_t i = 0; i < centres_.size(); ++i) v += weights_[i] * (h_ * h_ + (centres_[i] - m) * (centres_[i] - m));
    return v;
  }
  /// True when every input-kernel weight underflowed and uniform weights were used.
  bool fallback() const { return fallback_; }
  std::size_t active_components() const { return centres_.size(); }

 private:
  std::vector<double> centres_;
  std::vector<double> weights_;
  double h_;
  bool fallback_;
};

namespace detail {

// log of the unnormalised product input kernel for every training column.
inline Eigen::ArrayXd kcde_log_kernel(const Matrix& inputs, std::span<const double> x, std::span<const double> h) {
  Eigen::ArrayXd lw = Eigen::ArrayXd::Zero(inputs.cols());
  for (Eigen::Index d = 0; d < inputs.rows(); ++d) {
    const double inv = 1.0 / h[static_cast<std::size_t>(d)];
    lw -= 0.5 * ((inputs.row(d).array() - x[static_cast<std::size_t>(d)]) * inv).square().transpose();
  }
  return lw;
}

// Raw product-kernel values below this underflow in double precision.
inline constexpr double kUnderflowLog = -745.0;

}  // namespace detail

inline KcdeConditional kcde_conditional(const KcdeModel& m, std::span<const double> x) {
  if (x.size() != m.dims()) throw ShapeError("KCDE query width mismatch");
  const Eigen::ArrayXd lw = detail::kcde_log_kernel(m.inputs, x, m.input_bandwidths);
  const double top = lw.maxCoeff();
  const bool fallback = top < detail::kUnderflowLog;
  std::vector<double> c, w;
  if (fallback) {
    c = m.targets;
    w.assign(m.targets.size(), 1.0 / static_cast<double>(m.targets.size()));
  } else {
    double total = 0.0;
    for (Eigen::Index i = 0; i < lw.size(); ++i) {
      const double r = lw(i) - top;
      if (r < -32.0) continue;  // relative weight below 1.3e-14
      const double e = std::exp(r);
      c.push_back(m.targets[static_cast<std::size_t>(i)]);
      w.push_back(e);
      total += e;
    }
    for (double& v : w) v /= total;
  }
  return KcdeConditional(std::move(c), std::move(w), m.target_bandwidth, fallback);
}

inline double kcde_pdf(const KcdeModel& m, std::span<const double> x, double y) { return kcde_conditional(m, x).pdf(y); }

struct KcdeFitOptions {
  int grid_points = 10;            // per dimension, log-spaced over [lo, hi] x std
  double grid_lo = 0.01;
  double grid_hi = 1.0;
  double validation_fraction = 0.1;
  std::size_t max_search_train = 8000;
  std::size_t max_validation = 400;
  int sweeps = 3;
  std::uint64_t seed = 0;
};

namespace detail {

inline double kcde_validation_nll(const Matrix& tr_x, const std::vector<double>& tr_y, const Matrix& va_x,
                                  const std::vector<double>& va_y, const std::vector<double>& hx, double hy) {
  const Eigen::Map<const Eigen::ArrayXd> ty(tr_y.data(), static_cast<Eigen::Index>(tr_y.size()));
  double nll = 0.0;
  std::vector<double> x(static_cast<std::size_t>(va_x.rows()));
  for (Eigen::Index v = 0; v < va_x.cols(); ++v) {
    for (Eigen::Index d = 0; d < va_x.rows(); ++d) x[static_cast<std::size_t>(d)] = va_x(d, v);
    const Eigen::ArrayXd lw = kcde_log_kernel(tr_x, x, hx);
    const Eigen::ArrayXd ly = -0.5 * ((ty - va_y[static_cast<std::size_t>(v)]) / hy).square();
    const double a = lw.maxCoeff();
    const Eigen::ArrayXd joint = lw + ly;
    const double b = joint.maxCoeff();
    const double log_den = a + std::log((lw - a).exp().sum());
    const double log_num = b + std::log((joint - b).exp().sum());
    nll -= log_num - log_den - std::log(hy) - kLogSqrtTwoPi;
  }
  return nll / static_cast<double>(va_x.cols());
}

}  // namespace detail

/// Inputs are all branch and decoder columns. Validation rows are whole
/// realizations (rows sharing a branch-input vector), so the search never
/// sees the held-out parameters. The grid is searched by coordinate descent
/// on subsamples, and the selected bandwidths are shrunk by
/// (n_search / n_train)^(1/(d+5)) before fitting on the full training split.
inline KcdeModel kcde_fit(const Dataset& data, const KcdeFitOptions& opt = {}) {
  if (data.rows() < 2) throw UsageError("KCDE needs at least two training rows");
  if (opt.grid_points < 1 || !(opt.grid_lo > 0.0) || !(opt.grid_hi >= opt.grid_lo))
    throw ConfigError("kcde bandwidth grid invalid");
  const std::size_t d = data.branch_width() + data.decoder_width();
  const std::size_t nrows = data.rows();

  // Group rows by realization.
  std::map<std::vector<double>, std::vector<std::size_t>> groups;
  for (std::size_t r = 0; r < nrows; ++r) {
    auto row = data.row(r);
    groups[std::vector<double>(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(data.branch_width()))]
        .push_back(r);
  }
  std::vector<const std::vector<std::size_t>*> order;
  for (const auto& [k, v] : groups) order.push_back(&v);
  Rng rng(derive_seed(opt.seed, 0xcde));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
  std::size_t n_val_groups = static_cast<std::size_t>(std::llround(opt.validation_fraction * order.size()));
  n_val_groups = std::clamp<std::size_t>(n_val_groups, 1, std::max<std::size_t>(1, order.size() - 1));
  std::vector<std::size_t> train_rows, val_rows;
  for (std::size_t g = 0; g < order.size(); ++g) {
    auto& dst = (order.size() > 1 && g < n_val_groups) ? val_rows : train_rows;
    dst.insert(dst.end(), order[g]->begin(), order[g]->end());
  }
  if (val_rows.empty()) {  // a single realization: fall back to a row split
    const std::size_t k = std::max<std::size_t>(1, train_rows.size() / 10);
    val_rows.assign(train_rows.end() - static_cast<std::ptrdiff_t>(k), train_rows.end());
    train_rows.resize(train_rows.size() - k);
  }
  std::sort(train_rows.begin(), train_rows.end());

  auto pick = [&](std::vector<std::size_t> rows, std::size_t cap) {
    if (rows.size() <= cap) return rows;
    for (std::size_t i = 0; i < cap; ++i) std::swap(rows[i], rows[i + static_cast<std::size_t>(rng() % (rows.size() - i))]);
    rows.resize(cap);
    std::sort(rows.begin(), rows.end());
    return rows;
  };
  auto to_matrix = [&](const std::vector<std::size_t>& rows, Matrix& x, std::vector<double>& y) {
    x.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(rows.size()));
    y.resize(rows.size());
    for (std::size_t c = 0; c < rows.size(); ++c) {
      auto row = data.row(rows[c]);
      for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)) = row[j];
      y[c] = row.back();
    }
  };

  KcdeModel model;
  to_matrix(train_rows, model.inputs, model.targets);
  Matrix sx, vx;
  std::vector<double> sy, vy;
  const auto search_rows = pick(train_rows, opt.max_search_train);
  to_matrix(search_rows, sx, sy);
  to_matrix(pick(val_rows, opt.max_validation), vx, vy);

  // Candidate grids; a constant column gets a single unit bandwidth.
  auto std_of = [](auto values) {
    const double n = static_cast<double>(values.size());
    const double mean = values.sum() / n;
    return std::sqrt((values - mean).square().sum() / std::max(1.0, n - 1.0));
  };
  std::vector<std::vector<double>> grids(d + 1);
  for (std::size_t j = 0; j <= d; ++j) {
    const double sd = j < d ? std_of(model.inputs.row(static_cast<Eigen::Index>(j)).array())
                            : std_of(Eigen::Map<const Eigen::ArrayXd>(model.targets.data(),
                                                                     static_cast<Eigen::Index>(model.targets.size())));
    if (!(sd > 0.0) && j == d) throw DegenerateKernelError("KCDE targets have zero spread");
    if (!(sd > 0.0)) {
      grids[j] = {1.0};
      continue;
    }
    for (int k = 0; k < opt.grid_points; ++k) {
      const double t = opt.grid_points == 1 ? 0.0 : double(k) / (opt.grid_points - 1);
      grids[j].push_back(sd * opt.grid_lo * std::pow(opt.grid_hi / opt.grid_lo, t));
    }
  }
  std::vector<std::size_t> idx(d + 1);
  for (std::size_t j = 0; j <= d; ++j) idx[j] = grids[j].size() / 2;
  auto evaluate = [&](const std::vector<std::size_t>& at) {
    std::vector<double> hx(d);
    for (std::size_t j = 0; j < d; ++j) hx[j] = grids[j][at[j]];
    return detail::kcde_validation_nll(sx, sy, vx, vy, hx, grids[d][at[d]]);
  };
  double best = evaluate(idx);
  for (int sweep = 0; sweep < opt.sweeps; ++sweep) {
    bool moved = false;
    for (std::size_t j = 0; j <= d; ++j) {
      for (std::size_t k = 0; k < grids[j].size(); ++k) {
        if (k == idx[j]) continue;
        auto trial = idx;
        trial[j] = k;
        const double v = evaluate(trial);
        if (v < best) {
          best = v;
          idx = trial;
          moved = true;
        }
      }
    }
    if (!moved) break;
  }
  const double shrink = std::pow(static_cast<double>(search_rows.size()) / static_cast<double>(train_rows.size()),
                                 1.0 / (static_cast<double>(d) + 5.0));
  for (std::size_t j = 0; j < d; ++j) model.input_bandwidths.push_back(grids[j][idx[j]] * (grids[j].size() > 1 ? shrink : 1.0));
  model.target_bandwidth = grids[d][idx[d]] * shrink;
  model.selection_nll = best;
  model.validate();
  return model;
}

}  // namespace mdnomad
