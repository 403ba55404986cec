#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "mdnomad/dataset.hpp"
#include "mdnomad/error.hpp"
#include "mdnomad/model.hpp"
#include "mdnomad/nn.hpp"
#include "mdnomad/random.hpp"

namespace mdnomad {

struct TrainConfig {
  int epochs = 300;
  int batch_size = 512;
  AdamHyper adam{};
  int lr_decay_every = 100;  // epochs; 0 disables the step schedule
  double lr_decay_factor = 0.5;
  double train_fraction = 0.9;
  std::uint64_t shuffle_seed = 0;
  int report_every = 0;  // epochs between progress callbacks; 0 = never
  LossReduction reduction = LossReduction::kSum;

  void validate(std::size_t dataset_rows) const {
    if (epochs < 1) throw ConfigError("train.epochs must be positive");
    if (batch_size < 1) throw ConfigError("train.batch_size must be positive");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train.train_fraction must lie in (0,1)");
    if (static_cast<std::size_t>(batch_size) > dataset_rows)
      throw ConfigError("train.batch_size exceeds dataset size");
    if (lr_decay_every < 0 || !(lr_decay_factor > 0.0)) throw ConfigError("train learning-rate schedule invalid");
    check_adam_hyper(adam);
  }
};

struct TrainingHistory {
  std::vector<double> train_nll;       // mean per-sample NLL, one entry per epoch
  std::vector<double> validation_nll;  // mean per-sample NLL, one entry per epoch
  double initial_validation_nll = 0.0;
  int best_epoch = 0;  // 0 = the initial model was never improved upon
  double best_validation_nll = 0.0;
};

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
  SurrogateModel model;        // best validation NLL
  SurrogateModel final_model;  // after the last epoch
  std::string problem;
  TrainingHistory history;
  nlohmann::json config_echo = nlohmann::json::object();
  int format_version = kCheckpointFormatVersion;
};

struct EpochReport {
  int epoch;
  double train_nll;
  double validation_nll;
};

namespace detail {

struct BatchBuffers {
  Matrix branch;
  Matrix decoder;
  std::vector<double> targets;
};

inline void gather(const Dataset& d, std::span<const std::size_t> rows, const SurrogateModel& m, BatchBuffers& buf) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  buf.branch.resize(static_cast<Eigen::Index>(d.branch_width()), n);
  buf.decoder.resize(static_cast<Eigen::Index>(d.decoder_width()), n);
  buf.targets.resize(rows.size());
  for (Eigen::Index c = 0; c < n; ++c) {
    auto r = d.row(rows[c]);
    for (std::size_t j = 0; j < d.branch_width(); ++j) buf.branch(j, c) = r[j];
    for (std::size_t j = 0; j < d.decoder_width(); ++j) buf.decoder(j, c) = r[d.branch_width() + j];
    buf.targets[c] = r.back();
  }
  scale_batch(m, buf.branch, buf.decoder);
}

inline double mean_nll(const SurrogateModel& m, const Dataset& d, std::span<const std::size_t> rows) {
  constexpr std::size_t kChunk = 4096;
  BatchBuffers buf;
  double total = 0.0;
  for (std::size_t s = 0; s < rows.size(); s += kChunk) {
    auto chunk = rows.subspan(s, std::min(kChunk, rows.size() - s));
    gather(d, chunk, m, buf);
    const Matrix raw = model_raw_batch(m, buf.branch, buf.decoder);
    if (!raw.allFinite()) return INFINITY;
    total += nll_loss(raw, buf.targets, LossReduction::kSum).loss;
  }
  return total / static_cast<double>(rows.size());
}

inline std::ptrdiff_t first_non_finite_layer(const Gradients& g) {
  for (std::size_t k = 0; k < g.weights.size(); ++k)
    if (!g.weights[k].allFinite() || !g.biases[k].allFinite()) return static_cast<std::ptrdiff_t>(k);
  return -1;
}

}  // namespace detail

/// Fits min-max input scaling on the given rows.
inline void fit_input_scaling(SurrogateModel& m, const Dataset& d, std::span<const std::size_t> rows) {
  auto fit = [&](std::size_t width, auto value) {
    std::vector<double> lo(width, INFINITY), hi(width, -INFINITY);
    for (std::size_t r : rows)
      for (std::size_t j = 0; j < width; ++j) {
        lo[j] = std::min(lo[j], value(r, j));
        hi[j] = std::max(hi[j], value(r, j));
      }
    return InputScaling::fit_min_max(lo, hi);
  };
  m.branch_scaling = fit(d.branch_width(), [&](std::size_t r, std::size_t j) { return d.branch(r, j); });
  m.decoder_scaling = fit(d.decoder_width(), [&](std::size_t r, std::size_t j) { return d.decoder(r, j); });
}

/// Random train/validation split of row indices, deterministic in `seed`.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_rows(std::size_t n, double train_fraction,
                                                                                std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x5917));
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng() % i)]);
  std::size_t n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> valid(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  return {std::move(train), std::move(valid)};
}

/// Adam on shuffled mini-batches of the summed (or mean) NLL. Fits input
/// scaling on the training split, records per-epoch train/validation NLL and
/// returns the best-validation model alongside the final one.
inline Checkpoint train(SurrogateModel model, const Dataset& data, const TrainConfig& config,
                        const std::function<void(const EpochReport&)>& on_report = {}) {
  if (data.rows() < 2) throw UsageError("train: dataset needs at least two rows");
  if (data.branch_width() != static_cast<std::size_t>(model.branch_input_width()) ||
      data.decoder_width() != static_cast<std::size_t>(model.decoder_input_width()))
    throw ShapeError("dataset columns do not match model input widths");
  config.validate(data.rows());

  auto [train_rows, valid_rows] = split_rows(data.rows(), config.train_fraction, config.shuffle_seed);
  if (static_cast<std::size_t>(config.batch_size) > train_rows.size())
    throw ConfigError("train.batch_size exceeds training split size");
  fit_input_scaling(model, data, train_rows);
  model.validate();

  AdamState branch_opt = AdamState::for_params(model.branch, config.adam);
  AdamState decoder_opt = AdamState::for_params(model.decoder, config.adam);

  Checkpoint ckpt;
  ckpt.history.initial_validation_nll = detail::mean_nll(model, data, valid_rows);
  ckpt.history.best_validation_nll = ckpt.history.initial_validation_nll;
  ckpt.model = model;

  Rng shuffle(derive_seed(config.shuffle_seed, 0xb47c));
  detail::BatchBuffers buf;
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.lr_decay_every > 0) {
      const int drops = (epoch - 1) / config.lr_decay_every;
      const double lr = config.adam.learning_rate * std::pow(config.lr_decay_factor, drops);
      branch_opt.hyper.learning_rate = lr;
      decoder_opt.hyper.learning_rate = lr;
    }
    for (std::size_t i = train_rows.size(); i > 1; --i)
      std::swap(train_rows[i - 1], train_rows[static_cast<std::size_t>(shuffle() % i)]);

    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < train_rows.size(); start += bs, ++batch_index) {
      const std::size_t len = std::min(bs, train_rows.size() - start);
      std::span<const std::size_t> rows(train_rows.data() + start, len);
      detail::gather(data, rows, model, buf);
      BatchPass pass;
      const std::string where = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index);
      try {
        pass = model_nll_batch(model, buf.branch, buf.decoder, buf.targets, config.reduction);
      } catch (const InvalidOutputError& e) {
        // Non-finite head output: blame the first non-finite parameter layer.
        if (auto k = detail::first_non_finite_layer(model.branch.arrays); k >= 0)
          throw DivergenceError(where + ", branch", k, e.what());
        throw DivergenceError(where + ", decoder", detail::first_non_finite_layer(model.decoder.arrays), e.what());
      }
      if (!std::isfinite(pass.loss)) throw DivergenceError(where + ", loss", -1, "non-finite loss");
      if (auto k = detail::first_non_finite_layer(pass.gradients.decoder); k >= 0)
        throw DivergenceError(where + ", decoder", k, "non-finite gradient");
      if (auto k = detail::first_non_finite_layer(pass.gradients.branch); k >= 0)
        throw DivergenceError(where + ", branch", k, "non-finite gradient");
      adam_update(model.decoder, pass.gradients.decoder, decoder_opt);
      adam_update(model.branch, pass.gradients.branch, branch_opt);
      epoch_loss += config.reduction == LossReduction::kSum ? pass.loss : pass.loss * static_cast<double>(len);
    }
    const double train_nll = epoch_loss / static_cast<double>(train_rows.size());
    const double valid_nll = detail::mean_nll(model, data, valid_rows);
    if (!std::isfinite(valid_nll)) throw DivergenceError("epoch " + std::to_string(epoch) + ", validation", -1, "non-finite validation NLL");
    ckpt.history.train_nll.push_back(train_nll);
    ckpt.history.validation_nll.push_back(valid_nll);
    if (valid_nll < ckpt.history.best_validation_nll) {
      ckpt.history.best_validation_nll = valid_nll;
      ckpt.history.best_epoch = epoch;
      ckpt.model = model;
    }
    if (on_report && config.report_every > 0 && (epoch % config.report_every == 0 || epoch == config.epochs))
      on_report(EpochReport{epoch, train_nll, valid_nll});
  }
  ckpt.final_model = std::move(model);
  return ckpt;
}

}  // namespace mdnomad
