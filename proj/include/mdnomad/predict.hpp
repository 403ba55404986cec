#pragma once

// One-shot prediction: a single forward pass per query, then closed-form
// mixture evaluation. Nothing here samples.

#include <cmath>
#include <span>
#include <vector>

#include "mdnomad/mixture.hpp"
#include "mdnomad/model.hpp"

namespace mdnomad {

inline std::vector<double> predict_pdf(const SurrogateModel& m, std::span<const double> branch_input,
                                       std::span<const double> decoder_input, std::span<const double> y_grid) {
  const MixtureParams p = model_forward(m, branch_input, decoder_input);
  std::vector<double> out;
  out.reserve(y_grid.size());
  for (double y : y_grid) {
    if (!std::isfinite(y)) throw UsageError("non-finite y grid value");
    out.push_back(mixture_pdf(p, y));
  }
  return out;
}

struct StatisticFields {
  std::vector<double> mean;
  std::vector<double> std;
};

/// Mean and standard deviation at every column of `decoder_grid`.
inline StatisticFields predict_statistics(const SurrogateModel& m, std::span<const double> branch_input,
                                          const Matrix& decoder_grid) {
  StatisticFields f;
  for (const auto& p : model_forward_grid(m, branch_input, decoder_grid)) {
    f.mean.push_back(mixture_mean(p));
    f.std.push_back(std::sqrt(mixture_variance(p)));
  }
  return f;
}

}  // namespace mdnomad
