#pragma once

// Replication-based experimental design: N unique parameter draws, each run
// R times by the simulator.

#include <json.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mdnomad/error.hpp"
#include "mdnomad/random.hpp"

namespace mdnomad {

enum class Family { kUniform, kBeta };

/// One scalar parameter: Uniform(lo, hi), or lo + (hi - lo) * Beta(alpha, beta).
struct ParameterLaw {
  std::string name;
  Family family = Family::kUniform;
  double lo = 0.0;
  double hi = 1.0;
  double alpha = 1.0;
  double beta = 1.0;

  void validate() const {
    if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi)) throw ConfigError("parameter '" + name + "' needs lo < hi");
    if (family == Family::kBeta && !(alpha > 0.0 && beta > 0.0))
      throw ConfigError("parameter '" + name + "' needs positive Beta shape parameters");
  }

  double mean() const {
    if (family == Family::kUniform) return 0.5 * (lo + hi);
    return lo + (hi - lo) * alpha / (alpha + beta);
  }
};

inline void to_json(nlohmann::json& j, const ParameterLaw& p) {
  j = {{"name", p.name}, {"family", p.family == Family::kUniform ? "uniform" : "beta"}, {"lo", p.lo}, {"hi", p.hi}};
  if (p.family == Family::kBeta) {
    j["alpha"] = p.alpha;
    j["beta"] = p.beta;
  }
}

namespace detail {

// Marsaglia-Tsang; shape < 1 handled by the usual u^(1/shape) boost.
inline double sample_gamma(double shape, Rng& rng, StandardNormal& normal) {
  if (shape < 1.0) {
    double u = 0.0;
    do {
      u = uniform01(rng);
    } while (u <= 0.0);
    return sample_gamma(shape + 1.0, rng, normal) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform01(rng);
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

}  // namespace detail

inline double sample_parameter(const ParameterLaw& p, Rng& rng, StandardNormal& normal) {
  if (p.family == Family::kUniform) return uniform(rng, p.lo, p.hi);
  const double a = detail::sample_gamma(p.alpha, rng, normal);
  const double b = detail::sample_gamma(p.beta, rng, normal);
  return p.lo + (p.hi - p.lo) * a / (a + b);
}

struct ExperimentalDesign {
  std::vector<std::vector<double>> realizations;  // N parameter vectors
  int replications = 1;                           // R
  std::vector<ParameterLaw> laws;
  std::uint64_t seed = 0;

  std::size_t size() const { return realizations.size() * static_cast<std::size_t>(replications); }
  /// Design point p runs realization p / R.
  const std::vector<double>& parameters_of(std::size_t point) const {
    return realizations[point / static_cast<std::size_t>(replications)];
  }
};

inline ExperimentalDesign make_design(const std::vector<ParameterLaw>& laws, int n_realizations, int n_replications,
                                      std::uint64_t seed) {
  if (n_realizations < 1 || n_replications < 1) throw ConfigError("design counts must be positive");
  if (laws.empty()) throw ConfigError("design needs at least one parameter law");
  for (const auto& l : laws) l.validate();
  ExperimentalDesign d;
  d.replications = n_replications;
  d.laws = laws;
  d.seed = seed;
  Rng rng(derive_seed(seed, 0xde5));
  StandardNormal normal;
  for (int i = 0; i < n_realizations; ++i) {
    std::vector<double> v;
    for (const auto& l : laws) v.push_back(sample_parameter(l, rng, normal));
    d.realizations.push_back(std::move(v));
  }
  return d;
}

/// Design built from explicit parameter vectors (held-out test parameters).
inline ExperimentalDesign fixed_design(std::vector<std::vector<double>> params, int n_replications,
                                       std::uint64_t seed) {
  if (params.empty() || n_replications < 1) throw ConfigError("fixed design needs parameters and replications");
  ExperimentalDesign d;
  d.realizations = std::move(params);
  d.replications = n_replications;
  d.seed = seed;
  return d;
}

}  // namespace mdnomad
