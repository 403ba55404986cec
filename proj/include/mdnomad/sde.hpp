#pragma once

// Euler-Maruyama integration of diagonal-noise SDEs, plus the stochastic
// Van der Pol oscillator and the N-component stochastic Lorenz-96 system.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mdnomad/error.hpp"
#include "mdnomad/random.hpp"

namespace mdnomad {

/// Time-major states: states[k * dim + i] is component i at times[k].
struct Trajectory {
  std::size_t dim = 0;
  std::vector<double> times;
  std::vector<double> states;

  std::size_t length() const { return times.size(); }
  double at(std::size_t k, std::size_t i) const { return states[k * dim + i]; }
  std::span<const double> state(std::size_t k) const { return {states.data() + k * dim, dim}; }
};

inline std::size_t step_count(double dt, double t_end) {
  if (!(dt > 0.0) || !(t_end > 0.0)) throw ConfigError("dt and T must be positive");
  const double ratio = t_end / dt;
  const double n = std::round(ratio);
  if (std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio)) throw ConfigError("dt must divide T");
  return static_cast<std::size_t>(n);
}

/// X_{k+1} = X_k + f(X_k) dt + g(X_k) sqrt(dt) xi_k, xi_k ~ N(0, I), with
/// `drift(x, out)` and `diffusion(x, out)` writing f and the diagonal of g and
/// `noise()` supplying each xi. Records t = 0 and every `record_every`-th step.
template <typename Drift, typename Diffusion, typename Noise>
Trajectory euler_maruyama_with(Drift&& drift, Diffusion&& diffusion, std::vector<double> x0, double dt, double t_end,
                               Noise&& noise, std::size_t record_every = 1,
                               const std::string& name = "euler_maruyama") {
  if (record_every == 0) throw ConfigError("record_every must be positive");
  const std::size_t steps = step_count(dt, t_end);
  const std::size_t dim = x0.size();
  Trajectory tr;
  tr.dim = dim;
  tr.times.reserve(steps / record_every + 1);
  tr.states.reserve((steps / record_every + 1) * dim);
  auto record = [&](std::size_t k, const std::vector<double>& x) {
    tr.times.push_back(static_cast<double>(k) * dt);
    tr.states.insert(tr.states.end(), x.begin(), x.end());
  };
  std::vector<double> x = std::move(x0), f(dim), g(dim);
  record(0, x);
  const double sqrt_dt = std::sqrt(dt);
  for (std::size_t k = 1; k <= steps; ++k) {
    drift(std::as_const(x), f);
    diffusion(std::as_const(x), g);
    bool finite = true;
    for (std::size_t i = 0; i < dim; ++i) {
      const double increment = g[i] != 0.0 ? g[i] * sqrt_dt * noise() : 0.0;
      x[i] += f[i] * dt + increment;
      finite = finite && std::isfinite(x[i]);
    }
    if (!finite) throw BlowUpError(name, k);
    if (k % record_every == 0) record(k, x);
  }
  return tr;
}

template <typename Drift, typename Diffusion>
Trajectory euler_maruyama(Drift&& drift, Diffusion&& diffusion, std::vector<double> x0, double dt, double t_end,
                          Rng& rng, std::size_t record_every = 1, const std::string& name = "euler_maruyama") {
  StandardNormal normal;
  return euler_maruyama_with(drift, diffusion, std::move(x0), dt, t_end, [&] { return normal(rng); }, record_every,
                             name);
}

// ---------------------------------------------------------------------------

struct VanDerPolSpec {
  double damping = 1.0;  // mu
  double restoring = 0.0;  // coefficient of a -X drift in dY; 1 gives the classical oscillator
  double x0 = -3.0;
  double y0 = 0.0;
  double t_end = 20.0;
  double dt = 1e-3;
  double output_stride = 0.04;
  bool noise = true;  // false zeroes the lambda^2 X dW term (test fixture)
};

/// dX = Y dt, dY = (mu (1 - X^2) Y - r X) dt + lambda^2 X dW.
inline void vdp_drift(const VanDerPolSpec& s, std::span<const double> x, std::span<double> f) {
  f[0] = x[1];
  f[1] = s.damping * (1.0 - x[0] * x[0]) * x[1] - s.restoring * x[0];
}

/// Noise enters the Y equation only.
inline void vdp_diffusion(const VanDerPolSpec& s, double lambda, std::span<const double> x, std::span<double> g) {
  g[0] = 0.0;
  g[1] = s.noise ? lambda * lambda * x[0] : 0.0;
}

/// X only, sampled every `output_stride` seconds from t = 0.
inline Trajectory simulate_vdp(const VanDerPolSpec& s, double lambda, Rng& rng) {
  const std::size_t stride = step_count(s.dt, s.output_stride);
  auto drift = [&](const std::vector<double>& x, std::vector<double>& f) { vdp_drift(s, x, f); };
  auto diffusion = [&](const std::vector<double>& x, std::vector<double>& g) { vdp_diffusion(s, lambda, x, g); };
  Trajectory full = euler_maruyama(drift, diffusion, {s.x0, s.y0}, s.dt, s.t_end, rng, stride, "van_der_pol");
  Trajectory out;
  out.dim = 1;
  out.times = full.times;
  out.states.reserve(full.length());
  for (std::size_t k = 0; k < full.length(); ++k) out.states.push_back(full.at(k, 0));
  return out;
}

struct Lorenz96Spec {
  int components = 10;  // N
  double forcing = 8.0;  // F
  double t_end = 4.0;
  double dt = 0.04;  // output step
  int substeps = 10;  // Euler-Maruyama steps per output step; explicit EM at 0.04 diverges for F = 8
  double perturbation = 0.01;  // added to component 1 of the X = F initial state
  int time_subsample = 2;

  double integration_dt() const { return dt / substeps; }
};

/// Drift of component i: (X[i+1] - X[i-2]) X[i-1] - X[i] + F, indices cyclic.
inline void lorenz96_drift(std::span<const double> x, double forcing, std::span<double> f) {
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double xp1 = x[(i + 1) % n];
    const double xm1 = x[(i + n - 1) % n];
    const double xm2 = x[(i + n - 2) % n];
    f[i] = (xp1 - xm2) * xm1 - x[i] + forcing;
  }
}

inline Trajectory simulate_lorenz96(const Lorenz96Spec& s, double lambda, Rng& rng) {
  if (s.components < 4) throw ConfigError("Lorenz-96 needs at least 4 components");
  if (s.substeps < 1) throw ConfigError("lorenz96.substeps must be positive");
  std::vector<double> x0(static_cast<std::size_t>(s.components), s.forcing);
  x0[0] += s.perturbation;
  auto drift = [&](const std::vector<double>& x, std::vector<double>& f) { lorenz96_drift(x, s.forcing, f); };
  auto diffusion = [&](const std::vector<double>&, std::vector<double>& g) { std::fill(g.begin(), g.end(), lambda); };
  Trajectory tr = euler_maruyama(drift, diffusion, std::move(x0), s.integration_dt(), s.t_end, rng,
                                 static_cast<std::size_t>(s.substeps), "lorenz96");
  for (std::size_t k = 0; k < tr.times.size(); ++k) tr.times[k] = static_cast<double>(k) * s.dt;
  return tr;
}

}  // namespace mdnomad
