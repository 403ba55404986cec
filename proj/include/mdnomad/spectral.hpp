#pragma once

// Pseudo-spectral Euler-Maruyama solvers for periodic 1-D SPDEs driven by
// space-time white noise: the stochastic heat equation and the stochastic
// viscous Burgers equation.

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "mdnomad/error.hpp"
#include "mdnomad/random.hpp"

namespace mdnomad {

/// Periodic grid x_j = x_min + j * L / N, j = 0..N-1 (right end excluded).
struct PeriodicGrid {
  double x_min = 0.0;
  double length = 1.0;
  int points = 128;

  double spacing() const { return length / points; }
  double x(int j) const { return x_min + j * spacing(); }

  void validate() const {
    if (points < 4 || (points & (points - 1)) != 0) throw ConfigError("spectral grid size must be a power of two >= 4");
    if (!(length > 0.0)) throw ConfigError("spectral domain length must be positive");
  }

  /// Physical wavenumber of FFT bin j (signed; Nyquist kept positive).
  double wavenumber(int j) const {
    const int signed_j = j <= points / 2 ? j : j - points;
    return 2.0 * std::numbers::pi * signed_j / length;
  }
};

namespace detail {

class SpectralWorkspace {
 public:
  explicit SpectralWorkspace(const PeriodicGrid& g) : grid_(g), spectrum_(static_cast<std::size_t>(g.points)) {}

  const std::vector<std::complex<double>>& forward(const std::vector<double>& u) {
    fft_.fwd(spectrum_, u);
    return spectrum_;
  }

  void inverse(std::vector<double>& out, const std::vector<std::complex<double>>& spec) { fft_.inv(out, spec); }

  const PeriodicGrid& grid() const { return grid_; }

 private:
  PeriodicGrid grid_;
  Eigen::FFT<double> fft_;
  std::vector<std::complex<double>> spectrum_;
};

inline void add_white_noise(std::vector<double>& u, double lambda, double dt, double dx, Rng& rng,
                            StandardNormal& normal) {
  if (lambda == 0.0) return;
  const double amp = lambda * std::sqrt(dt / dx);
  for (double& v : u) v += amp * normal(rng);
}

inline void check_finite(const std::vector<double>& u, const char* name, std::size_t step) {
  for (double v : u)
    if (!std::isfinite(v)) throw BlowUpError(name, step);
}

}  // namespace detail

// ---------------------------------------------------------------------------

struct HeatSpec {
  double diffusivity = 0.9;  // alpha
  PeriodicGrid grid{0.0, 20.0, 128};
  double dt = 2.5e-3;
  double t_end = 1.0;
  int space_subsample = 2;
};

/// u(x, 0) = 1 / (1 + exp(-(2 - x) / sqrt 2)).
inline std::vector<double> heat_initial(const HeatSpec& s) {
  std::vector<double> u(static_cast<std::size_t>(s.grid.points));
  for (int j = 0; j < s.grid.points; ++j) u[j] = 1.0 / (1.0 + std::exp(-(2.0 - s.grid.x(j)) / std::numbers::sqrt2));
  return u;
}

/// du = alpha u_xx dt + lambda dW(t, x); returns u(., t_end) on the full grid.
inline std::vector<double> simulate_heat(const HeatSpec& s, double lambda, Rng& rng) {
  s.grid.validate();
  const std::size_t steps = [&] {
    const double n = std::round(s.t_end / s.dt);
    if (!(s.dt > 0.0) || std::abs(n * s.dt - s.t_end) > 1e-9 * s.t_end) throw ConfigError("heat: dt must divide T");
    return static_cast<std::size_t>(n);
  }();
  const int n = s.grid.points;
  std::vector<double> decay(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const double k = s.grid.wavenumber(j);
    decay[j] = -s.diffusivity * k * k;
  }
  detail::SpectralWorkspace ws(s.grid);
  StandardNormal normal;
  std::vector<double> u = heat_initial(s), rhs(static_cast<std::size_t>(n));
  std::vector<std::complex<double>> rhs_hat(static_cast<std::size_t>(n));
  for (std::size_t step = 1; step <= steps; ++step) {
    const auto& uh = ws.forward(u);
    for (int j = 0; j < n; ++j) rhs_hat[j] = decay[j] * uh[j];
    ws.inverse(rhs, rhs_hat);
    for (int j = 0; j < n; ++j) u[j] += s.dt * rhs[j];
    detail::add_white_noise(u, lambda, s.dt, s.grid.spacing(), rng, normal);
    detail::check_finite(u, "heat", step);
  }
  return u;
}

// ---------------------------------------------------------------------------

/// Fourier coefficients of the Burgers initial bump
/// phi(x) = a0 + sum_{k=1,2} a_k sin(2 k pi x) + b_k cos(2 k pi x).
struct BurgersConstants {
  double a0 = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
  double b1 = 0.0;
  double b2 = 0.0;
  double gamma = 0.0;
};

/// Draws a0, a1, a2, b1, b2, gamma ~ U(-1, 1) in that order from `seed`.
inline BurgersConstants draw_burgers_constants(std::uint64_t seed) {
  Rng rng(seed);
  BurgersConstants c;
  c.a0 = uniform(rng, -1.0, 1.0);
  c.a1 = uniform(rng, -1.0, 1.0);
  c.a2 = uniform(rng, -1.0, 1.0);
  c.b1 = uniform(rng, -1.0, 1.0);
  c.b2 = uniform(rng, -1.0, 1.0);
  c.gamma = uniform(rng, -1.0, 1.0);
  return c;
}

struct BurgersSpec {
  double viscosity = 0.01;  // mu
  PeriodicGrid grid{0.0, 1.0, 128};
  double dt = 2.5e-4;
  double t_end = 1.0;
  int space_subsample = 2;
  std::uint64_t constants_seed = 20240522;
  BurgersConstants constants = draw_burgers_constants(20240522);
};

inline double burgers_bump(const BurgersConstants& c, double x) {
  constexpr double tau = 2.0 * std::numbers::pi;
  return c.a0 + c.a1 * std::sin(tau * x) + c.b1 * std::cos(tau * x) + c.a2 * std::sin(2.0 * tau * x) +
         c.b2 * std::cos(2.0 * tau * x);
}

/// u(x, 0) = 2 phi(x) / max_grid phi + gamma.
inline std::vector<double> burgers_initial(const BurgersSpec& s) {
  const int n = s.grid.points;
  std::vector<double> phi(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) phi[j] = burgers_bump(s.constants, s.grid.x(j));
  const double mx = *std::max_element(phi.begin(), phi.end());
  if (!(mx > 0.0)) throw ConfigError("burgers: initial bump has non-positive maximum; choose other constants");
  for (double& v : phi) v = 2.0 * v / mx + s.constants.gamma;
  return phi;
}

/// du = -u u_x dt + mu u_xx dt + lambda dW(t, x). The advection term is taken
/// in conservative form -(u^2/2)_x with 2/3-rule dealiasing, so the spatial
/// mean is invariant when lambda = 0.
inline std::vector<double> simulate_burgers(const BurgersSpec& s, double lambda, Rng& rng) {
  s.grid.validate();
  const std::size_t steps = [&] {
    const double n = std::round(s.t_end / s.dt);
    if (!(s.dt > 0.0) || std::abs(n * s.dt - s.t_end) > 1e-9 * s.t_end) throw ConfigError("burgers: dt must divide T");
    return static_cast<std::size_t>(n);
  }();
  const int n = s.grid.points;
  const int cutoff = n / 3;
  std::vector<double> k(static_cast<std::size_t>(n));
  std::vector<bool> keep(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    k[j] = s.grid.wavenumber(j);
    const int sj = j <= n / 2 ? j : n - j;
    keep[j] = sj <= cutoff;
  }
  detail::SpectralWorkspace ws(s.grid);
  StandardNormal normal;
  std::vector<double> u = burgers_initial(s), filtered(static_cast<std::size_t>(n)), flux(static_cast<std::size_t>(n)),
                      rhs(static_cast<std::size_t>(n));
  std::vector<std::complex<double>> uh(static_cast<std::size_t>(n)), tmp(static_cast<std::size_t>(n)),
      rhs_hat(static_cast<std::size_t>(n));
  const std::complex<double> i_unit(0.0, 1.0);
  for (std::size_t step = 1; step <= steps; ++step) {
    uh = ws.forward(u);
    for (int j = 0; j < n; ++j) tmp[j] = keep[j] ? uh[j] : 0.0;
    ws.inverse(filtered, tmp);
    for (int j = 0; j < n; ++j) flux[j] = 0.5 * filtered[j] * filtered[j];
    const auto& fh = ws.forward(flux);
    for (int j = 0; j < n; ++j) {
      const std::complex<double> adv = keep[j] && j != n / 2 ? -i_unit * k[j] * fh[j] : 0.0;
      rhs_hat[j] = adv - s.viscosity * k[j] * k[j] * uh[j];
    }
    rhs_hat[0] = 0.0;
    ws.inverse(rhs, rhs_hat);
    for (int j = 0; j < n; ++j) u[j] += s.dt * rhs[j];
    detail::add_white_noise(u, lambda, s.dt, s.grid.spacing(), rng, normal);
    detail::check_finite(u, "burgers", step);
  }
  return u;
}

}  // namespace mdnomad
