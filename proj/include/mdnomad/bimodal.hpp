#pragma once

// Analytic bimodal benchmark: y | (x, lambda) is a two-component Gaussian
// mixture with means 4 sin^2(pi x) +/- (4x - 2) and weights lambda, 1 - lambda.

#include <cmath>
#include <numbers>

#include "mdnomad/error.hpp"
#include "mdnomad/mixture.hpp"
#include "mdnomad/random.hpp"

namespace mdnomad {

struct BimodalSpec {
  double sigma = 0.8;
  int x_points = 100;  // uniform on [0, 1], endpoints included
};

inline double bimodal_x(const BimodalSpec& s, int j) { return s.x_points == 1 ? 0.5 : double(j) / (s.x_points - 1); }

inline MixtureParams bimodal_mixture(double x, double lambda, double sigma = 0.8) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw UsageError("bimodal: lambda must lie in (0,1)");
  const double s = std::sin(std::numbers::pi * x);
  const double centre = 4.0 * s * s;
  const double shift = 4.0 * x - 2.0;
  return MixtureParams({lambda, 1.0 - lambda}, {centre + shift, centre - shift}, {sigma, sigma});
}

inline double bimodal_pdf(double x, double lambda, double y, double sigma = 0.8) {
  return mixture_pdf(bimodal_mixture(x, lambda, sigma), y);
}

inline double bimodal_sample(double x, double lambda, Rng& rng, StandardNormal& normal, double sigma = 0.8) {
  return mixture_sample(bimodal_mixture(x, lambda, sigma), rng, normal);
}

}  // namespace mdnomad
