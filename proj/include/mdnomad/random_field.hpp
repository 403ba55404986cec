#pragma once

// Log-normal random fields on a cell-centred grid of the unit square:
// anisotropic Matern-3/2 covariance, dense Cholesky sampling.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "mdnomad/error.hpp"
#include "mdnomad/random.hpp"

namespace mdnomad {

/// n_x by n_y cells on [0,1]^2; point p = j * n_x + i sits at ((i+.5)/n_x, (j+.5)/n_y).
struct CellGrid {
  int nx = 32;
  int ny = 32;

  int size() const { return nx * ny; }
  double x(int p) const { return ((p % nx) + 0.5) / nx; }
  double y(int p) const { return ((p / nx) + 0.5) / ny; }
};

enum class MaternForm {
  kAnisotropic,  // sigma^2 (1 + sqrt3 rho) exp(-sqrt3 rho), rho^2 = (dx/lx)^2 + (dy/ly)^2
  kVerbatim,     // sigma^2 (1 + sqrt3 r/lx) exp(-sqrt3 r/ly), r Euclidean; not PD in general
};

struct RandomFieldSpec {
  double length_x = 0.3;
  double length_y = 0.15;
  double amplitude = 1.0;  // kernel sigma
  double jitter = 1e-8;    // relative to amplitude^2
  CellGrid grid{};
  MaternForm form = MaternForm::kAnisotropic;

  void validate() const {
    if (!(length_x >= 0.05 && length_x <= 0.9) || !(length_y >= 0.05 && length_y <= 0.9))
      throw ConfigError("Matern length scales must lie in [0.05, 0.9]");
    if (!(amplitude > 0.0)) throw ConfigError("Matern amplitude must be positive");
    if (!(jitter > 0.0)) throw ConfigError("jitter must be positive");
    if (grid.nx < 1 || grid.ny < 1 || grid.nx > 64 || grid.ny > 64) throw ConfigError("field grid must be 1..64 per side");
  }
};

inline double matern32(double ax, double ay, double bx, double by, const RandomFieldSpec& s) {
  const double dx = ax - bx;
  const double dy = ay - by;
  const double s2 = s.amplitude * s.amplitude;
  const double sqrt3 = std::sqrt(3.0);
  if (s.form == MaternForm::kAnisotropic) {
    const double rho = std::sqrt((dx / s.length_x) * (dx / s.length_x) + (dy / s.length_y) * (dy / s.length_y));
    return s2 * (1.0 + sqrt3 * rho) * std::exp(-sqrt3 * rho);
  }
  const double r = std::sqrt(dx * dx + dy * dy);
  return s2 * (1.0 + sqrt3 * r / s.length_x) * std::exp(-sqrt3 * r / s.length_y);
}

/// Factorises the grid covariance once; each sample() is one field draw.
class LogNormalFieldSampler {
 public:
  explicit LogNormalFieldSampler(const RandomFieldSpec& spec) : spec_(spec) {
    spec_.validate();
    const int n = spec_.grid.size();
    Eigen::MatrixXd k(n, n);
    for (int p = 0; p < n; ++p)
      for (int q = 0; q <= p; ++q) {
        k(p, q) = matern32(spec_.grid.x(p), spec_.grid.y(p), spec_.grid.x(q), spec_.grid.y(q), spec_);
        k(q, p) = k(p, q);
      }
    const double s2 = spec_.amplitude * spec_.amplitude;
    // Escalate jitter x10 up to 1e-4 (relative) before giving up.
    for (double jitter = spec_.jitter; jitter <= 1e-4 * (1.0 + 1e-9); jitter *= 10.0) {
      Eigen::LLT<Eigen::MatrixXd> llt(k + jitter * s2 * Eigen::MatrixXd::Identity(n, n));
      if (llt.info() == Eigen::Success) {
        factor_ = llt.matrixL();
        jitter_used_ = jitter;
        return;
      }
    }
    throw DegenerateKernelError("Cholesky failed for length scales (" + std::to_string(spec_.length_x) + ", " +
                                std::to_string(spec_.length_y) + ") after jitter escalation to 1e-4");
  }

  /// log-field draw (zero-mean GP values at the grid points).
  Eigen::VectorXd sample_log(Rng& rng) const {
    StandardNormal normal;
    Eigen::VectorXd z(factor_.rows());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
    return factor_.triangularView<Eigen::Lower>() * z;
  }

  Eigen::VectorXd sample(Rng& rng) const { return sample_log(rng).array().exp().matrix(); }

  double jitter_used() const { return jitter_used_; }
  const RandomFieldSpec& spec() const { return spec_; }

 private:
  RandomFieldSpec spec_;
  Eigen::MatrixXd factor_;
  double jitter_used_ = 0.0;
};

inline Eigen::VectorXd gp_sample_log_diffusivity(const RandomFieldSpec& spec, Rng& rng) {
  return LogNormalFieldSampler(spec).sample(rng);
}

}  // namespace mdnomad
