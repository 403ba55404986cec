#pragma once

// Cell-centred finite volumes for -div(alpha grad u) = 0 on the unit square:
// u = 1 at x = 0, u = 0 at x = 1, zero flux at y = 0 and y = 1.

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include <cmath>
#include <string>
#include <vector>

#include "mdnomad/error.hpp"
#include "mdnomad/random_field.hpp"

namespace mdnomad {

struct EllipticSolveInfo {
  int iterations = 0;
  double relative_residual = 0.0;
};

/// `alpha` holds one strictly positive value per cell (CellGrid ordering).
/// Face coefficients are harmonic means; Dirichlet faces use a mirrored
/// ghost cell, i.e. a half-cell distance to the boundary value.
inline Eigen::VectorXd elliptic_solve(const Eigen::VectorXd& alpha, const CellGrid& grid,
                                      EllipticSolveInfo* info = nullptr, double tolerance = 1e-10) {
  const int nx = grid.nx, ny = grid.ny, n = grid.size();
  if (alpha.size() != n) throw ShapeError("diffusivity field size does not match grid");
  for (int p = 0; p < n; ++p)
    if (!(alpha(p) > 0.0) || !std::isfinite(alpha(p))) throw UsageError("diffusivity must be strictly positive and finite");
  // Square cells scale out of the flux balance only when hx == hy.
  const double hx = 1.0 / nx, hy = 1.0 / ny;
  const double cx = hy / hx, cy = hx / hy;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(5 * n));
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  std::vector<double> diag(static_cast<std::size_t>(n), 0.0);
  auto harmonic = [](double a, double b) { return 2.0 * a * b / (a + b); };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int p = j * nx + i;
      const double a = alpha(p);
      if (i + 1 < nx) {
        const int q = p + 1;
        const double t = cx * harmonic(a, alpha(q));
        diag[p] += t;
        diag[q] += t;
        trip.emplace_back(p, q, -t);
        trip.emplace_back(q, p, -t);
      } else {
        diag[p] += cx * 2.0 * a;  // u = 0 at x = 1
      }
      if (i == 0) {
        diag[p] += cx * 2.0 * a;  // u = 1 at x = 0
        rhs(p) += cx * 2.0 * a;
      }
      if (j + 1 < ny) {
        const int q = p + nx;
        const double t = cy * harmonic(a, alpha(q));
        diag[p] += t;
        diag[q] += t;
        trip.emplace_back(p, q, -t);
        trip.emplace_back(q, p, -t);
      }
    }
  }
  for (int p = 0; p < n; ++p) trip.emplace_back(p, p, diag[p]);
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(trip.begin(), trip.end());

  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                           Eigen::DiagonalPreconditioner<double>>
      cg;
  cg.setTolerance(tolerance);
  cg.setMaxIterations(10 * n);
  cg.compute(a);
  Eigen::VectorXd u = cg.solve(rhs);
  const double residual = (rhs - a * u).norm() / rhs.norm();
  if (info) {
    info->iterations = static_cast<int>(cg.iterations());
    info->relative_residual = residual;
  }
  if (cg.info() != Eigen::Success || !(residual <= tolerance * 10.0))
    throw SolverError("conjugate gradients did not converge in " + std::to_string(10 * n) + " iterations", residual);
  return u;
}

}  // namespace mdnomad
