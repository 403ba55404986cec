#pragma once

// Reference banks of simulator replications at held-out parameters, and the
// per-point / aggregate metric report comparing a surrogate against them.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mdnomad/dataset.hpp"
#include "mdnomad/json_util.hpp"
#include "mdnomad/kcde.hpp"
#include "mdnomad/metrics.hpp"
#include "mdnomad/model.hpp"
#include "mdnomad/predict.hpp"
#include "mdnomad/problems.hpp"

namespace mdnomad {

struct ReferenceBank {
  std::vector<std::vector<double>> parameters;  // held-out parameter vectors
  Matrix queries;                               // decoder inputs, d_d x Q
  int replications = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<EmpiricalDistribution>> cells;  // [parameter][query]

  std::size_t parameter_count() const { return parameters.size(); }
  std::size_t query_count() const { return static_cast<std::size_t>(queries.cols()); }
};

/// `replications` simulator runs at each parameter; one parameter at a time
/// so only one parameter's raw outputs are held in memory.
inline ReferenceBank build_reference_bank(const ProblemSpec& problem, const std::vector<std::vector<double>>& params,
                                          int replications, std::uint64_t seed, int threads = 1) {
  if (params.empty()) throw ConfigError("reference bank needs at least one test parameter");
  if (replications < 2) throw ConfigError("reference bank needs at least two replications");
  ReferenceBank bank;
  bank.parameters = params;
  bank.queries = query_locations(problem);
  bank.replications = replications;
  bank.seed = seed;
  const std::size_t Q = bank.query_count();
  for (std::size_t i = 0; i < params.size(); ++i) {
    // Split the replications of one parameter into chunks so threads help.
    const int chunks = std::max(1, std::min(threads, replications));
    std::vector<std::vector<double>> runs(static_cast<std::size_t>(replications));
    const std::uint64_t master = derive_seed(noise_master(seed), 0x7e57 + i);
    PreparedSimulator sim(problem, params[i]);
    parallel_for(static_cast<std::size_t>(chunks), chunks, [&](std::size_t c) {
      for (std::size_t r = c; r < runs.size(); r += static_cast<std::size_t>(chunks)) {
        Rng rng = make_stream(master, r);
        try {
          runs[r] = sim.run(rng);
        } catch (const Error& e) {
          throw DesignPointError(e, i * static_cast<std::size_t>(replications) + r);
        }
      }
    });
    std::vector<EmpiricalDistribution> row;
    row.reserve(Q);
    std::vector<double> column(runs.size());
    for (std::size_t q = 0; q < Q; ++q) {
      for (std::size_t r = 0; r < runs.size(); ++r) column[r] = runs[r][q];
      row.emplace_back(column);
    }
    bank.cells.push_back(std::move(row));
  }
  return bank;
}

// ---------------------------------------------------------------------------

struct PointMetric {
  std::size_t parameter = 0;
  std::size_t query = 0;
  double w2 = 0.0;
  double kl = 0.0;
  bool fallback = false;
};

struct MetricReport {
  std::string estimator;
  std::vector<PointMetric> points;
  bool has_kl = false;
  double expected_w2 = 0.0;
  double expected_kl = 0.0;
  std::size_t fallback_points = 0;
  Json metadata = Json::object();

  /// Aggregates as plain means of the stored per-point values.
  void aggregate() {
    double w = 0.0, k = 0.0;
    fallback_points = 0;
    for (const auto& p : points) {
      w += p.w2;
      k += p.kl;
      fallback_points += p.fallback ? 1 : 0;
    }
    const double n = static_cast<double>(std::max<std::size_t>(1, points.size()));
    expected_w2 = w / n;
    expected_kl = has_kl ? k / n : 0.0;
  }

  Json to_json() const {
    Json j = {{"estimator", estimator},
              {"points", points.size()},
              {"E_W", expected_w2},
              {"w2_quadrature", "midpoint, 2000 nodes, levels clipped to [5e-4, 1-5e-4]"},
              {"kcde_fallback_points", fallback_points},
              {"metadata", metadata}};
    if (has_kl) {
      j["E_KL"] = expected_kl;
      j["kl_direction"] = "KL(reference || surrogate), reference smoothed by Gaussian KDE with Silverman bandwidth";
    }
    return j;
  }

  void write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write " + path.string());
    out << "parameter,query,w2" << (has_kl ? ",kl" : "") << ",fallback\n";
    for (const auto& p : points) {
      out << p.parameter << ',' << p.query << ',' << format_double(p.w2);
      if (has_kl) out << ',' << format_double(p.kl);
      out << ',' << (p.fallback ? 1 : 0) << '\n';
    }
  }
};

/// Builds the conditional density of the estimator under test at
/// (test parameter i, query q).
using ConditionalFactory = std::function<std::unique_ptr<ConditionalDensity>(std::size_t, std::size_t)>;

/// Mean squared W2 (and optionally KL) of `estimator` against the empirical
/// bank, over every (parameter, query) pair.
inline MetricReport evaluate_against_bank(const ReferenceBank& bank, const ConditionalFactory& estimator,
                                          const std::string& name, bool with_kl = false, int threads = 1) {
  MetricReport rep;
  rep.estimator = name;
  rep.has_kl = with_kl;
  const std::size_t P = bank.parameter_count(), Q = bank.query_count();
  rep.points.resize(P * Q);
  parallel_for(P * Q, threads, [&](std::size_t k) {
    const std::size_t i = k / Q, q = k % Q;
    const auto est = estimator(i, q);
    const auto& ref = bank.cells[i][q];
    PointMetric pm{i, q};
    pm.w2 = w2_squared(empirical_quantiles(ref, w2_levels()), est->quantiles(w2_levels()));
    if (with_kl) pm.kl = kl_divergence(ref, [&](double y) { return est->pdf(y); });
    if (const auto* kc = dynamic_cast<const KcdeConditional*>(est.get())) pm.fallback = kc->fallback();
    rep.points[k] = pm;
  });
  rep.metadata = {{"reference_replications", bank.replications}, {"reference_seed", bank.seed},
                  {"test_parameters", bank.parameters}};
  rep.aggregate();
  return rep;
}

/// Same, against a reference given as conditional densities (e.g. a known
/// analytic law) on a P x Q layout.
inline MetricReport evaluate_against_reference(std::size_t P, std::size_t Q, const ConditionalFactory& reference,
                                               const ConditionalFactory& estimator, const std::string& name,
                                               int threads = 1) {
  MetricReport rep;
  rep.estimator = name;
  rep.points.resize(P * Q);
  parallel_for(P * Q, threads, [&](std::size_t k) {
    const std::size_t i = k / Q, q = k % Q;
    const auto est = estimator(i, q);
    PointMetric pm{i, q};
    pm.w2 = w2_squared(reference(i, q)->quantiles(w2_levels()), est->quantiles(w2_levels()));
    if (const auto* kc = dynamic_cast<const KcdeConditional*>(est.get())) pm.fallback = kc->fallback();
    rep.points[k] = pm;
  });
  rep.aggregate();
  return rep;
}

// ---------------------------------------------------------------------------
// Estimator adapters

/// MD-NOMAD conditionals, one forward pass per (parameter, query grid).
inline ConditionalFactory surrogate_conditionals(const SurrogateModel& model, const ProblemSpec& problem,
                                                 const std::vector<std::vector<double>>& params, const Matrix& queries) {
  auto table = std::make_shared<std::vector<std::vector<MixtureParams>>>();
  for (const auto& p : params) table->push_back(model_forward_grid(model, branch_input(problem, p), queries));
  return [table](std::size_t i, std::size_t q) -> std::unique_ptr<ConditionalDensity> {
    return std::make_unique<MixtureConditional>((*table)[i][q]);
  };
}

inline ConditionalFactory kcde_conditionals(const KcdeModel& kcde, const ProblemSpec& problem,
                                            const std::vector<std::vector<double>>& params, const Matrix& queries) {
  return [&kcde, &problem, params, queries](std::size_t i, std::size_t q) -> std::unique_ptr<ConditionalDensity> {
    std::vector<double> x = branch_input(problem, params[i]);
    for (Eigen::Index r = 0; r < queries.rows(); ++r) x.push_back(queries(r, static_cast<Eigen::Index>(q)));
    return std::make_unique<KcdeConditional>(kcde_conditional(kcde, x));
  };
}

/// Sample mean and standard deviation fields of one bank parameter.
inline StatisticFields reference_statistics(const ReferenceBank& bank, std::size_t parameter) {
  StatisticFields f;
  for (const auto& cell : bank.cells.at(parameter)) {
    f.mean.push_back(cell.mean());
    f.std.push_back(std::sqrt(cell.variance()));
  }
  return f;
}

}  // namespace mdnomad
