#pragma once

// Wall-clock comparison of one-shot analytic inference against Monte Carlo
// sampling of the simulator followed by kernel density estimation.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <vector>

#include "mdnomad/evaluate.hpp"
#include "mdnomad/json_util.hpp"
#include "mdnomad/metrics.hpp"
#include "mdnomad/predict.hpp"
#include "mdnomad/problems.hpp"

namespace mdnomad {

struct TimingOptions {
  std::size_t mc_samples = 10000;
  int runs = 5;  // timed runs after one discarded warm-up
  int y_points = 200;
  std::uint64_t seed = 0;
};

struct TimingReport {
  std::size_t queries = 0;
  std::size_t mc_samples = 0;
  int runs = 0;
  double analytic_seconds = 0.0;  // medians
  double mc_seconds = 0.0;
  double kcde_seconds = -1.0;  // < 0 when not timed
  std::size_t analytic_simulator_calls = 0;
  std::size_t mc_simulator_calls = 0;  // per run
  double checksum = 0.0;              // keeps the timed work observable

  double speedup() const { return mc_seconds / analytic_seconds; }

  Json to_json() const {
    Json j = {{"queries", queries},
              {"mc_samples", mc_samples},
              {"runs", runs},
              {"warmup_runs", 1},
              {"statistic", "median"},
              {"analytic_seconds", analytic_seconds},
              {"mc_kde_seconds", mc_seconds},
              {"speedup", speedup()},
              {"analytic_simulator_calls", analytic_simulator_calls},
              {"mc_simulator_calls_per_run", mc_simulator_calls}};
    if (kcde_seconds >= 0.0) j["kcde_seconds"] = kcde_seconds;
    return j;
  }
};

namespace detail {

inline double median_seconds(const std::function<double()>& work, int runs, double& checksum) {
  checksum += work();  // warm-up
  std::vector<double> t;
  for (int r = 0; r < runs; ++r) {
    const auto start = std::chrono::steady_clock::now();
    checksum += work();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  std::sort(t.begin(), t.end());
  return t.size() % 2 ? t[t.size() / 2] : 0.5 * (t[t.size() / 2 - 1] + t[t.size() / 2]);
}

inline std::vector<double> y_grid(double mean, double sd, int n) {
  std::vector<double> g(static_cast<std::size_t>(n));
  const double s = std::max(sd, 1e-6);
  for (int k = 0; k < n; ++k) g[k] = mean - 6.0 * s + 12.0 * s * k / std::max(1, n - 1);
  return g;
}

}  // namespace detail

/// Times PDF curve + mean + std at every query location for one parameter:
/// (a) from the surrogate's mixture head, (b) from `mc_samples` simulator
/// runs and a KDE per location, and optionally (c) from a KCDE model. Runs
/// single-threaded.
inline TimingReport timing_harness(const SurrogateModel& model, const ProblemSpec& problem,
                                   const std::vector<double>& params, const TimingOptions& opt = {},
                                   const KcdeModel* kcde = nullptr) {
  if (opt.runs < 1 || opt.mc_samples < 2 || opt.y_points < 2) throw ConfigError("timing options invalid");
  const Matrix queries = query_locations(problem);
  const std::size_t Q = static_cast<std::size_t>(queries.cols());
  const auto b = branch_input(problem, params);
  TimingReport rep;
  rep.queries = Q;
  rep.mc_samples = opt.mc_samples;
  rep.runs = opt.runs;

  PreparedSimulator analytic_sim(problem, params);  // present but never run on the analytic path
  auto analytic = [&] {
    double acc = 0.0;
    for (const auto& p : model_forward_grid(model, b, queries)) {
      const double m = mixture_mean(p), sd = std::sqrt(mixture_variance(p));
      for (double y : detail::y_grid(m, sd, opt.y_points)) acc += mixture_pdf(p, y);
      acc += m + sd;
    }
    return acc;
  };
  rep.analytic_seconds = detail::median_seconds(analytic, opt.runs, rep.checksum);
  rep.analytic_simulator_calls = analytic_sim.calls();

  PreparedSimulator mc_sim(problem, params);
  auto mc = [&] {
    std::vector<std::vector<double>> columns(Q, std::vector<double>(opt.mc_samples));
    for (std::size_t r = 0; r < opt.mc_samples; ++r) {
      Rng rng = make_stream(derive_seed(opt.seed, 0x71e), r);
      const auto out = mc_sim.counted_run(rng);
      for (std::size_t q = 0; q < Q; ++q) columns[q][r] = out[q];
    }
    double acc = 0.0;
    for (auto& c : columns) {
      const EmpiricalDistribution d(std::move(c));
      const auto kde = reference_kde(d);
      const double m = d.mean(), sd = std::sqrt(d.variance());
      for (double y : detail::y_grid(m, sd, opt.y_points)) acc += kde.pdf(y);
      acc += m + sd;
    }
    return acc;
  };
  const std::size_t before = mc_sim.calls();
  rep.mc_seconds = detail::median_seconds(mc, opt.runs, rep.checksum);
  rep.mc_simulator_calls = (mc_sim.calls() - before) / static_cast<std::size_t>(opt.runs + 1);

  if (kcde) {
    const auto factory = kcde_conditionals(*kcde, problem, {params}, queries);
    auto kc = [&] {
      double acc = 0.0;
      for (std::size_t q = 0; q < Q; ++q) {
        const auto c = factory(0, q);
        const double m = c->mean(), sd = std::sqrt(c->variance());
        for (double y : detail::y_grid(m, sd, opt.y_points)) acc += c->pdf(y);
        acc += m + sd;
      }
      return acc;
    };
    rep.kcde_seconds = detail::median_seconds(kc, opt.runs, rep.checksum);
  }
  return rep;
}

}  // namespace mdnomad
