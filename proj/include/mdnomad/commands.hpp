#pragma once

// The batch commands behind the mdnomad executable. Each reads a resolved
// RunConfig, writes its artifacts under one output directory, and records a
// manifest of inputs, seeds and output hashes.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mdnomad/checkpoint.hpp"
#include "mdnomad/config.hpp"
#include "mdnomad/evaluate.hpp"
#include "mdnomad/kcde.hpp"
#include "mdnomad/predict.hpp"
#include "mdnomad/problems.hpp"
#include "mdnomad/timing.hpp"
#include "mdnomad/train.hpp"

namespace mdnomad {

inline constexpr const char* kVersion = "0.1.0";

struct CommandContext {
  std::filesystem::path out_dir;
  int threads = 1;
  std::optional<std::filesystem::path> config_path;
  std::optional<std::filesystem::path> dataset;     // default: <out>/dataset.csv
  std::optional<std::filesystem::path> checkpoint;  // default: <out>/checkpoint.json
  std::optional<std::filesystem::path> queries;     // predict: CSV of parameter + decoder columns
  std::ostream* log = &std::cerr;
};

/// --out, else $MDNOMAD_DATA_DIR/<problem>, else ./runs/<problem>.
inline std::filesystem::path resolve_out_dir(const std::optional<std::filesystem::path>& out, const std::string& problem) {
  if (out) return *out;
  if (const char* root = std::getenv("MDNOMAD_DATA_DIR"); root && *root) return std::filesystem::path(root) / problem;
  return std::filesystem::path("runs") / problem;
}

inline std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot hash " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

namespace detail {

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline Json file_entry(const std::filesystem::path& p) {
  return {{"path", p.string()}, {"fnv1a64", hex64(fnv1a64_file(p))}};
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw UsageError("cannot write " + p.string());
  out << text;
  if (!out) throw UsageError("failed writing " + p.string());
}

class ManifestWriter {
 public:
  ManifestWriter(std::string command, const RunConfig& cfg, const CommandContext& ctx)
      : command_(std::move(command)), cfg_(cfg), ctx_(ctx) {
    if (ctx.config_path) inputs_.push_back(file_entry(*ctx.config_path));
  }
  void input(const std::filesystem::path& p) { inputs_.push_back(file_entry(p)); }
  void output(const std::filesystem::path& p) { outputs_.push_back(file_entry(p)); }

  std::filesystem::path write() const {
    Json j = {{"format", "mdnomad-manifest"},
              {"command", command_},
              {"version", kVersion},
              {"threads", ctx_.threads},
              {"seeds",
               {{"master", cfg_.seed},
                {"design", cfg_.design_seed()},
                {"model", cfg_.model_seed()},
                {"shuffle", cfg_.shuffle_seed()},
                {"reference", cfg_.reference_seed()},
                {"test", cfg_.test_seed()},
                {"kcde", cfg_.kcde_seed()},
                {"timing", cfg_.timing_seed()}}},
              {"inputs", inputs_},
              {"outputs", outputs_},
              {"config", config_to_json(cfg_)}};
    const auto path = ctx_.out_dir / ("manifest_" + command_ + ".json");
    write_text(path, j.dump(2) + "\n");
    return path;
  }

 private:
  std::string command_;
  const RunConfig& cfg_;
  const CommandContext& ctx_;
  Json inputs_ = Json::array();
  Json outputs_ = Json::array();
};

inline std::filesystem::path dataset_path(const CommandContext& ctx) {
  return ctx.dataset.value_or(ctx.out_dir / "dataset.csv");
}
inline std::filesystem::path checkpoint_path(const CommandContext& ctx) {
  return ctx.checkpoint.value_or(ctx.out_dir / "checkpoint.json");
}

inline Checkpoint load_matching_checkpoint(const RunConfig& cfg, const CommandContext& ctx) {
  const auto path = checkpoint_path(ctx);
  if (!std::filesystem::exists(path)) throw UsageError("checkpoint not found: " + path.string());
  Checkpoint c = load_checkpoint(path);
  if (c.problem != cfg.problem.name)
    throw ConfigError("problem: checkpoint was trained on '" + c.problem + "', config names '" + cfg.problem.name + "'");
  return c;
}

inline std::vector<double> parameter_or_mean(const RunConfig& cfg, const std::vector<double>& v) {
  return v.empty() ? law_means(cfg.problem) : v;
}

inline void write_csv_header(std::ostream& out, const std::vector<std::string>& cols) {
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
}

}  // namespace detail

/// Query locations on an n-point (per axis) grid over the training domain.
/// The elliptic problem uses n x n cell centres of the unit square, which
/// never coincide with a training grid of a different size.
inline Matrix make_query_grid(const ProblemSpec& problem, int n) {
  if (n < 1) throw ConfigError("predict.grid must be positive");
  if (problem.is<EllipticSpec>()) {
    const CellGrid g{n, n};
    Matrix q(2, g.size());
    for (int c = 0; c < g.size(); ++c) q(0, c) = g.x(c), q(1, c) = g.y(c);
    return q;
  }
  const Matrix train = query_locations(problem);
  const double lo = train.row(0).minCoeff(), hi = train.row(0).maxCoeff();
  auto at = [&](int k) { return n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * k / (n - 1); };
  if (problem.is<Lorenz96Spec>()) {
    const int comps = problem.as<Lorenz96Spec>().components;
    Matrix q(2, n * comps);
    for (int k = 0, c = 0; k < n; ++k)
      for (int i = 1; i <= comps; ++i, ++c) q(0, c) = at(k), q(1, c) = double(i) / comps;
    return q;
  }
  Matrix q(1, n);
  for (int k = 0; k < n; ++k) q(0, k) = at(k);
  return q;
}

// ---------------------------------------------------------------------------

inline void cmd_generate(const RunConfig& cfg, const CommandContext& ctx) {
  std::filesystem::create_directories(ctx.out_dir);
  detail::ManifestWriter man("generate", cfg, ctx);
  const auto design = make_design(cfg.problem.laws, cfg.realizations, cfg.replications, cfg.design_seed());
  const Dataset ds = generate_dataset(cfg.problem, design, ctx.threads);
  const auto path = detail::dataset_path(ctx);
  write_dataset(ds, path);
  man.output(path);
  man.output(provenance_path(path));
  man.write();
  *ctx.log << "generate: " << ds.rows() << " rows -> " << path.string() << "\n";
}

inline void cmd_train(const RunConfig& cfg, const CommandContext& ctx) {
  std::filesystem::create_directories(ctx.out_dir);
  detail::ManifestWriter man("train", cfg, ctx);
  const auto dpath = detail::dataset_path(ctx);
  if (!std::filesystem::exists(dpath)) throw UsageError("dataset not found: " + dpath.string());
  const Dataset ds = read_dataset_csv(dpath);
  man.input(dpath);
  if (ds.branch_names() != branch_names(cfg.problem) || ds.decoder_names() != decoder_names(cfg.problem))
    throw ConfigError("problem: dataset columns do not match problem '" + cfg.problem.name + "'");
  SurrogateModel model = make_model(static_cast<int>(ds.branch_width()), static_cast<int>(ds.decoder_width()),
                                    cfg.architecture, cfg.model_seed());
  std::ostream& log = *ctx.log;
  Checkpoint ck = train(model, ds, cfg.train, [&](const EpochReport& r) {
    log << "epoch " << r.epoch << "  train_nll " << r.train_nll << "  validation_nll " << r.validation_nll << "\n";
  });
  ck.problem = cfg.problem.name;
  ck.config_echo = config_to_json(cfg);
  const auto cpath = detail::checkpoint_path(ctx);
  save_checkpoint(ck, cpath);
  man.output(cpath);
  std::ostringstream hist;
  hist << "epoch,train_nll,validation_nll\n";
  for (std::size_t e = 0; e < ck.history.train_nll.size(); ++e)
    hist << e + 1 << ',' << format_double(ck.history.train_nll[e]) << ',' << format_double(ck.history.validation_nll[e])
         << '\n';
  const auto hpath = ctx.out_dir / "training_history.csv";
  detail::write_text(hpath, hist.str());
  man.output(hpath);
  man.write();
  log << "train: best epoch " << ck.history.best_epoch << ", validation NLL " << ck.history.best_validation_nll
      << " -> " << cpath.string() << "\n";
}

namespace detail {

struct Evaluation {
  std::vector<std::vector<double>> params;
  Matrix queries;
  std::optional<ReferenceBank> bank;
};

inline Evaluation prepare_evaluation(const RunConfig& cfg, const CommandContext& ctx) {
  Evaluation ev;
  ev.params = test_parameters(cfg);
  ev.queries = query_locations(cfg.problem);
  if (!cfg.evaluate.analytic_reference)
    ev.bank = build_reference_bank(cfg.problem, ev.params, cfg.evaluate.reference_replications, cfg.reference_seed(),
                                   ctx.threads);
  return ev;
}

inline MetricReport score(const RunConfig& cfg, const Evaluation& ev, const ConditionalFactory& est,
                          const std::string& name, const CommandContext& ctx) {
  if (ev.bank) return evaluate_against_bank(*ev.bank, est, name, cfg.evaluate.kl, ctx.threads);
  const auto& spec = cfg.problem.as<BimodalSpec>();
  const ConditionalFactory exact = [&](std::size_t i, std::size_t q) -> std::unique_ptr<ConditionalDensity> {
    return std::make_unique<MixtureConditional>(bimodal_mixture(ev.queries(0, static_cast<Eigen::Index>(q)), ev.params[i][0], spec.sigma));
  };
  MetricReport r = evaluate_against_reference(ev.params.size(), static_cast<std::size_t>(ev.queries.cols()), exact, est,
                                              name, ctx.threads);
  r.metadata = {{"reference", "analytic"}, {"test_parameters", ev.params}};
  return r;
}

}  // namespace detail

inline void cmd_evaluate(const RunConfig& cfg, const CommandContext& ctx) {
  std::filesystem::create_directories(ctx.out_dir);
  detail::ManifestWriter man("evaluate", cfg, ctx);
  const Checkpoint ck = detail::load_matching_checkpoint(cfg, ctx);
  man.input(detail::checkpoint_path(ctx));
  const auto ev = detail::prepare_evaluation(cfg, ctx);
  MetricReport rep = detail::score(cfg, ev, surrogate_conditionals(ck.model, cfg.problem, ev.params, ev.queries),
                                   "md-nomad", ctx);
  Json j = rep.to_json();

  // Statistic fields and their relative l1 errors, per test parameter.
  std::ostringstream stats;
  auto cols = decoder_names(cfg.problem);
  cols.insert(cols.begin(), "parameter");
  for (const char* c : {"reference_mean", "reference_std", "predicted_mean", "predicted_std"}) cols.push_back(c);
  detail::write_csv_header(stats, cols);
  Json l1 = Json::array();
  for (std::size_t i = 0; i < ev.params.size(); ++i) {
    const StatisticFields pred = predict_statistics(ck.model, branch_input(cfg.problem, ev.params[i]), ev.queries);
    StatisticFields ref;
    if (ev.bank) {
      ref = reference_statistics(*ev.bank, i);
    } else {
      for (Eigen::Index q = 0; q < ev.queries.cols(); ++q) {
        const auto p = bimodal_mixture(ev.queries(0, q), ev.params[i][0], cfg.problem.as<BimodalSpec>().sigma);
        ref.mean.push_back(mixture_mean(p));
        ref.std.push_back(std::sqrt(mixture_variance(p)));
      }
    }
    l1.push_back({{"parameter", ev.params[i]},
                  {"mean", relative_l1(ref.mean, pred.mean)},
                  {"std", relative_l1(ref.std, pred.std)}});
    for (Eigen::Index q = 0; q < ev.queries.cols(); ++q) {
      stats << i;
      for (Eigen::Index r = 0; r < ev.queries.rows(); ++r) stats << ',' << format_double(ev.queries(r, q));
      stats << ',' << format_double(ref.mean[q]) << ',' << format_double(ref.std[q]) << ','
            << format_double(pred.mean[q]) << ',' << format_double(pred.std[q]) << '\n';
    }
  }
  j["relative_l1"] = l1;
  const auto mpath = ctx.out_dir / "metrics.json", ppath = ctx.out_dir / "metrics_points.csv",
             spath = ctx.out_dir / "statistics.csv";
  detail::write_text(mpath, j.dump(2) + "\n");
  rep.write_csv(ppath);
  detail::write_text(spath, stats.str());
  for (const auto& p : {mpath, ppath, spath}) man.output(p);
  man.write();
  *ctx.log << "evaluate: E_W " << rep.expected_w2 << (rep.has_kl ? ", E_KL " + std::to_string(rep.expected_kl) : "")
           << " over " << rep.points.size() << " points\n";
}

inline void cmd_predict(const RunConfig& cfg, const CommandContext& ctx) {
  std::filesystem::create_directories(ctx.out_dir);
  detail::ManifestWriter man("predict", cfg, ctx);
  const Checkpoint ck = detail::load_matching_checkpoint(cfg, ctx);
  man.input(detail::checkpoint_path(ctx));
  const auto dnames = decoder_names(cfg.problem);
  std::vector<std::vector<double>> params;
  std::vector<std::vector<double>> locs;
  if (ctx.queries) {
    // Header: problem parameter names, then decoder feature names.
    std::ifstream in(*ctx.queries);
    if (!in) throw UsageError("cannot open query file " + ctx.queries->string());
    man.input(*ctx.queries);
    std::string line;
    std::getline(in, line);
    std::vector<std::string> expect;
    for (const auto& l : cfg.problem.laws) expect.push_back(l.name);
    expect.insert(expect.end(), dnames.begin(), dnames.end());
    std::ostringstream want;
    detail::write_csv_header(want, expect);
    if (line + "\n" != want.str()) throw ConfigError("queries: header must be '" + want.str().substr(0, want.str().size() - 1) + "'");
    for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
      if (line.empty()) continue;
      std::vector<double> v;
      std::stringstream ss(line);
      for (std::string cell; std::getline(ss, cell, ',');) {
        char* end = nullptr;
        v.push_back(std::strtod(cell.c_str(), &end));
        if (end == cell.c_str() || !std::isfinite(v.back()))
          throw ConfigError("queries: row " + std::to_string(lineno) + ": unparseable number");
      }
      if (v.size() != expect.size()) throw ConfigError("queries: row " + std::to_string(lineno) + ": wrong column count");
      params.emplace_back(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(cfg.problem.laws.size()));
      locs.emplace_back(v.begin() + static_cast<std::ptrdiff_t>(cfg.problem.laws.size()), v.end());
    }
  } else {
    const auto p = detail::parameter_or_mean(cfg, cfg.predict.parameter);
    const Matrix q = cfg.predict.grid > 0 ? make_query_grid(cfg.problem, cfg.predict.grid) : query_locations(cfg.problem);
    for (Eigen::Index c = 0; c < q.cols(); ++c) {
      params.push_back(p);
      locs.emplace_back(q.col(c).data(), q.col(c).data() + q.rows());
    }
  }
  std::ostringstream stats, pdf;
  std::vector<std::string> cols;
  cols.push_back("query");
  for (const auto& l : cfg.problem.laws) cols.push_back(l.name);
  cols.insert(cols.end(), dnames.begin(), dnames.end());
  cols.push_back("mean");
  cols.push_back("std");
  detail::write_csv_header(stats, cols);
  pdf << "query,y,pdf\n";
  for (std::size_t k = 0; k < params.size(); ++k) {
    const MixtureParams mp = model_forward(ck.model, branch_input(cfg.problem, params[k]), locs[k]);
    const double m = mixture_mean(mp), sd = std::sqrt(mixture_variance(mp));
    stats << k;
    for (double v : params[k]) stats << ',' << format_double(v);
    for (double v : locs[k]) stats << ',' << format_double(v);
    stats << ',' << format_double(m) << ',' << format_double(sd) << '\n';
    double smax = 0.0;
    for (double s : mp.scales()) smax = std::max(smax, s);
    const int n = cfg.predict.y_points;
    const double lo = *std::min_element(mp.means().begin(), mp.means().end()) - 6.0 * smax;
    const double hi = *std::max_element(mp.means().begin(), mp.means().end()) + 6.0 * smax;
    for (int j = 0; j < n; ++j) {
      const double y = lo + (hi - lo) * j / (n - 1);
      pdf << k << ',' << format_double(y) << ',' << format_double(mixture_pdf(mp, y)) << '\n';
    }
  }
  const auto spath = ctx.out_dir / "predict.csv", ppath = ctx.out_dir / "predict_pdf.csv";
  detail::write_text(spath, stats.str());
  detail::write_text(ppath, pdf.str());
  man.output(spath);
  man.output(ppath);
  man.write();
  *ctx.log << "predict: " << params.size() << " queries -> " << spath.string() << "\n";
}

inline void cmd_propagate(const RunConfig& cfg, const CommandContext& ctx) {
  std::filesystem::create_directories(ctx.out_dir);
  detail::ManifestWriter man("propagate", cfg, ctx);
  const Checkpoint ck = detail::load_matching_checkpoint(cfg, ctx);
  man.input(detail::checkpoint_path(ctx));
  const auto p = detail::parameter_or_mean(cfg, cfg.predict.parameter);
  const Matrix q = cfg.predict.grid > 0 ? make_query_grid(cfg.problem, cfg.predict.grid) : query_locations(cfg.problem);
  const StatisticFields f = predict_statistics(ck.model, branch_input(cfg.problem, p), q);
  std::ostringstream out;
  auto cols = decoder_names(cfg.problem);
  cols.push_back("mean");
  cols.push_back("std");
  detail::write_csv_header(out, cols);
  for (Eigen::Index c = 0; c < q.cols(); ++c) {
    for (Eigen::Index r = 0; r < q.rows(); ++r) out << format_double(q(r, c)) << ',';
    out << format_double(f.mean[c]) << ',' << format_double(f.std[c]) << '\n';
  }
  const auto path = ctx.out_dir / "propagate.csv";
  detail::write_text(path, out.str());
  man.output(path);
  man.write();
  *ctx.log << "propagate: " << q.cols() << " locations -> " << path.string() << "\n";
}

inline void cmd_compare_kcde(const RunConfig& cfg, const CommandContext& ctx) {
  std::filesystem::create_directories(ctx.out_dir);
  detail::ManifestWriter man("compare-kcde", cfg, ctx);
  const Checkpoint ck = detail::load_matching_checkpoint(cfg, ctx);
  man.input(detail::checkpoint_path(ctx));
  const auto dpath = detail::dataset_path(ctx);
  if (!std::filesystem::exists(dpath)) throw UsageError("dataset not found: " + dpath.string());
  const Dataset ds = read_dataset_csv(dpath);
  man.input(dpath);
  const KcdeModel kcde = kcde_fit(ds, cfg.kcde);
  const auto ev = detail::prepare_evaluation(cfg, ctx);
  const MetricReport a =
      detail::score(cfg, ev, surrogate_conditionals(ck.model, cfg.problem, ev.params, ev.queries), "md-nomad", ctx);
  const MetricReport b = detail::score(cfg, ev, kcde_conditionals(kcde, cfg.problem, ev.params, ev.queries), "kcde", ctx);
  Json j = {{"md_nomad", a.to_json()},
            {"kcde", b.to_json()},
            {"kcde_bandwidths", {{"inputs", kcde.input_bandwidths}, {"target", kcde.target_bandwidth}}},
            {"kcde_selection_nll", kcde.selection_nll},
            {"md_nomad_better", a.expected_w2 < b.expected_w2}};
  const auto path = ctx.out_dir / "kcde_comparison.json";
  detail::write_text(path, j.dump(2) + "\n");
  a.write_csv(ctx.out_dir / "kcde_comparison_mdnomad_points.csv");
  b.write_csv(ctx.out_dir / "kcde_comparison_kcde_points.csv");
  man.output(path);
  man.output(ctx.out_dir / "kcde_comparison_mdnomad_points.csv");
  man.output(ctx.out_dir / "kcde_comparison_kcde_points.csv");
  man.write();
  *ctx.log << "compare-kcde: E_W md-nomad " << a.expected_w2 << ", kcde " << b.expected_w2 << "\n";
}

inline void cmd_bench_timing(const RunConfig& cfg, const CommandContext& ctx) {
  std::filesystem::create_directories(ctx.out_dir);
  detail::ManifestWriter man("bench-timing", cfg, ctx);
  const Checkpoint ck = detail::load_matching_checkpoint(cfg, ctx);
  man.input(detail::checkpoint_path(ctx));
  const auto p = detail::parameter_or_mean(cfg, cfg.timing_parameter);
  const TimingReport rep = timing_harness(ck.model, cfg.problem, p, cfg.timing);
  Json j = rep.to_json();
  j["parameter"] = p;
  const auto path = ctx.out_dir / "timing.json";
  detail::write_text(path, j.dump(2) + "\n");
  man.output(path);
  man.write();
  *ctx.log << "bench-timing: analytic " << rep.analytic_seconds << " s, MC+KDE " << rep.mc_seconds << " s, speedup "
           << rep.speedup() << "\n";
}

}  // namespace mdnomad
