#pragma once

// Run configuration: one JSON document per experiment. Every field is
// optional; missing fields take the per-problem defaults below.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mdnomad/json_util.hpp"
#include "mdnomad/kcde.hpp"
#include "mdnomad/model.hpp"
#include "mdnomad/problems.hpp"
#include "mdnomad/timing.hpp"
#include "mdnomad/train.hpp"

namespace mdnomad {

inline constexpr int kConfigSchemaVersion = 1;

struct EvaluateConfig {
  std::vector<std::vector<double>> test_parameters;  // empty: draw test_count from the problem laws
  int test_count = 10;
  int reference_replications = 10000;
  bool kl = true;
  bool analytic_reference = false;  // bimodal only: compare against the exact law instead of a bank
};

struct QueryConfig {
  std::vector<double> parameter;  // empty: mean of each parameter law
  int grid = 0;                   // 0: the training query locations
  int y_points = 200;
};

struct RunConfig {
  int schema_version = kConfigSchemaVersion;
  ProblemSpec problem;
  std::uint64_t seed = 20240601;
  int realizations = 50;
  int replications = 30;
  ArchitectureConfig architecture{};
  TrainConfig train{};
  EvaluateConfig evaluate{};
  KcdeFitOptions kcde{};
  TimingOptions timing{};
  std::vector<double> timing_parameter;
  QueryConfig predict{};

  // Seeds of the individual stages, all derived from the master seed.
  std::uint64_t design_seed() const { return derive_seed(seed, 1); }
  std::uint64_t model_seed() const { return derive_seed(seed, 2); }
  std::uint64_t shuffle_seed() const { return derive_seed(seed, 3); }
  std::uint64_t reference_seed() const { return derive_seed(seed, 4); }
  std::uint64_t test_seed() const { return derive_seed(seed, 5); }
  std::uint64_t kcde_seed() const { return derive_seed(seed, 6); }
  std::uint64_t timing_seed() const { return derive_seed(seed, 7); }
};

inline RunConfig default_config(const std::string& problem) {
  RunConfig c;
  c.problem = default_problem(problem);
  if (problem == "van_der_pol") {
    c.realizations = 50, c.replications = 40, c.architecture.components = 15;
  } else if (problem == "lorenz96") {
    c.realizations = 50, c.replications = 30, c.architecture.components = 10, c.train.epochs = 250;
  } else if (problem == "bimodal") {
    c.realizations = 70, c.replications = 30, c.architecture.components = 10;
    c.evaluate.analytic_reference = true;
  } else if (problem == "elliptic") {
    c.realizations = 50, c.replications = 50, c.architecture.components = 50, c.train.train_fraction = 0.8;
  } else {
    c.realizations = 50, c.replications = 30, c.architecture.components = 10;
  }
  return c;
}

/// Parameters used when a config leaves a parameter vector empty.
inline std::vector<double> law_means(const ProblemSpec& p) {
  std::vector<double> v;
  for (const auto& l : p.laws) v.push_back(l.mean());
  return v;
}

/// Held-out test parameters: explicit ones, or fresh draws from the laws
/// under a seed of their own.
inline std::vector<std::vector<double>> test_parameters(const RunConfig& c) {
  if (!c.evaluate.test_parameters.empty()) return c.evaluate.test_parameters;
  return make_design(c.problem.laws, c.evaluate.test_count, 1, c.test_seed()).realizations;
}

namespace detail {

inline void check_parameter_vector(const ProblemSpec& p, const std::vector<double>& v, const std::string& path) {
  if (v.empty()) return;
  if (v.size() != p.laws.size())
    throw ConfigError(path + ": expected " + std::to_string(p.laws.size()) + " parameter values");
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!(v[i] >= p.laws[i].lo && v[i] <= p.laws[i].hi))
      throw ConfigError(path + "[" + std::to_string(i) + "]: outside the bounds of '" + p.laws[i].name + "'");
}

}  // namespace detail

inline RunConfig parse_config(const Json& root) {
  Json j = root;
  if (j.is_object() && j.value("format", std::string{}) == "mdnomad-manifest") {
    if (!j.contains("config")) throw ConfigError("manifest has no config block");
    j = root.at("config");
  }
  check_keys(j,
             {"schema_version", "problem", "physics", "seed", "design", "model", "train", "evaluate", "kcde", "timing",
              "predict"},
             "");
  int version = kConfigSchemaVersion;
  read_field(j, "schema_version", version, "");
  if (version != kConfigSchemaVersion)
    throw ConfigError("schema_version: unsupported version " + std::to_string(version));
  if (!j.contains("problem")) throw ConfigError("problem: missing field");
  std::string name;
  read_field(j, "problem", name, "");
  RunConfig c = default_config(name);
  if (j.contains("physics")) physics_from_json(j.at("physics"), c.problem.physics, "physics");
  read_field(j, "seed", c.seed, "");

  if (j.contains("design")) {
    const Json& d = j.at("design");
    check_keys(d, {"realizations", "replications"}, "design");
    read_field(d, "realizations", c.realizations, "design");
    read_field(d, "replications", c.replications, "design");
  }
  if (c.realizations < 1) throw ConfigError("design.realizations must be positive");
  if (c.replications < 1) throw ConfigError("design.replications must be positive");

  if (j.contains("model")) {
    const Json& m = j.at("model");
    check_keys(m, {"branch_hidden", "latent_width", "decoder_hidden", "components", "activation"}, "model");
    auto& a = c.architecture;
    read_field(m, "branch_hidden", a.branch_hidden, "model");
    read_field(m, "latent_width", a.latent_width, "model");
    read_field(m, "decoder_hidden", a.decoder_hidden, "model");
    read_field(m, "components", a.components, "model");
    std::string act = to_string(a.activation);
    read_field(m, "activation", act, "model");
    try {
      a.activation = activation_from_string(act);
    } catch (const Error&) {
      throw ConfigError("model.activation: expected \"tanh\" or \"relu\"");
    }
  }
  if (c.architecture.components < 1) throw ConfigError("model.components must be at least 1");
  if (c.architecture.latent_width < 1) throw ConfigError("model.latent_width must be positive");
  for (int w : c.architecture.branch_hidden)
    if (w < 1) throw ConfigError("model.branch_hidden: widths must be positive");
  for (int w : c.architecture.decoder_hidden)
    if (w < 1) throw ConfigError("model.decoder_hidden: widths must be positive");

  if (j.contains("train")) {
    const Json& t = j.at("train");
    check_keys(t,
               {"epochs", "batch_size", "learning_rate", "beta1", "beta2", "epsilon", "lr_decay_every",
                "lr_decay_factor", "train_fraction", "report_every", "reduction"},
               "train");
    auto& tc = c.train;
    read_field(t, "epochs", tc.epochs, "train");
    read_field(t, "batch_size", tc.batch_size, "train");
    read_field(t, "learning_rate", tc.adam.learning_rate, "train");
    read_field(t, "beta1", tc.adam.beta1, "train");
    read_field(t, "beta2", tc.adam.beta2, "train");
    read_field(t, "epsilon", tc.adam.epsilon, "train");
    read_field(t, "lr_decay_every", tc.lr_decay_every, "train");
    read_field(t, "lr_decay_factor", tc.lr_decay_factor, "train");
    read_field(t, "train_fraction", tc.train_fraction, "train");
    read_field(t, "report_every", tc.report_every, "train");
    std::string red = tc.reduction == LossReduction::kSum ? "sum" : "mean";
    read_field(t, "reduction", red, "train");
    if (red == "sum")
      tc.reduction = LossReduction::kSum;
    else if (red == "mean")
      tc.reduction = LossReduction::kMean;
    else
      throw ConfigError("train.reduction: expected \"sum\" or \"mean\"");
  }
  if (c.train.epochs < 1) throw ConfigError("train.epochs must be positive");
  if (c.train.batch_size < 1) throw ConfigError("train.batch_size must be positive");
  if (!(c.train.train_fraction > 0.0 && c.train.train_fraction < 1.0))
    throw ConfigError("train.train_fraction must lie in (0,1)");

  if (j.contains("evaluate")) {
    const Json& e = j.at("evaluate");
    check_keys(e, {"test_parameters", "test_count", "reference_replications", "kl", "analytic_reference"}, "evaluate");
    if (e.contains("test_parameters")) {
      const Json& tp = e.at("test_parameters");
      if (!tp.is_array()) throw ConfigError("evaluate.test_parameters: expected an array of parameter vectors");
      c.evaluate.test_parameters.clear();
      for (std::size_t i = 0; i < tp.size(); ++i) {
        const std::string path = "evaluate.test_parameters[" + std::to_string(i) + "]";
        std::vector<double> v;
        read_field(Json{{"v", tp[i]}}, "v", v, path);
        if (v.empty()) throw ConfigError(path + ": empty parameter vector");
        detail::check_parameter_vector(c.problem, v, path);
        c.evaluate.test_parameters.push_back(std::move(v));
      }
    }
    read_field(e, "test_count", c.evaluate.test_count, "evaluate");
    read_field(e, "reference_replications", c.evaluate.reference_replications, "evaluate");
    read_field(e, "kl", c.evaluate.kl, "evaluate");
    read_field(e, "analytic_reference", c.evaluate.analytic_reference, "evaluate");
  }
  if (c.evaluate.test_count < 1) throw ConfigError("evaluate.test_count must be positive");
  if (c.evaluate.reference_replications < 2) throw ConfigError("evaluate.reference_replications must be at least 2");
  if (c.evaluate.analytic_reference && !c.problem.is<BimodalSpec>())
    throw ConfigError("evaluate.analytic_reference: only the bimodal problem has an analytic law");

  if (j.contains("kcde")) {
    const Json& k = j.at("kcde");
    check_keys(k, {"grid_points", "grid_lo", "grid_hi", "validation_fraction", "max_search_train", "max_validation", "sweeps"},
               "kcde");
    read_field(k, "grid_points", c.kcde.grid_points, "kcde");
    read_field(k, "grid_lo", c.kcde.grid_lo, "kcde");
    read_field(k, "grid_hi", c.kcde.grid_hi, "kcde");
    read_field(k, "validation_fraction", c.kcde.validation_fraction, "kcde");
    read_field(k, "max_search_train", c.kcde.max_search_train, "kcde");
    read_field(k, "max_validation", c.kcde.max_validation, "kcde");
    read_field(k, "sweeps", c.kcde.sweeps, "kcde");
  }

  if (j.contains("timing")) {
    const Json& t = j.at("timing");
    check_keys(t, {"mc_samples", "runs", "y_points", "parameter"}, "timing");
    read_field(t, "mc_samples", c.timing.mc_samples, "timing");
    read_field(t, "runs", c.timing.runs, "timing");
    read_field(t, "y_points", c.timing.y_points, "timing");
    read_field(t, "parameter", c.timing_parameter, "timing");
    detail::check_parameter_vector(c.problem, c.timing_parameter, "timing.parameter");
  }
  if (c.timing.runs < 1 || c.timing.mc_samples < 2 || c.timing.y_points < 2) throw ConfigError("timing: invalid counts");

  if (j.contains("predict")) {
    const Json& p = j.at("predict");
    check_keys(p, {"parameter", "grid", "y_points"}, "predict");
    read_field(p, "parameter", c.predict.parameter, "predict");
    read_field(p, "grid", c.predict.grid, "predict");
    read_field(p, "y_points", c.predict.y_points, "predict");
    detail::check_parameter_vector(c.problem, c.predict.parameter, "predict.parameter");
  }
  if (c.predict.grid < 0 || c.predict.y_points < 2) throw ConfigError("predict: invalid grid or y_points");
  c.timing.seed = c.timing_seed();
  c.train.shuffle_seed = c.shuffle_seed();
  c.kcde.seed = c.kcde_seed();
  return c;
}

/// Fully resolved config, suitable for feeding back to parse_config.
inline Json config_to_json(const RunConfig& c) {
  const auto& a = c.architecture;
  const auto& t = c.train;
  Json tp = Json::array();
  for (const auto& v : c.evaluate.test_parameters) tp.push_back(v);
  Json j = {
      {"schema_version", c.schema_version},
      {"problem", c.problem.name},
      {"physics", physics_to_json(c.problem.physics)},
      {"seed", c.seed},
      {"design", {{"realizations", c.realizations}, {"replications", c.replications}}},
      {"model",
       {{"branch_hidden", a.branch_hidden},
        {"latent_width", a.latent_width},
        {"decoder_hidden", a.decoder_hidden},
        {"components", a.components},
        {"activation", to_string(a.activation)}}},
      {"train",
       {{"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"learning_rate", t.adam.learning_rate},
        {"beta1", t.adam.beta1},
        {"beta2", t.adam.beta2},
        {"epsilon", t.adam.epsilon},
        {"lr_decay_every", t.lr_decay_every},
        {"lr_decay_factor", t.lr_decay_factor},
        {"train_fraction", t.train_fraction},
        {"report_every", t.report_every},
        {"reduction", t.reduction == LossReduction::kSum ? "sum" : "mean"}}},
      {"evaluate",
       {{"test_parameters", tp},
        {"test_count", c.evaluate.test_count},
        {"reference_replications", c.evaluate.reference_replications},
        {"kl", c.evaluate.kl},
        {"analytic_reference", c.evaluate.analytic_reference}}},
      {"kcde",
       {{"grid_points", c.kcde.grid_points},
        {"grid_lo", c.kcde.grid_lo},
        {"grid_hi", c.kcde.grid_hi},
        {"validation_fraction", c.kcde.validation_fraction},
        {"max_search_train", c.kcde.max_search_train},
        {"max_validation", c.kcde.max_validation},
        {"sweeps", c.kcde.sweeps}}},
      {"timing",
       {{"mc_samples", c.timing.mc_samples},
        {"runs", c.timing.runs},
        {"y_points", c.timing.y_points},
        {"parameter", c.timing_parameter}}},
      {"predict", {{"parameter", c.predict.parameter}, {"grid", c.predict.grid}, {"y_points", c.predict.y_points}}}};
  return j;
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": malformed JSON: " + e.what());
  }
}

inline RunConfig load_config(const std::filesystem::path& path) { return parse_config(read_json_file(path)); }

}  // namespace mdnomad
