#pragma once

// Registry of the six benchmark problems: parameter laws, physics, how
// simulator output is flattened into (branch, decoder, target) rows.

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mdnomad/bimodal.hpp"
#include "mdnomad/dataset.hpp"
#include "mdnomad/design.hpp"
#include "mdnomad/elliptic.hpp"
#include "mdnomad/json_util.hpp"
#include "mdnomad/parallel.hpp"
#include "mdnomad/random_field.hpp"
#include "mdnomad/sde.hpp"
#include "mdnomad/spectral.hpp"

namespace mdnomad {

struct EllipticSpec {
  CellGrid grid{32, 32};
  double amplitude = 1.0;
  double jitter = 1e-8;
  MaternForm form = MaternForm::kAnisotropic;
};

using Physics = std::variant<VanDerPolSpec, Lorenz96Spec, BimodalSpec, EllipticSpec, HeatSpec, BurgersSpec>;

struct ProblemSpec {
  std::string name;
  std::vector<ParameterLaw> laws;
  Physics physics;

  template <typename T>
  const T& as() const {
    return std::get<T>(physics);
  }
  template <typename T>
  bool is() const {
    return std::holds_alternative<T>(physics);
  }
};

inline const std::vector<std::string>& problem_names() {
  static const std::vector<std::string> names{"van_der_pol", "lorenz96", "bimodal", "elliptic", "heat", "burgers"};
  return names;
}

inline ProblemSpec default_problem(const std::string& name) {
  auto uniform_law = [](const char* n, double lo, double hi) { return ParameterLaw{n, Family::kUniform, lo, hi}; };
  if (name == "van_der_pol") return {name, {uniform_law("lambda", 0.4, 0.8)}, VanDerPolSpec{}};
  if (name == "lorenz96") return {name, {uniform_law("lambda", 0.15, 0.35)}, Lorenz96Spec{}};
  if (name == "bimodal") return {name, {uniform_law("lambda", 0.4, 0.7)}, BimodalSpec{}};
  if (name == "elliptic") {
    const ParameterLaw lx{"l_x", Family::kBeta, 0.05, 0.9, 1.2, 4.0};
    ParameterLaw ly = lx;
    ly.name = "l_y";
    return {name, {lx, ly}, EllipticSpec{}};
  }
  if (name == "heat") return {name, {uniform_law("lambda", 0.35, 0.75)}, HeatSpec{}};
  if (name == "burgers") return {name, {uniform_law("lambda", 0.3, 0.8)}, BurgersSpec{}};
  throw ConfigError("problem: unknown problem '" + name + "'");
}

// ---------------------------------------------------------------------------
// Row layout

inline std::vector<std::string> branch_names(const ProblemSpec& p) {
  if (p.is<BimodalSpec>()) return {"lambda", "one_minus_lambda"};
  std::vector<std::string> out;
  for (const auto& l : p.laws) out.push_back(l.name);
  return out;
}

inline std::vector<std::string> decoder_names(const ProblemSpec& p) {
  if (p.is<Lorenz96Spec>()) return {"t", "component"};
  if (p.is<EllipticSpec>()) return {"x", "y"};
  if (p.is<VanDerPolSpec>()) return {"t"};
  return {"x"};
}

/// Branch-network input for one parameter vector.
inline std::vector<double> branch_input(const ProblemSpec& p, const std::vector<double>& params) {
  if (params.size() != p.laws.size()) throw ShapeError("parameter vector width does not match problem laws");
  if (p.is<BimodalSpec>()) return {params[0], 1.0 - params[0]};
  return params;
}

inline std::size_t decoder_width(const ProblemSpec& p) { return decoder_names(p).size(); }

namespace detail {

inline std::size_t heat_like_retained(const PeriodicGrid& g, int sub) {
  if (sub < 1) throw ConfigError("space_subsample must be positive");
  return static_cast<std::size_t>((g.points + sub - 1) / sub);
}

}  // namespace detail

/// Decoder-input locations at which each simulator run is recorded, after
/// subsampling; column q pairs with element q of the simulator output.
inline Matrix query_locations(const ProblemSpec& p) {
  return std::visit(
      [](const auto& s) -> Matrix {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, VanDerPolSpec>) {
          const std::size_t n = step_count(s.output_stride, s.t_end) + 1;
          Matrix q(1, static_cast<Eigen::Index>(n));
          for (std::size_t k = 0; k < n; ++k) q(0, k) = static_cast<double>(k) * s.output_stride;
          return q;
        } else if constexpr (std::is_same_v<S, Lorenz96Spec>) {
          if (s.time_subsample < 1) throw ConfigError("lorenz96.time_subsample must be positive");
          const std::size_t steps = step_count(s.dt, s.t_end);
          const std::size_t times = steps / s.time_subsample + 1;
          Matrix q(2, static_cast<Eigen::Index>(times * s.components));
          Eigen::Index c = 0;
          for (std::size_t k = 0; k < times; ++k)
            for (int i = 1; i <= s.components; ++i, ++c) {
              q(0, c) = static_cast<double>(k * s.time_subsample) * s.dt;
              q(1, c) = static_cast<double>(i) / s.components;
            }
          return q;
        } else if constexpr (std::is_same_v<S, BimodalSpec>) {
          if (s.x_points < 1) throw ConfigError("bimodal.x_points must be positive");
          Matrix q(1, s.x_points);
          for (int j = 0; j < s.x_points; ++j) q(0, j) = bimodal_x(s, j);
          return q;
        } else if constexpr (std::is_same_v<S, EllipticSpec>) {
          Matrix q(2, s.grid.size());
          for (int c = 0; c < s.grid.size(); ++c) {
            q(0, c) = s.grid.x(c);
            q(1, c) = s.grid.y(c);
          }
          return q;
        } else {
          const std::size_t n = detail::heat_like_retained(s.grid, s.space_subsample);
          Matrix q(1, static_cast<Eigen::Index>(n));
          for (std::size_t j = 0; j < n; ++j) q(0, j) = s.grid.x(static_cast<int>(j) * s.space_subsample);
          return q;
        }
      },
      p.physics);
}

// ---------------------------------------------------------------------------
// Simulation

/// One realization's simulator: expensive per-parameter setup (the elliptic
/// covariance factor) is done once, then run() draws one replication.
/// run() is const and safe to call from several threads with separate rngs.
class PreparedSimulator {
 public:
  PreparedSimulator(const ProblemSpec& problem, std::vector<double> params)
      : problem_(problem), params_(std::move(params)) {
    if (params_.size() != problem_.laws.size()) throw ShapeError("parameter vector width does not match problem laws");
    if (const auto* e = std::get_if<EllipticSpec>(&problem_.physics)) {
      RandomFieldSpec f;
      f.length_x = params_[0];
      f.length_y = params_[1];
      f.amplitude = e->amplitude;
      f.jitter = e->jitter;
      f.grid = e->grid;
      f.form = e->form;
      field_ = std::make_shared<LogNormalFieldSampler>(f);
    }
  }

  /// Values at query_locations(problem), in column order.
  std::vector<double> run(Rng& rng) const {
    const double lambda = params_[0];
    return std::visit(
        [&](const auto& s) -> std::vector<double> {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, VanDerPolSpec>) {
            return simulate_vdp(s, lambda, rng).states;
          } else if constexpr (std::is_same_v<S, Lorenz96Spec>) {
            const Trajectory tr = simulate_lorenz96(s, lambda, rng);
            std::vector<double> out;
            for (std::size_t k = 0; k < tr.length(); k += static_cast<std::size_t>(s.time_subsample)) {
              auto st = tr.state(k);
              out.insert(out.end(), st.begin(), st.end());
            }
            return out;
          } else if constexpr (std::is_same_v<S, BimodalSpec>) {
            StandardNormal normal;
            std::vector<double> out(static_cast<std::size_t>(s.x_points));
            for (int j = 0; j < s.x_points; ++j) out[j] = bimodal_sample(bimodal_x(s, j), lambda, rng, normal, s.sigma);
            return out;
          } else if constexpr (std::is_same_v<S, EllipticSpec>) {
            const Eigen::VectorXd u = elliptic_solve(field_->sample(rng), s.grid);
            return std::vector<double>(u.data(), u.data() + u.size());
          } else {
            std::vector<double> full;
            if constexpr (std::is_same_v<S, HeatSpec>)
              full = simulate_heat(s, lambda, rng);
            else
              full = simulate_burgers(s, lambda, rng);
            std::vector<double> out;
            for (std::size_t j = 0; j < full.size(); j += static_cast<std::size_t>(s.space_subsample)) out.push_back(full[j]);
            return out;
          }
        },
        problem_.physics);
  }

  const std::vector<double>& parameters() const { return params_; }

  /// Simulator invocations since construction (shared across copies).
  std::size_t calls() const { return *calls_; }
  std::vector<double> counted_run(Rng& rng) const {
    ++*calls_;
    return run(rng);
  }

 private:
  const ProblemSpec& problem_;
  std::vector<double> params_;
  std::shared_ptr<LogNormalFieldSampler> field_;
  std::shared_ptr<std::size_t> calls_ = std::make_shared<std::size_t>(0);
};

/// Master seed of the simulator noise streams; stream p drives design point p.
inline std::uint64_t noise_master(std::uint64_t design_seed) { return derive_seed(design_seed, 0x5111); }

/// Raw simulator outputs, one vector per design point (realization-major).
inline std::vector<std::vector<double>> simulate_design(const ProblemSpec& problem, const ExperimentalDesign& design,
                                                        int threads = 1) {
  const std::size_t R = static_cast<std::size_t>(design.replications);
  std::vector<std::vector<double>> out(design.size());
  const std::uint64_t master = noise_master(design.seed);
  parallel_for(design.realizations.size(), threads, [&](std::size_t i) {
    std::size_t p = i * R;
    try {
      PreparedSimulator sim(problem, design.realizations[i]);
      for (std::size_t r = 0; r < R; ++r, ++p) {
        Rng rng = make_stream(master, p);
        out[p] = sim.run(rng);
      }
    } catch (const Error& e) {
      throw DesignPointError(e, p);
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// JSON

inline Json physics_to_json(const Physics& ph) {
  return std::visit(
      [](const auto& s) -> Json {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, VanDerPolSpec>) {
          return {{"damping", s.damping}, {"restoring", s.restoring}, {"x0", s.x0}, {"y0", s.y0}, {"t_end", s.t_end},
                  {"dt", s.dt}, {"output_stride", s.output_stride}, {"noise", s.noise}};
        } else if constexpr (std::is_same_v<S, Lorenz96Spec>) {
          return {{"components", s.components}, {"forcing", s.forcing}, {"t_end", s.t_end}, {"dt", s.dt},
                  {"substeps", s.substeps}, {"perturbation", s.perturbation}, {"time_subsample", s.time_subsample}};
        } else if constexpr (std::is_same_v<S, BimodalSpec>) {
          return {{"sigma", s.sigma}, {"x_points", s.x_points}};
        } else if constexpr (std::is_same_v<S, EllipticSpec>) {
          return {{"grid", s.grid.nx}, {"amplitude", s.amplitude}, {"jitter", s.jitter},
                  {"kernel", s.form == MaternForm::kAnisotropic ? "anisotropic" : "verbatim"}};
        } else if constexpr (std::is_same_v<S, HeatSpec>) {
          return {{"diffusivity", s.diffusivity}, {"x_min", s.grid.x_min}, {"length", s.grid.length},
                  {"points", s.grid.points}, {"dt", s.dt}, {"t_end", s.t_end},
                  {"space_subsample", s.space_subsample}};
        } else {
          return {{"viscosity", s.viscosity}, {"x_min", s.grid.x_min}, {"length", s.grid.length},
                  {"points", s.grid.points}, {"dt", s.dt}, {"t_end", s.t_end},
                  {"space_subsample", s.space_subsample}, {"constants_seed", s.constants_seed},
                  {"constants",
                   {{"a0", s.constants.a0}, {"a1", s.constants.a1}, {"a2", s.constants.a2},
                    {"b1", s.constants.b1}, {"b2", s.constants.b2}, {"gamma", s.constants.gamma}}}};
        }
      },
      ph);
}

/// Applies the overrides in `j` (a "physics" object) to the defaults in `ph`.
inline void physics_from_json(const Json& j, Physics& ph, const std::string& path) {
  std::visit(
      [&](auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, VanDerPolSpec>) {
          check_keys(j, {"damping", "restoring", "x0", "y0", "t_end", "dt", "output_stride", "noise"}, path);
          read_field(j, "damping", s.damping, path);
          read_field(j, "restoring", s.restoring, path);
          read_field(j, "x0", s.x0, path);
          read_field(j, "y0", s.y0, path);
          read_field(j, "t_end", s.t_end, path);
          read_field(j, "dt", s.dt, path);
          read_field(j, "output_stride", s.output_stride, path);
          read_field(j, "noise", s.noise, path);
        } else if constexpr (std::is_same_v<S, Lorenz96Spec>) {
          check_keys(j, {"components", "forcing", "t_end", "dt", "substeps", "perturbation", "time_subsample"}, path);
          read_field(j, "components", s.components, path);
          read_field(j, "forcing", s.forcing, path);
          read_field(j, "t_end", s.t_end, path);
          read_field(j, "dt", s.dt, path);
          read_field(j, "substeps", s.substeps, path);
          read_field(j, "perturbation", s.perturbation, path);
          read_field(j, "time_subsample", s.time_subsample, path);
        } else if constexpr (std::is_same_v<S, BimodalSpec>) {
          check_keys(j, {"sigma", "x_points"}, path);
          read_field(j, "sigma", s.sigma, path);
          read_field(j, "x_points", s.x_points, path);
        } else if constexpr (std::is_same_v<S, EllipticSpec>) {
          check_keys(j, {"grid", "amplitude", "jitter", "kernel"}, path);
          int n = s.grid.nx;
          read_field(j, "grid", n, path);
          s.grid = CellGrid{n, n};
          read_field(j, "amplitude", s.amplitude, path);
          read_field(j, "jitter", s.jitter, path);
          std::string kernel = s.form == MaternForm::kAnisotropic ? "anisotropic" : "verbatim";
          read_field(j, "kernel", kernel, path);
          if (kernel == "anisotropic")
            s.form = MaternForm::kAnisotropic;
          else if (kernel == "verbatim")
            s.form = MaternForm::kVerbatim;
          else
            throw ConfigError(path + ".kernel: expected \"anisotropic\" or \"verbatim\"");
        } else {
          if constexpr (std::is_same_v<S, HeatSpec>) {
            check_keys(j, {"diffusivity", "x_min", "length", "points", "dt", "t_end", "space_subsample"}, path);
            read_field(j, "diffusivity", s.diffusivity, path);
          } else {
            check_keys(j,
                       {"viscosity", "x_min", "length", "points", "dt", "t_end", "space_subsample", "constants_seed",
                        "constants"},
                       path);
            read_field(j, "viscosity", s.viscosity, path);
            if (j.contains("constants_seed")) {
              read_field(j, "constants_seed", s.constants_seed, path);
              s.constants = draw_burgers_constants(s.constants_seed);
            }
            if (j.contains("constants")) {
              const Json& c = j.at("constants");
              const std::string cp = path + ".constants";
              check_keys(c, {"a0", "a1", "a2", "b1", "b2", "gamma"}, cp);
              read_field(c, "a0", s.constants.a0, cp);
              read_field(c, "a1", s.constants.a1, cp);
              read_field(c, "a2", s.constants.a2, cp);
              read_field(c, "b1", s.constants.b1, cp);
              read_field(c, "b2", s.constants.b2, cp);
              read_field(c, "gamma", s.constants.gamma, cp);
            }
          }
          read_field(j, "x_min", s.grid.x_min, path);
          read_field(j, "length", s.grid.length, path);
          read_field(j, "points", s.grid.points, path);
          read_field(j, "dt", s.dt, path);
          read_field(j, "t_end", s.t_end, path);
          read_field(j, "space_subsample", s.space_subsample, path);
          s.grid.validate();
        }
      },
      ph);
  query_locations(ProblemSpec{"", {}, ph});  // shape rules (dt | T, positive counts)
}

inline Json problem_to_json(const ProblemSpec& p) {
  Json laws = Json::array();
  for (const auto& l : p.laws) laws.push_back(l);
  return {{"name", p.name}, {"laws", laws}, {"physics", physics_to_json(p.physics)}};
}

// ---------------------------------------------------------------------------
// Dataset assembly

/// Runs the simulator once per design point and flattens every retained
/// output location into a row. Rows are ordered by design point, then query.
inline Dataset generate_dataset(const ProblemSpec& problem, const ExperimentalDesign& design, int threads = 1) {
  const Matrix queries = query_locations(problem);
  const auto outputs = simulate_design(problem, design, threads);
  Dataset d(branch_names(problem), decoder_names(problem), "y");
  d.reserve_rows(outputs.size() * static_cast<std::size_t>(queries.cols()));
  std::vector<double> dec(static_cast<std::size_t>(queries.rows()));
  for (std::size_t p = 0; p < outputs.size(); ++p) {
    if (outputs[p].size() != static_cast<std::size_t>(queries.cols()))
      throw ShapeError("simulator output length does not match query count");
    const auto b = branch_input(problem, design.parameters_of(p));
    for (Eigen::Index q = 0; q < queries.cols(); ++q) {
      for (Eigen::Index r = 0; r < queries.rows(); ++r) dec[r] = queries(r, q);
      d.add_row(b, dec, outputs[p][static_cast<std::size_t>(q)]);
    }
  }
  Json realizations = Json::array();
  for (const auto& v : design.realizations) realizations.push_back(v);
  d.provenance = {{"problem", problem_to_json(problem)},
                  {"design_seed", design.seed},
                  {"realizations", realizations},
                  {"replications", design.replications}};
  if (problem.is<HeatSpec>() || problem.is<BurgersSpec>())
    d.provenance["noise"] = "white-noise increment lambda*sqrt(dt/dx)*N(0,1) per grid point per step";
  return d;
}

}  // namespace mdnomad
