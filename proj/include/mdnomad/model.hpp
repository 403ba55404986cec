#pragma once

// Mixture-density NOMAD surrogate: a branch network maps the parametric input
// to a latent vector, the decoder maps [latent | query location] to the raw
// mixture head.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mdnomad/error.hpp"
#include "mdnomad/mixture.hpp"
#include "mdnomad/nn.hpp"

namespace mdnomad {

/// Per-feature affine map x -> (x - shift) / scale.
struct InputScaling {
  std::vector<double> shift;
  std::vector<double> scale;

  static InputScaling identity(std::size_t width) {
    return InputScaling{std::vector<double>(width, 0.0), std::vector<double>(width, 1.0)};
  }

  /// Min-max to [-1, 1]. Constant features get scale 1.
  static InputScaling fit_min_max(const std::vector<double>& lo, const std::vector<double>& hi) {
    InputScaling s;
    for (std::size_t j = 0; j < lo.size(); ++j) {
      s.shift.push_back(0.5 * (lo[j] + hi[j]));
      const double half = 0.5 * (hi[j] - lo[j]);
      s.scale.push_back(half > 0.0 ? half : 1.0);
    }
    return s;
  }

  std::size_t width() const { return shift.size(); }

  void validate(std::size_t expected_width, const std::string& name) const {
    if (shift.size() != expected_width || scale.size() != expected_width)
      throw ShapeError(name + " scaling has " + std::to_string(shift.size()) + " features, expected " +
                       std::to_string(expected_width));
    for (std::size_t j = 0; j < scale.size(); ++j)
      if (!(scale[j] > 0.0) || !std::isfinite(scale[j]) || !std::isfinite(shift[j]))
        throw ConfigError(name + " scaling feature " + std::to_string(j) + " is invalid");
  }

  double apply(std::size_t j, double x) const { return (x - shift[j]) / scale[j]; }
};

struct ArchitectureConfig {
  std::vector<int> branch_hidden{64};  // widths between input and latent
  int latent_width = 64;
  std::vector<int> decoder_hidden{128, 128, 128};
  int components = 10;
  Activation activation = Activation::kTanh;
};

class SurrogateModel {
 public:
  NetworkParams branch;
  NetworkParams decoder;
  int components = 0;
  InputScaling branch_scaling;
  InputScaling decoder_scaling;

  int branch_input_width() const { return branch.input_width(); }
  int latent_width() const { return branch.output_width(); }
  int decoder_input_width() const { return decoder.input_width() - branch.output_width(); }

  /// Throws unless the wiring invariants hold.
  void validate() const {
    mdnomad::validate(branch);
    mdnomad::validate(decoder);
    if (components < 1) throw ConfigError("component count must be >= 1");
    if (decoder.output_width() != 3 * components)
      throw ShapeError("decoder output width " + std::to_string(decoder.output_width()) + " != 3m = " +
                       std::to_string(3 * components));
    if (decoder.input_width() <= branch.output_width())
      throw ShapeError("decoder input must be latent width plus at least one location feature");
    branch_scaling.validate(static_cast<std::size_t>(branch_input_width()), "branch");
    decoder_scaling.validate(static_cast<std::size_t>(decoder_input_width()), "decoder");
  }
};

/// Branch [d_b, hidden..., h], decoder [h + d_d, hidden..., 3m]. Identity input
/// scaling until train() fits it.
inline SurrogateModel make_model(int branch_inputs, int decoder_inputs, const ArchitectureConfig& arch,
                                 std::uint64_t seed) {
  if (branch_inputs < 1 || decoder_inputs < 1) throw ConfigError("model needs branch and decoder inputs");
  if (arch.components < 1) throw ConfigError("component count must be >= 1");
  if (arch.latent_width < 1) throw ConfigError("latent width must be positive");
  std::vector<int> b{branch_inputs};
  b.insert(b.end(), arch.branch_hidden.begin(), arch.branch_hidden.end());
  b.push_back(arch.latent_width);
  std::vector<int> d{arch.latent_width + decoder_inputs};
  d.insert(d.end(), arch.decoder_hidden.begin(), arch.decoder_hidden.end());
  d.push_back(3 * arch.components);
  SurrogateModel m;
  m.branch = network_init(b, arch.activation, derive_seed(seed, 1));
  m.decoder = network_init(d, arch.activation, derive_seed(seed, 2));
  m.components = arch.components;
  m.branch_scaling = InputScaling::identity(static_cast<std::size_t>(branch_inputs));
  m.decoder_scaling = InputScaling::identity(static_cast<std::size_t>(decoder_inputs));
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Forward evaluation

/// Branch network output for one parametric input.
inline Vector branch_latent(const SurrogateModel& m, std::span<const double> branch_input) {
  if (static_cast<int>(branch_input.size()) != m.branch_input_width())
    throw ShapeError("branch input has " + std::to_string(branch_input.size()) + " entries, model expects " +
                     std::to_string(m.branch_input_width()));
  Vector x(m.branch_input_width());
  for (int j = 0; j < x.size(); ++j) {
    if (!std::isfinite(branch_input[j])) throw UsageError("non-finite branch input");
    x(j) = m.branch_scaling.apply(j, branch_input[j]);
  }
  return network_forward_batch(m.branch, x);
}

/// Raw head outputs for a batch of decoder inputs (d_d x Q) sharing one latent.
inline Matrix decode_raw(const SurrogateModel& m, const Vector& latent, const Matrix& decoder_inputs) {
  if (latent.size() != m.latent_width()) throw ShapeError("latent width mismatch");
  if (decoder_inputs.rows() != m.decoder_input_width())
    throw ShapeError("decoder input has " + std::to_string(decoder_inputs.rows()) + " features, model expects " +
                     std::to_string(m.decoder_input_width()));
  if (!decoder_inputs.allFinite()) throw UsageError("non-finite decoder input");
  const Eigen::Index h = latent.size();
  Matrix in(h + decoder_inputs.rows(), decoder_inputs.cols());
  in.topRows(h) = latent.replicate(1, decoder_inputs.cols());
  for (Eigen::Index j = 0; j < decoder_inputs.rows(); ++j)
    in.row(h + j) = (decoder_inputs.row(j).array() - m.decoder_scaling.shift[j]) / m.decoder_scaling.scale[j];
  return network_forward_batch(m.decoder, in);
}

inline MixtureParams decode(const SurrogateModel& m, const Vector& latent, std::span<const double> decoder_input) {
  Matrix q = Eigen::Map<const Vector>(decoder_input.data(), static_cast<Eigen::Index>(decoder_input.size()));
  const Matrix raw = decode_raw(m, latent, q);
  return mixture_from_raw(Vector(raw.col(0)));
}

/// Mixture at one (parameter, location) query.
inline MixtureParams model_forward(const SurrogateModel& m, std::span<const double> branch_input,
                                   std::span<const double> decoder_input) {
  return decode(m, branch_latent(m, branch_input), decoder_input);
}

/// Mixtures at many locations (columns of `decoder_inputs`) for one parameter.
inline std::vector<MixtureParams> model_forward_grid(const SurrogateModel& m, std::span<const double> branch_input,
                                                     const Matrix& decoder_inputs) {
  const Matrix raw = decode_raw(m, branch_latent(m, branch_input), decoder_inputs);
  std::vector<MixtureParams> out;
  out.reserve(static_cast<std::size_t>(raw.cols()));
  for (Eigen::Index q = 0; q < raw.cols(); ++q) out.push_back(mixture_from_raw(Vector(raw.col(q))));
  return out;
}

// ---------------------------------------------------------------------------
// Batched training pass

struct ModelGradients {
  Gradients branch;
  Gradients decoder;
};

struct BatchPass {
  double loss = 0.0;
  ModelGradients gradients;
};

/// Scales the branch (d_b x B) and decoder (d_d x B) inputs of a batch in place.
inline void scale_batch(const SurrogateModel& m, Matrix& branch_in, Matrix& decoder_in) {
  for (Eigen::Index j = 0; j < branch_in.rows(); ++j)
    branch_in.row(j) = (branch_in.row(j).array() - m.branch_scaling.shift[j]) / m.branch_scaling.scale[j];
  for (Eigen::Index j = 0; j < decoder_in.rows(); ++j)
    decoder_in.row(j) = (decoder_in.row(j).array() - m.decoder_scaling.shift[j]) / m.decoder_scaling.scale[j];
}

/// Raw head outputs for already-scaled inputs; fills the caches when given.
inline Matrix model_raw_batch(const SurrogateModel& m, const Matrix& scaled_branch, const Matrix& scaled_decoder,
                              ForwardCache* branch_cache = nullptr, ForwardCache* decoder_cache = nullptr) {
  const Matrix latent = network_forward_batch(m.branch, scaled_branch, branch_cache);
  Matrix in(latent.rows() + scaled_decoder.rows(), latent.cols());
  in.topRows(latent.rows()) = latent;
  in.bottomRows(scaled_decoder.rows()) = scaled_decoder;
  return network_forward_batch(m.decoder, in, decoder_cache);
}

/// NLL over a batch of already-scaled inputs plus exact gradients with respect
/// to every branch and decoder parameter.
inline BatchPass model_nll_batch(const SurrogateModel& m, const Matrix& scaled_branch, const Matrix& scaled_decoder,
                                 std::span<const double> targets, LossReduction reduction) {
  ForwardCache bc, dc;
  const Matrix raw = model_raw_batch(m, scaled_branch, scaled_decoder, &bc, &dc);
  NllResult nll = nll_loss(raw, targets, reduction);
  BatchPass pass;
  pass.loss = nll.loss;
  BackwardResult dec = network_backward_batch(m.decoder, dc, nll.gradient);
  const Matrix latent_grad = dec.input_gradient.topRows(m.latent_width());
  BackwardResult br = network_backward_batch(m.branch, bc, latent_grad);
  pass.gradients.decoder = std::move(dec.parameter_gradients);
  pass.gradients.branch = std::move(br.parameter_gradients);
  return pass;
}

}  // namespace mdnomad
