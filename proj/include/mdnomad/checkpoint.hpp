#pragma once

// Checkpoint file: a JSON document. Layer shapes are explicit and every
// floating-point array is written with 17 significant digits, so a reloaded
// model reproduces forward outputs bit for bit.

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mdnomad/dataset.hpp"
#include "mdnomad/error.hpp"
#include "mdnomad/train.hpp"

namespace mdnomad {

namespace detail {

template <typename Range>
void emit_array(std::string& out, const Range& values) {
  out += '[';
  bool first = true;
  for (double v : values) {
    if (!first) out += ',';
    first = false;
    out += format_double(v);
  }
  out += ']';
}

inline void emit_network(std::string& out, const NetworkParams& p) {
  out += "{\"layer_sizes\":[";
  for (std::size_t k = 0; k < p.layer_sizes.size(); ++k) out += (k ? "," : "") + std::to_string(p.layer_sizes[k]);
  out += "],\"activation\":\"" + to_string(p.hidden_activation) + "\",\"weights\":[";
  for (std::size_t k = 0; k < p.layer_count(); ++k) {
    if (k) out += ',';
    const Matrix& w = p.weights()[k];
    std::vector<double> row_major;
    row_major.reserve(static_cast<std::size_t>(w.size()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) row_major.push_back(w(r, c));
    emit_array(out, row_major);
  }
  out += "],\"biases\":[";
  for (std::size_t k = 0; k < p.layer_count(); ++k) {
    if (k) out += ',';
    const Vector& b = p.biases()[k];
    emit_array(out, std::vector<double>(b.data(), b.data() + b.size()));
  }
  out += "]}";
}

inline void emit_scaling(std::string& out, const InputScaling& s) {
  out += "{\"shift\":";
  emit_array(out, s.shift);
  out += ",\"scale\":";
  emit_array(out, s.scale);
  out += '}';
}

inline void emit_model(std::string& out, const SurrogateModel& m) {
  out += "{\"components\":" + std::to_string(m.components) + ",\n    \"branch\":";
  emit_network(out, m.branch);
  out += ",\n    \"decoder\":";
  emit_network(out, m.decoder);
  out += ",\n    \"branch_scaling\":";
  emit_scaling(out, m.branch_scaling);
  out += ",\n    \"decoder_scaling\":";
  emit_scaling(out, m.decoder_scaling);
  out += '}';
}

inline const nlohmann::json& field(const nlohmann::json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw LoadError(path + "." + key, "missing field");
  return j.at(key);
}

inline std::vector<double> read_doubles(const nlohmann::json& j, const std::string& path) {
  if (!j.is_array()) throw LoadError(path, "expected an array of numbers");
  std::vector<double> v;
  v.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw LoadError(path + "[" + std::to_string(i) + "]", "expected a number");
    const double x = j[i].get<double>();
    if (!std::isfinite(x)) throw LoadError(path + "[" + std::to_string(i) + "]", "non-finite value");
    v.push_back(x);
  }
  return v;
}

inline NetworkParams read_network(const nlohmann::json& j, const std::string& path) {
  NetworkParams p;
  const auto& sizes = field(j, "layer_sizes", path);
  if (!sizes.is_array() || sizes.size() < 2) throw LoadError(path + ".layer_sizes", "need at least two sizes");
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    if (!sizes[k].is_number_integer() || sizes[k].get<int>() <= 0)
      throw LoadError(path + ".layer_sizes[" + std::to_string(k) + "]", "expected a positive integer");
    p.layer_sizes.push_back(sizes[k].get<int>());
  }
  try {
    p.hidden_activation = activation_from_string(field(j, "activation", path).get<std::string>());
  } catch (const std::exception& e) {
    throw LoadError(path + ".activation", e.what());
  }
  const auto& ws = field(j, "weights", path);
  const auto& bs = field(j, "biases", path);
  const std::size_t layers = p.layer_sizes.size() - 1;
  if (!ws.is_array() || ws.size() != layers) throw LoadError(path + ".weights", "wrong layer count");
  if (!bs.is_array() || bs.size() != layers) throw LoadError(path + ".biases", "wrong layer count");
  for (std::size_t k = 0; k < layers; ++k) {
    const std::string wp = path + ".weights[" + std::to_string(k) + "]";
    const std::string bp = path + ".biases[" + std::to_string(k) + "]";
    const auto w = read_doubles(ws[k], wp);
    const auto b = read_doubles(bs[k], bp);
    const int rows = p.layer_sizes[k + 1];
    const int cols = p.layer_sizes[k];
    if (w.size() != static_cast<std::size_t>(rows) * cols) throw LoadError(wp, "size does not match layer_sizes");
    if (b.size() != static_cast<std::size_t>(rows)) throw LoadError(bp, "size does not match layer_sizes");
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) m(r, c) = w[static_cast<std::size_t>(r) * cols + c];
    p.arrays.weights.push_back(std::move(m));
    p.arrays.biases.push_back(Eigen::Map<const Vector>(b.data(), rows));
  }
  return p;
}

inline SurrogateModel read_model(const nlohmann::json& j, const std::string& path) {
  SurrogateModel m;
  const auto& comps = field(j, "components", path);
  if (!comps.is_number_integer()) throw LoadError(path + ".components", "expected an integer");
  m.components = comps.get<int>();
  m.branch = read_network(field(j, "branch", path), path + ".branch");
  m.decoder = read_network(field(j, "decoder", path), path + ".decoder");
  const auto& bsc = field(j, "branch_scaling", path);
  const auto& dsc = field(j, "decoder_scaling", path);
  m.branch_scaling.shift = read_doubles(field(bsc, "shift", path + ".branch_scaling"), path + ".branch_scaling.shift");
  m.branch_scaling.scale = read_doubles(field(bsc, "scale", path + ".branch_scaling"), path + ".branch_scaling.scale");
  m.decoder_scaling.shift = read_doubles(field(dsc, "shift", path + ".decoder_scaling"), path + ".decoder_scaling.shift");
  m.decoder_scaling.scale = read_doubles(field(dsc, "scale", path + ".decoder_scaling"), path + ".decoder_scaling.scale");
  try {
    m.validate();
  } catch (const Error& e) {
    throw LoadError(path, e.what());
  }
  return m;
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& c) {
  std::string out;
  out += "{\n  \"format\": \"mdnomad-checkpoint\",\n  \"format_version\": " + std::to_string(c.format_version) + ",\n";
  nlohmann::json meta;
  meta["problem"] = c.problem;
  meta["config"] = c.config_echo;
  meta["best_epoch"] = c.history.best_epoch;
  meta["decoder_output_width"] = c.model.decoder.output_width();
  out += "  \"metadata\": " + meta.dump() + ",\n";
  out += "  \"history\": {\"train_nll\":";
  detail::emit_array(out, c.history.train_nll);
  out += ",\"validation_nll\":";
  detail::emit_array(out, c.history.validation_nll);
  out += ",\"initial_validation_nll\":" + format_double(c.history.initial_validation_nll);
  out += ",\"best_validation_nll\":" + format_double(c.history.best_validation_nll) + "},\n";
  out += "  \"model\": ";
  detail::emit_model(out, c.model);
  out += ",\n  \"final_model\": ";
  detail::emit_model(out, c.final_model);
  out += "\n}\n";
  return out;
}

inline Checkpoint parse_checkpoint(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw LoadError("<document>", std::string("malformed or truncated checkpoint: ") + e.what());
  }
  if (!j.is_object()) throw LoadError("<document>", "expected a JSON object");
  if (j.value("format", std::string{}) != "mdnomad-checkpoint") throw LoadError("format", "not an mdnomad checkpoint");
  const auto& ver = detail::field(j, "format_version", "");
  if (!ver.is_number_integer() || ver.get<int>() != kCheckpointFormatVersion)
    throw LoadError("format_version", "unsupported version " + ver.dump() + ", expected " +
                                          std::to_string(kCheckpointFormatVersion));
  Checkpoint c;
  const auto& meta = detail::field(j, "metadata", "");
  c.problem = meta.value("problem", std::string{});
  c.config_echo = meta.value("config", nlohmann::json::object());
  c.history.best_epoch = meta.value("best_epoch", 0);
  const auto& h = detail::field(j, "history", "");
  c.history.train_nll = detail::read_doubles(detail::field(h, "train_nll", "history"), "history.train_nll");
  c.history.validation_nll = detail::read_doubles(detail::field(h, "validation_nll", "history"), "history.validation_nll");
  c.history.initial_validation_nll = detail::field(h, "initial_validation_nll", "history").get<double>();
  c.history.best_validation_nll = detail::field(h, "best_validation_nll", "history").get<double>();
  c.model = detail::read_model(detail::field(j, "model", ""), "model");
  c.final_model = detail::read_model(detail::field(j, "final_model", ""), "final_model");
  return c;
}

/// Writes to a temporary sibling and renames, so a crash never leaves a
/// half-written checkpoint under `path`.
inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw UsageError("cannot write checkpoint " + path.string());
    out << serialize_checkpoint(c);
    if (!out) throw UsageError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace mdnomad
