#pragma once

// Flat training table: one row per (design point, query location). Columns
// are branch inputs, then decoder inputs, then the scalar target.

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mdnomad/error.hpp"

namespace mdnomad {

class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<std::string> branch_names, std::vector<std::string> decoder_names, std::string target_name)
      : branch_names_(std::move(branch_names)),
        decoder_names_(std::move(decoder_names)),
        target_name_(std::move(target_name)) {
    if (branch_names_.empty() || decoder_names_.empty()) throw ConfigError("dataset needs branch and decoder columns");
  }

  std::size_t branch_width() const { return branch_names_.size(); }
  std::size_t decoder_width() const { return decoder_names_.size(); }
  std::size_t columns() const { return branch_width() + decoder_width() + 1; }
  std::size_t rows() const { return columns() == 1 ? 0 : values_.size() / columns(); }
  bool empty() const { return values_.empty(); }

  const std::vector<std::string>& branch_names() const { return branch_names_; }
  const std::vector<std::string>& decoder_names() const { return decoder_names_; }
  const std::string& target_name() const { return target_name_; }

  void reserve_rows(std::size_t n) { values_.reserve(n * columns()); }

  /// Appends one row; rejects non-finite values so the table stays clean.
  void add_row(std::span<const double> branch, std::span<const double> decoder, double target) {
    if (branch.size() != branch_width() || decoder.size() != decoder_width())
      throw ShapeError("dataset row width mismatch");
    auto push = [&](double v) {
      if (!std::isfinite(v)) throw InvalidOutputError("non-finite dataset value in row " + std::to_string(rows()));
      values_.push_back(v);
    };
    for (double v : branch) push(v);
    for (double v : decoder) push(v);
    push(target);
  }

  double branch(std::size_t row, std::size_t j) const { return values_[row * columns() + j]; }
  double decoder(std::size_t row, std::size_t j) const { return values_[row * columns() + branch_width() + j]; }
  double target(std::size_t row) const { return values_[row * columns() + columns() - 1]; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * columns(), columns()}; }

  const std::vector<double>& values() const { return values_; }

  /// Problem name, design seed, integrator settings; written as a sidecar.
  nlohmann::json provenance = nlohmann::json::object();

  /// Rows selected by index, same schema and provenance.
  Dataset subset(std::span<const std::size_t> indices) const {
    Dataset d(branch_names_, decoder_names_, target_name_);
    d.provenance = provenance;
    d.values_.reserve(indices.size() * columns());
    for (std::size_t i : indices) {
      auto r = row(i);
      d.values_.insert(d.values_.end(), r.begin(), r.end());
    }
    return d;
  }

 private:
  friend Dataset read_dataset_csv(const std::filesystem::path&, std::size_t);

  std::vector<std::string> branch_names_;
  std::vector<std::string> decoder_names_;
  std::string target_name_;
  std::vector<double> values_;
};

/// %.17g: round-trips every double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Header marks column roles with "b:", "d:" and "y:" prefixes.
inline void write_dataset_csv(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path.string());
  std::string header;
  for (const auto& n : d.branch_names()) header += "b:" + n + ",";
  for (const auto& n : d.decoder_names()) header += "d:" + n + ",";
  header += "y:" + d.target_name() + "\n";
  out << header;
  std::string line;
  for (std::size_t r = 0; r < d.rows(); ++r) {
    line.clear();
    auto row = d.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) line += ',';
      line += format_double(row[c]);
    }
    line += '\n';
    out << line;
  }
  if (!out) throw UsageError("failed writing " + path.string());
}

inline std::filesystem::path provenance_path(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension(".provenance.json");
  return p;
}

inline void write_dataset(const Dataset& d, const std::filesystem::path& csv) {
  write_dataset_csv(d, csv);
  std::ofstream side(provenance_path(csv), std::ios::binary);
  side << d.provenance.dump(2) << "\n";
}

inline Dataset read_dataset_csv(const std::filesystem::path& path, std::size_t expected_rows = 0) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open dataset " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw LoadError("header", "empty dataset file");
  std::vector<std::string> b, dnames;
  std::string target;
  {
    std::stringstream ss(header);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      if (cell.rfind("b:", 0) == 0) {
        b.push_back(cell.substr(2));
      } else if (cell.rfind("d:", 0) == 0) {
        dnames.push_back(cell.substr(2));
      } else if (cell.rfind("y:", 0) == 0) {
        target = cell.substr(2);
      } else {
        throw LoadError("header", "column '" + cell + "' lacks a b:/d:/y: role prefix");
      }
    }
  }
  if (target.empty()) throw LoadError("header", "no target column");
  Dataset d(b, dnames, target);
  if (expected_rows) d.reserve_rows(expected_rows);
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const char* p = line.c_str();
    std::size_t count = 0;
    while (*p) {
      char* end = nullptr;
      const double v = std::strtod(p, &end);
      if (end == p) throw LoadError("row " + std::to_string(lineno), "unparseable number");
      if (!std::isfinite(v)) throw LoadError("row " + std::to_string(lineno), "non-finite value");
      d.values_.push_back(v);
      ++count;
      p = end;
      if (*p == ',') ++p;
    }
    if (count != d.columns()) throw LoadError("row " + std::to_string(lineno), "wrong column count");
  }
  std::ifstream side(provenance_path(path));
  if (side) {
    try {
      d.provenance = nlohmann::json::parse(side);
    } catch (const nlohmann::json::exception& e) {
      throw LoadError("provenance", e.what());
    }
  }
  return d;
}

}  // namespace mdnomad
