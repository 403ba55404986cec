#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mdnomad {

/// Coarse failure class. The CLI maps kUsage to exit code 2 and kNumerical
/// to exit code 3.
enum class ErrorClass { kUsage, kNumerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), class_(cls) {}
  ErrorClass error_class() const noexcept { return class_; }

 private:
  ErrorClass class_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorClass::kUsage, "config error: " + what) {}
};

struct UsageError : Error {
  explicit UsageError(const std::string& what) : Error(ErrorClass::kUsage, "usage error: " + what) {}
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& what) : Error(ErrorClass::kUsage, "shape error: " + what) {}
};

/// Checkpoint or dataset file that cannot be read back. `field` is a
/// dotted path into the document, e.g. "model.decoder.weights[2]".
struct LoadError : Error {
  LoadError(const std::string& field, const std::string& what)
      : Error(ErrorClass::kUsage, "load error at '" + field + "': " + what), field_path(field) {}
  std::string field_path;
};

struct InvalidOutputError : Error {
  explicit InvalidOutputError(const std::string& what)
      : Error(ErrorClass::kNumerical, "invalid network output: " + what) {}
};

/// Non-finite gradient, loss or parameter during optimisation.
struct DivergenceError : Error {
  DivergenceError(const std::string& where, std::ptrdiff_t layer, const std::string& what)
      : Error(ErrorClass::kNumerical,
              "training diverged (" + where + ", layer " + std::to_string(layer) + "): " + what),
        layer_index(layer) {}
  std::ptrdiff_t layer_index;
};

/// Simulator state became non-finite.
struct BlowUpError : Error {
  BlowUpError(const std::string& simulator, std::size_t step)
      : Error(ErrorClass::kNumerical,
              simulator + ": non-finite state at step " + std::to_string(step)),
        step_index(step) {}
  std::size_t step_index;
};

struct SolverError : Error {
  SolverError(const std::string& what, double residual)
      : Error(ErrorClass::kNumerical, "solver error: " + what + " (residual " + std::to_string(residual) + ")"),
        relative_residual(residual) {}
  double relative_residual;
};

struct DegenerateKernelError : Error {
  explicit DegenerateKernelError(const std::string& what)
      : Error(ErrorClass::kNumerical, "degenerate kernel: " + what) {}
};

struct MetricError : Error {
  explicit MetricError(const std::string& what) : Error(ErrorClass::kNumerical, "metric error: " + what) {}
};

/// Any simulator failure, tagged with the design point that raised it.
struct DesignPointError : Error {
  DesignPointError(const Error& cause, std::size_t point)
      : Error(cause.error_class(), "design point " + std::to_string(point) + ": " + cause.what()), point_index(point) {}
  std::size_t point_index;
};

}  // namespace mdnomad
