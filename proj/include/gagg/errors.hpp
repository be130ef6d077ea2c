#pragma once

#include <stdexcept>
#include <string>

namespace gagg {

// Base class for every error thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dimension mismatches and empty inputs where a nonempty matrix is required.
struct ShapeError : Error {
  using Error::Error;
};

// Invalid configuration values: bad ratios, head counts, unknown config keys.
struct ConfigError : Error {
  using Error::Error;
};

// Zero-norm data fed to an operation that must normalize it.
struct DegenerateInputError : Error {
  using Error::Error;
};

// Zero-norm trainable parameter (gPool projection, class-weight column).
struct DegenerateParameterError : Error {
  using Error::Error;
};

// Binary file problems: bad magic, unsupported version, truncation.
struct FormatError : Error {
  using Error::Error;
};

// Text file problems; carries the 1-based offending line number.
struct ParseError : Error {
  ParseError(const std::string& message, int line_number)
      : Error(message + " (line " + std::to_string(line_number) + ")"),
        line(line_number) {}
  int line;
};

// Evaluation failures: single-class score sets, non-finite objectives.
struct EvaluationError : Error {
  using Error::Error;
};

// Training broke down; carries the 0-based epoch index.
struct TrainingError : Error {
  TrainingError(const std::string& message, int epoch_index)
      : Error(message + " (epoch " + std::to_string(epoch_index) + ")"),
        epoch(epoch_index) {}
  int epoch;
};

}  // namespace gagg
