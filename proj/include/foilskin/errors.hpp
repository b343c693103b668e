#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace foilskin {

// Every failure raised by the library derives from Error. The harness maps
// the category to a process exit code.
enum class ErrorCategory { config, data, numerical, usage };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

struct GeometryError : Error {
  explicit GeometryError(const std::string& what)
      : Error(ErrorCategory::numerical, "degenerate geometry: " + what) {}
};

struct CalibrationError : Error {
  explicit CalibrationError(const std::string& what)
      : Error(ErrorCategory::data, "calibration: " + what) {}
};

struct UsageError : Error {
  explicit UsageError(const std::string& what)
      : Error(ErrorCategory::usage, what) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what)
      : Error(ErrorCategory::config, "config: " + what) {}
};

// Carries the 1-based line number of the offending row.
class ParseError : public Error {
 public:
  ParseError(std::string path, std::size_t line, const std::string& what)
      : Error(ErrorCategory::data,
              path + ":" + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct AlignmentError : Error {
  explicit AlignmentError(const std::string& what)
      : Error(ErrorCategory::data, "alignment: " + what) {}
};

struct DatasetError : Error {
  explicit DatasetError(const std::string& what)
      : Error(ErrorCategory::data, "dataset: " + what) {}
};

class TrainingError : public Error {
 public:
  TrainingError(std::size_t epoch, const std::string& what)
      : Error(ErrorCategory::numerical,
              "training diverged at epoch " + std::to_string(epoch) + ": " +
                  what),
        epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

struct MetricError : Error {
  explicit MetricError(const std::string& what)
      : Error(ErrorCategory::numerical, what) {}
};

}  // namespace foilskin
