#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace satislice {

// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kData = 3,
  kStage = 4,
};

/// Invalid or missing configuration (bad flag, missing file, bad parameter).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data that violates a schema or domain invariant.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;

  DataError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what),
        line_(line) {}

  // 1-based line number, 0 when the error is not tied to a line.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_ = 0;
};

/// A pipeline stage could not run (missing upstream artifact, numerical failure).
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace satislice
