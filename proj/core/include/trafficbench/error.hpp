#pragma once

#include <stdexcept>
#include <string>

namespace trafficbench {

/// Violated precondition of a public operation.
class ContractError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Input text does not follow the expected file format.
class FormatError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Input is well formed but carries values outside the domain (negative bytes, ...).
class ValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
  public:
    IoError(const std::string& path, const std::string& what)
        : std::runtime_error(path + ": " + what), path_(path) {}

    const std::string& path() const noexcept { return path_; }

  private:
    std::string path_;
};

/// A defense that needs historical motifs was handed an empty bank.
class EmptyBankError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class RegistrationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Wraps a failure raised inside a pipeline stage with the stage name.
class StageError : public std::runtime_error {
  public:
    StageError(std::string stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

  private:
    std::string stage_;
};

} // namespace trafficbench
