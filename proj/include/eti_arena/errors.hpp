#pragma once

#include <stdexcept>
#include <string>

namespace eti {

// Precondition or contract violation in a pure operation.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Base for everything that can go wrong while reading a model-produced trait
// profile. Carries the raw completion so callers can build a retry prompt.
class ProfileError : public std::runtime_error {
 public:
  ProfileError(const std::string& what, std::string raw)
      : std::runtime_error(what), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

class ParseError : public ProfileError {
 public:
  using ProfileError::ProfileError;
};

class SchemaError : public ProfileError {
 public:
  SchemaError(std::string trait, const std::string& what, std::string raw)
      : ProfileError(what, std::move(raw)), trait_(std::move(trait)) {}
  // Trait key (or group name) that violated the schema.
  const std::string& trait() const noexcept { return trait_; }

 private:
  std::string trait_;
};

class RangeError : public ProfileError {
 public:
  RangeError(std::string trait, const std::string& what, std::string raw)
      : ProfileError(what, std::move(raw)), trait_(std::move(trait)) {}
  const std::string& trait() const noexcept { return trait_; }

 private:
  std::string trait_;
};

// Profile store received an update older than its latest history entry.
class OrderError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Agent output could not be turned into an action after the retry budget.
class AgentOutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Live backend could not be reached or kept failing.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularDesign : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaVersionError : public std::runtime_error {
 public:
  SchemaVersionError(int found, int expected)
      : std::runtime_error("run log schema_version " + std::to_string(found) +
                           " is not supported (expected " +
                           std::to_string(expected) + ")"),
        found_(found),
        expected_(expected) {}
  int found() const noexcept { return found_; }
  int expected() const noexcept { return expected_; }

 private:
  int found_;
  int expected_;
};

}  // namespace eti
