#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pimpc {

// Bad caller-supplied values: non-finite inputs, wrong dimensions, invalid
// hyperparameters.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A model is not in a usable state (no receptive fields, untrained).
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed serialized data. `offset` is the byte (binary formats) or line
// (text formats) at which parsing failed.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pimpc
