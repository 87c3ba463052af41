#pragma once

#include <stdexcept>
#include <string>

namespace stgat {

// Bad user input: malformed config, incompatible shapes in files, missing data.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem failures: unreadable, unwritable, truncated.
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical aborts: NaN/Inf gradients or weights mid-run.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace stgat
