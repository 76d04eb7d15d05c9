#pragma once

#include <stdexcept>
#include <string>

namespace n3map {

// Malformed or unreadable input data (scans, poses, PLY, map files).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A query fell outside the allocated part of the feature grid.
class OutOfMapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss or parameter during optimization.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or arguments.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace n3map
