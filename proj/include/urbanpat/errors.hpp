// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <stdexcept>

namespace urbanpat {

// Bad configuration or command-line usage. Reported before any work starts.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data that cannot be used: unreadable files, empty corpora, missing
// upstream stage artifacts.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An internal consistency check failed.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace urbanpat
