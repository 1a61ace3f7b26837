#pragma once

#include <stdexcept>
#include <string>

namespace pibdfc {

// Malformed or inconsistent input data (CLI exit code 2).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Loss of positive definiteness, impossible emissions and other failures of
// the numerical core (CLI exit code 3).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pibdfc
