#pragma once

#include <stdexcept>

namespace commute {

// Raised for violated preconditions and unrecoverable I/O failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace commute
