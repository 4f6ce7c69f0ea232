#pragma once

#include <stdexcept>
#include <string>

namespace rsg {

/// Input data breaks a model invariant (bad scene, bad config value).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values or shape mismatches inside numeric code.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File access or schema problems.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rsg
