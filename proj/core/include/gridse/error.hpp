#pragma once

#include <stdexcept>
#include <string>

namespace gridse {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A case, partition, plan or scenario document that violates its schema or
/// a model invariant. The message starts with the offending location.
class ModelError : public Error {
 public:
  using Error::Error;
};

class ObservabilityError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace gridse
