#pragma once

#include <stdexcept>
#include <string>

namespace bilo {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed configuration, portfolio file or command line.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or rejected dataset.
class DataError : public Error {
 public:
  using Error::Error;
};

// A data-dependent bound was used before a task was bound, or binding failed.
class BindingError : public Error {
 public:
  using Error::Error;
};

// A learner or a categorical choice outside the natively implemented subset.
class UnsupportedError : public BindingError {
 public:
  using BindingError::BindingError;
};

// Wrong feature width or otherwise malformed call arguments.
class InputError : public Error {
 public:
  using Error::Error;
};

// AUC requested on labels of a single class.
class UndefinedAucError : public Error {
 public:
  using Error::Error;
};

// The budget ran out before a single evaluation completed.
class BudgetExhaustedError : public Error {
 public:
  using Error::Error;
};

}  // namespace bilo
