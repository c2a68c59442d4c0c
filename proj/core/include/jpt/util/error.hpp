#pragma once

#include <stdexcept>
#include <string>

namespace jpt {

// Base of every error the library throws. The CLI maps the subclasses onto
// exit codes: UsageError -> 1, DataError -> 2, ModelError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (files, requests, schemas).
class DataError : public Error {
 public:
  using Error::Error;
};

// Model-side failures: shape mismatches, bad checkpoints, provider failures.
class ModelError : public Error {
 public:
  using Error::Error;
};

}  // namespace jpt
