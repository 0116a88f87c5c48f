#pragma once

#include <stdexcept>
#include <string>

namespace searchlab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed schema, inverted bounds, duplicate dimensions, ...
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Unreadable or malformed data files, pool misses, bad record lines.
class DataError : public Error {
 public:
  using Error::Error;
};

// Statistical preconditions not met (series too short, no eligible groups).
class AnalysisError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace searchlab
