#pragma once

#include <stdexcept>
#include <string>

namespace tiered {

// Base class for all failures raised by this library. The CLI maps the
// hierarchy onto process exit codes, so new error types should derive from
// one of the three classes below rather than from std::exception directly.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid or contradictory configuration (bad file, unknown key, value out
// of range). Exit code 1.
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

// Input data that is structurally valid but statistically unusable: an
// all-tie comparison set, a zero-variance calibration sample, an empty
// comparison set after tie dropping. Exit code 3. Callers that can continue
// past such inputs should catch this type specifically.
class DegenerateDataError : public Error {
public:
  explicit DegenerateDataError(const std::string& what) : Error(what) {}
};

}  // namespace tiered
