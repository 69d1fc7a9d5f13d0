#pragma once

#include <stdexcept>
#include <string>

namespace wta {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Scenario geometry could not be satisfied (e.g. spacing rejection cap hit).
struct ScenarioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Degenerate geometry passed to a guidance function.
struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Closing velocity non-positive: the pair has no ballistic time of flight.
struct NoClosureError : SolverError {
  using SolverError::SolverError;
};

struct WeightsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  ParseError(const std::string& what, int line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_number(line) {}
  int line_number;
};

}  // namespace wta
