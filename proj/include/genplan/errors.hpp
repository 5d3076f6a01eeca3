#pragma once

#include <stdexcept>
#include <string>

namespace genplan {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// PDDL front-end
struct SyntaxError : Error {
  SyntaxError(const std::string& what, int line, int column)
      : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + what),
        line(line),
        column(column) {}
  int line;
  int column;
};
struct UnsupportedFeature : Error {
  using Error::Error;
};
struct UnknownSymbol : Error {
  using Error::Error;
};
struct DomainMismatch : Error {
  using Error::Error;
};
struct InapplicableAction : Error {
  using Error::Error;
};

struct UnsolvableRelaxation : Error {
  using Error::Error;
};
struct UnsupportedDomain : Error {
  using Error::Error;
};
struct ArityError : Error {
  using Error::Error;
};

// Numerics
struct ShapeMismatch : Error {
  using Error::Error;
};
struct NonScalarLoss : Error {
  using Error::Error;
};
struct IndexError : Error {
  using Error::Error;
};
struct NumericalError : Error {
  using Error::Error;
};

struct NoApplicableActions : Error {
  using Error::Error;
};
struct LayoutMismatch : Error {
  using Error::Error;
};
struct BudgetExhausted : Error {
  using Error::Error;
};

// Command line and configuration
struct ConfigError : Error {
  using Error::Error;
};
struct MissingFile : Error {
  explicit MissingFile(const std::string& path) : Error("no such file: " + path), path(path) {}
  std::string path;
};

}  // namespace genplan
