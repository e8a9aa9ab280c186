#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace nmf {

/// Operand dimensions are incompatible.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Input violates a documented precondition (negative data, bad rank, ...).
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// An iterative kernel did not converge within its cap.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A closed-form update is undefined at the given point (e.g. zero column).
struct UndefinedUpdateError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Active-set NNLS exceeded its swap budget; carries the best iterate seen.
struct DegeneracyError : NumericError {
  DegeneracyError(const std::string& what, std::vector<double> best)
      : NumericError(what), best_iterate(std::move(best)) {}
  std::vector<double> best_iterate;
};

/// Malformed input file. `line` is 1-based for text formats; `offset` is a
/// byte offset for binary formats.
struct ParseError : std::runtime_error {
  ParseError(const std::string& what, std::size_t line_, std::size_t offset_)
      : std::runtime_error(what + " (line " + std::to_string(line_) +
                           ", offset " + std::to_string(offset_) + ")"),
        line(line_),
        offset(offset_) {}
  std::size_t line;
  std::size_t offset;
};

}  // namespace nmf
