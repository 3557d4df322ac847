#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nrm {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed arguments or data: out-of-range indices, shape mismatches,
/// alphabets that do not line up.
class InputError : public Error {
public:
  using Error::Error;
};

/// A task specification that cannot be turned into a reward machine
/// (unsupported formula construct, no accepting state, unsolvable grid).
class SpecError : public Error {
public:
  using Error::Error;
};

/// Text that could not be parsed. `position` is a 0-based character offset
/// for formulas and a 1-based line number for line-oriented files.
class ParseError : public InputError {
public:
  ParseError(const std::string &what, std::size_t position)
      : InputError(what + " (at " + std::to_string(position) + ")"),
        position_(position) {}

  [[nodiscard]] std::size_t position() const noexcept { return position_; }

private:
  std::size_t position_;
};

/// A non-finite value reached a loss.
class NumericError : public Error {
public:
  using Error::Error;
};

/// An API used out of order, e.g. stepping a finished episode.
class UsageError : public Error {
public:
  using Error::Error;
};

} // namespace nrm
