#pragma once

// Exception hierarchy shared by every module. All failures derive from
// conj3::Error so callers can catch one type at the boundary.

#include <cstddef>
#include <stdexcept>
#include <string>

namespace conj3 {

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Parser failure; offset is a byte index into the source string.
struct ParseError : Error {
  std::size_t offset;
  ParseError(std::size_t off, const std::string& msg)
      : Error(msg + " at offset " + std::to_string(off)), offset(off) {}
};

// Evaluation left the domain of an elementary function (log of a
// non-positive value, |acos| argument >= 1, atan2(0,0), non-finite result).
struct DomainError : Error {
  explicit DomainError(const std::string& msg) : Error(msg) {}
};

// Division by a quantity whose value vanishes at the point.
struct DivisionByZero : Error {
  explicit DivisionByZero(const std::string& msg) : Error(msg) {}
};

// Gradient too small to orient a frame or normalize directions.
struct CriticalPointError : Error {
  explicit CriticalPointError(const std::string& msg) : Error(msg) {}
};

// Y vanishes (or is negative) where a distinct second branch is required.
struct DegenerateY : Error {
  explicit DegenerateY(const std::string& msg) : Error(msg) {}
};

// A solved direction fails its defining algebraic constraints.
struct ConstraintViolation : Error {
  explicit ConstraintViolation(const std::string& msg) : Error(msg) {}
};

// An operation was asked of the wrong classification branch.
struct WrongBranch : Error {
  explicit WrongBranch(const std::string& msg) : Error(msg) {}
};

// Branch continuation cannot decide between candidates.
struct AmbiguousBranch : Error {
  explicit AmbiguousBranch(const std::string& msg) : Error(msg) {}
};

// The tracked branch collapsed along a path (class change, Y -> 0).
struct BranchSwitch : Error {
  explicit BranchSwitch(const std::string& msg) : Error(msg) {}
};

// Path integration detected a non-closed direction field.
struct NonIntegrable : Error {
  explicit NonIntegrable(const std::string& msg) : Error(msg) {}
};

// A conformal map was evaluated at (or too near) one of its poles.
struct PoleError : Error {
  explicit PoleError(const std::string& msg) : Error(msg) {}
};

// Matrix-pair canonicalization failures.
struct NotLorentzian : Error {
  explicit NotLorentzian(const std::string& msg) : Error(msg) {}
};
struct NotSkew : Error {
  explicit NotSkew(const std::string& msg) : Error(msg) {}
};
struct IllConditioned : Error {
  explicit IllConditioned(const std::string& msg) : Error(msg) {}
};

// Least-squares system without enough independent data.
struct RankDeficient : Error {
  explicit RankDeficient(const std::string& msg) : Error(msg) {}
};

}  // namespace conj3
