#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fbsvie {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: bad scenario fields, bad config files, bad arguments.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Evaluation outside the domain of a function (kernel triangle, log of a
// non-positive number, off-grid table lookups).
class DomainError : public Error {
 public:
  using Error::Error;
};

class PositivityError : public Error {
 public:
  PositivityError(std::size_t path, std::size_t node, double value);
  std::size_t path() const { return path_; }
  std::size_t node() const { return node_; }
  double value() const { return value_; }

 private:
  std::size_t path_;
  std::size_t node_;
  double value_;
};

class RegressionError : public Error {
 public:
  RegressionError(const std::string& what, double condition_number)
      : Error(what), condition_number_(condition_number) {}
  double condition_number() const { return condition_number_; }

 private:
  double condition_number_;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> distances)
      : Error(what), distances_(std::move(distances)) {}
  const std::vector<double>& distances() const { return distances_; }

 private:
  std::vector<double> distances_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace fbsvie
