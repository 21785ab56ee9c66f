#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lsfm {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vector = VectorX<double>;
using Matrix = MatrixX<double>;
using Index = Eigen::Index;

// Bad user configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

// Dataset violates a structural invariant (CLI exit code 3). `row` is the
// 1-based line number in the offending file, or 0 when not file-backed.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what, long row = 0)
      : std::runtime_error(row > 0 ? what + " (row " + std::to_string(row) + ")" : what),
        message_(what),
        row_(row) {}
  long row() const { return row_; }
  const std::string& message() const { return message_; }

 private:
  std::string message_;
  long row_;
};

// Numerical breakdown inside a sampler block (CLI exit code 4).
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& block, const std::string& what, long iteration = -1)
      : std::runtime_error(format(block, what, iteration)),
        block_(block),
        detail_(what),
        iteration_(iteration) {}
  const std::string& block() const { return block_; }
  long iteration() const { return iteration_; }

  const std::string& detail() const { return detail_; }

  NumericalError at_iteration(long it) const { return NumericalError(block_, detail_, it); }

 private:
  static std::string format(const std::string& block, const std::string& what, long it) {
    std::string s = "numerical failure in " + block;
    if (it >= 0) s += " at iteration " + std::to_string(it);
    return s + ": " + what;
  }
  std::string block_;
  std::string detail_;
  long iteration_;
};

}  // namespace lsfm
