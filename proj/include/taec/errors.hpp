#pragma once

#include <stdexcept>
#include <string>

namespace taec {

// Bad or unreadable input data (files, manifests, dataset contents).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training diverged or a numerical routine failed to converge.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation called on an object whose state does not allow it,
// e.g. fitting a model on an empty cluster.
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A metric has no counted frames to average over.
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Exhaustive search refused because the instance is too large.
class ProblemTooLarge : public std::length_error {
 public:
  using std::length_error::length_error;
};

}  // namespace taec
