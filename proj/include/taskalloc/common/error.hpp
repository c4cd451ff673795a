#pragma once

#include <stdexcept>
#include <string>

namespace taskalloc {

/// Malformed input: an index out of range, an unknown id, a broken config.
/// Distinct from in-world failures, which are reported as data.
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An enumeration oracle was asked to solve an instance beyond its bound.
class InstanceTooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace taskalloc
