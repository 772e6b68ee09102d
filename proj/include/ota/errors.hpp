#pragma once

#include <stdexcept>
#include <string>

namespace ota {

// Shape/dimension contract violations between tensors.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad parameter values (rates, labels, config fields).
struct ValueError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File ingestion / parsing problems.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ota
