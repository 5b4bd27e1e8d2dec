#pragma once

#include <stdexcept>

namespace bobnet {

// File parsing and serialization failures. The CLI maps these to exit code 2;
// plain std::invalid_argument / std::runtime_error map to exit code 1.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bobnet
