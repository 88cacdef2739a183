#pragma once

#include <stdexcept>
#include <string>

namespace corner_sgd {

// Bad input: violated preconditions, malformed configs.
struct config_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// The numbers went wrong: singular samples, non-finite results.
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw config_error(what);
}

}  // namespace corner_sgd
