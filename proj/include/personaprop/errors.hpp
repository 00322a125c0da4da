#pragma once

#include <stdexcept>
#include <string>

namespace personaprop {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : Error {
  using Error::Error;
};

struct BuildError : Error {
  using Error::Error;
};

struct IsolatedNodeError : Error {
  using Error::Error;
};

struct LabelerError : Error {
  using Error::Error;
};

struct DistributionError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace personaprop
