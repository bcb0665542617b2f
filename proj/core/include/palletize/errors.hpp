#pragma once

#include <stdexcept>
#include <string>

namespace palletize {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OutOfBoundsError : Error {
  using Error::Error;
};

struct HeightExceededError : Error {
  using Error::Error;
};

struct OverlapError : Error {
  using Error::Error;
};

struct EpisodeDoneError : Error {
  using Error::Error;
};

struct EmptyDatasetError : Error {
  using Error::Error;
};

struct EmptyMetricsError : Error {
  using Error::Error;
};

struct VersionMismatchError : Error {
  using Error::Error;
};

struct CorruptLogError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace palletize
