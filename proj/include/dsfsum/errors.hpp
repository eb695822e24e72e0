#pragma once

#include <stdexcept>

namespace dsf {

// Base class for all errors raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed content or a violated precondition. The CLI maps this to exit 1.
struct ValidationError : Error {
  using Error::Error;
};

// Missing, unreadable or unwritable files. The CLI maps this to exit 2.
struct IoError : Error {
  using Error::Error;
};

}  // namespace dsf
