#pragma once

#include <functional>
#include <stdexcept>
#include <string>

namespace ddse {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (sizes, domains, parameters).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A byte string could not be parsed (truncated, bad tag, oversize).
class DecodeError : public Error {
 public:
  using Error::Error;
};

/// The peer misbehaved or a protocol step was invoked in an invalid state.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Client-side bookkeeping disagrees with what the server returned.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class StorageError : public Error {
 public:
  using Error::Error;
};

// Warnings are non-fatal conditions the caller may want to audit
// (BF over capacity, delete of a never-added pair, revocation budget).
using WarningSink = std::function<void(const std::string&)>;

/// Replaces the process-wide warning sink and returns the previous one.
/// The default sink writes to stderr.
WarningSink set_warning_sink(WarningSink sink);
void warn(const std::string& message);

}  // namespace ddse
