#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace agct {

enum class ErrorKind {
  invalid_argument,
  shape_mismatch,
  io,
  malformed_header,
  payload_size_mismatch,
  unknown_version,
  bad_magic,
  bad_toc,
  blob_length_mismatch,
  missing_parameter,
  no_head_found,
  empty_input,
  usage,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid argument";
    case ErrorKind::shape_mismatch: return "shape mismatch";
    case ErrorKind::io: return "io error";
    case ErrorKind::malformed_header: return "malformed header";
    case ErrorKind::payload_size_mismatch: return "payload size mismatch";
    case ErrorKind::unknown_version: return "unknown version";
    case ErrorKind::bad_magic: return "bad magic";
    case ErrorKind::bad_toc: return "corrupt table of contents";
    case ErrorKind::blob_length_mismatch: return "blob length mismatch";
    case ErrorKind::missing_parameter: return "missing parameter";
    case ErrorKind::no_head_found: return "no head found";
    case ErrorKind::empty_input: return "empty input";
    case ErrorKind::usage: return "usage error";
  }
  return "error";
}

/// Library-wide exception. `kind()` lets callers tell failure classes apart
/// without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace agct
