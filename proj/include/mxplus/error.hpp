// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mx {

enum class ErrorCode {
  non_finite_input,
  invalid_config,
  size_mismatch,
  shape_mismatch,
  nan_scale,
  variant_mismatch,
  empty_tensor,
  precision_overflow,
  io_failure,
  truncated,
  bad_magic,
  unknown_version,
  unknown_format,
  bad_dtype,
  usage,
  check_failed,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::non_finite_input: return "non_finite_input";
    case ErrorCode::invalid_config: return "invalid_config";
    case ErrorCode::size_mismatch: return "size_mismatch";
    case ErrorCode::shape_mismatch: return "shape_mismatch";
    case ErrorCode::nan_scale: return "nan_scale";
    case ErrorCode::variant_mismatch: return "variant_mismatch";
    case ErrorCode::empty_tensor: return "empty_tensor";
    case ErrorCode::precision_overflow: return "precision_overflow";
    case ErrorCode::io_failure: return "io_failure";
    case ErrorCode::truncated: return "truncated";
    case ErrorCode::bad_magic: return "bad_magic";
    case ErrorCode::unknown_version: return "unknown_version";
    case ErrorCode::unknown_format: return "unknown_format";
    case ErrorCode::bad_dtype: return "bad_dtype";
    case ErrorCode::usage: return "usage";
    case ErrorCode::check_failed: return "check_failed";
  }
  return "unknown";
}

/// Every failure in the library is reported as an Error carrying a stable
/// machine-readable code; the CLI prints that code on standard error.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mx
