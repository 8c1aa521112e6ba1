#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gemmsim {

// ADM transfers must be a multiple of this many bytes.
inline constexpr std::int64_t kAdmAlignBytes = 32;

constexpr std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
  return (a + b - 1) / b;
}

constexpr std::int64_t round_up(std::int64_t a, std::int64_t b) {
  return ceil_div(a, b) * b;
}

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input files or inconsistent configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Tensor or matrix dimensions that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A layer the in-FPGA IM2COL unit cannot stream (commands below the
// 32-byte minimum). Callers fall back to the host-side GEMM path.
class Im2colUnsupported : public Error {
 public:
  using Error::Error;
};

}  // namespace gemmsim
