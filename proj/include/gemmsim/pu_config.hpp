#pragma once

#include <cstdint>
#include <string>

#include "gemmsim/common.hpp"

namespace gemmsim {

// Geometry and clocks of one processing unit (systolic array + URAM store).
struct PUConfig {
  std::string name = "pu2x";
  std::int64_t r_sa = 64;          // SA rows (one dot-product lane each)
  std::int64_t c_sa = 8;           // SA columns = weight bytes per URAM entry
  std::int64_t r_g = 8;            // row-block output chunk, bytes
  double f_fast = 600e6;           // SA / URAM clock
  double f_sys = 300e6;            // AXI system clock
  std::int64_t uram_blocks = 64;   // one URAM per SA row
  std::int64_t uram_depth = 4096;  // 72-bit entries per URAM
  std::int64_t sub_regions = 1;    // 2 on the half-width PU
  std::int64_t fill_cycles = 64 + 8 + 16;

  void validate() const {
    if (r_sa <= 0 || c_sa <= 0 || r_g <= 0)
      throw ConfigError("PU '" + name + "': r_sa, c_sa and r_g must be positive");
    if (r_sa % r_g != 0)
      throw ConfigError("PU '" + name + "': r_sa must be a multiple of r_g");
    if (f_sys <= 0 || f_fast != 2.0 * f_sys)
      throw ConfigError("PU '" + name + "': f_fast must be exactly twice f_sys");
    if (sub_regions != 1 && sub_regions != 2)
      throw ConfigError("PU '" + name + "': sub_regions must be 1 or 2");
    if (uram_depth < 0 || uram_blocks < 0 || fill_cycles < 0)
      throw ConfigError("PU '" + name + "': negative URAM geometry or fill");
  }
};

inline std::int64_t default_fill_cycles(std::int64_t r_sa, std::int64_t c_sa) {
  return r_sa + c_sa + 16;
}

// Full-width PU: 64x8 DSP array, one URAM region.
inline PUConfig pu_2x() {
  PUConfig pu;
  pu.name = "pu2x";
  pu.c_sa = 8;
  pu.sub_regions = 1;
  pu.fill_cycles = default_fill_cycles(pu.r_sa, pu.c_sa);
  return pu;
}

// Half-width PU: 64x4 DSP array; each URAM split into two 32-bit regions.
inline PUConfig pu_1x() {
  PUConfig pu;
  pu.name = "pu1x";
  pu.c_sa = 4;
  pu.sub_regions = 2;
  pu.fill_cycles = default_fill_cycles(pu.r_sa, pu.c_sa);
  return pu;
}

// Column-entry capacity of the URAM weight store, in C_SA-byte words.
inline std::int64_t uram_capacity(const PUConfig& pu) {
  return pu.uram_depth * pu.sub_regions;
}

// Peak INT8 throughput of the systolic array (2 ops per MAC).
inline double pu_tops(const PUConfig& pu) {
  return 2.0 * static_cast<double>(pu.r_sa * pu.c_sa) * pu.f_fast / 1e12;
}

}  // namespace gemmsim
