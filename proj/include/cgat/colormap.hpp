#pragma once

#include <array>
#include <cstdint>

namespace cgat {

struct Rgb8 {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb8&, const Rgb8&) = default;
};

const std::array<Rgb8, 256>& viridis_table();

/// Linear min-max lookup into the viridis table. A zero-width range maps
/// everything to the first entry.
Rgb8 map_to_color(double value, double lo, double hi);

}  // namespace cgat
