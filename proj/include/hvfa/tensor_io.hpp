#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "hvfa/tensor.hpp"

namespace hvfa {

// HVFT binary tensor layout, all integers little-endian:
//   "HVFT" | u8 version=1 | u8 dtype=1 (f64) | u16 rank | rank x u64 extents |
//   row-major f64 payload
inline constexpr char kHvftMagic[4] = {'H', 'V', 'F', 'T'};
inline constexpr std::uint8_t kHvftVersion = 1;
inline constexpr std::uint8_t kHvftDtypeF64 = 1;

void write_hvft(std::ostream& out, const Tensor& t);
// Throws FormatError on bad magic/version/dtype, zero extents, or a payload
// whose length disagrees with the extents.
Tensor read_hvft(std::istream& in);

void save_hvft(const std::filesystem::path& path, const Tensor& t);
Tensor load_hvft(const std::filesystem::path& path);

}  // namespace hvfa
