#include "hvfa/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "hvfa/errors.hpp"

namespace hvfa {

namespace {

template <typename U>
void put_le(std::ostream& out, U v) {
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename U>
U get_le(std::istream& in, const char* what) {
  unsigned char buf[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(U))) {
    throw FormatError(std::string("HVFT: truncated ") + what);
  }
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void write_hvft(std::ostream& out, const Tensor& t) {
  out.write(kHvftMagic, 4);
  put_le<std::uint8_t>(out, kHvftVersion);
  put_le<std::uint8_t>(out, kHvftDtypeF64);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(t.rank()));
  for (auto e : t.shape()) put_le<std::uint64_t>(out, e);
  for (double v : t.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw FormatError("HVFT: write failed");
}

Tensor read_hvft(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kHvftMagic, 4) != 0) {
    throw FormatError("HVFT: bad magic");
  }
  const auto version = get_le<std::uint8_t>(in, "version");
  if (version != kHvftVersion) throw FormatError("HVFT: unsupported version " + std::to_string(version));
  const auto dtype = get_le<std::uint8_t>(in, "dtype");
  if (dtype != kHvftDtypeF64) throw FormatError("HVFT: unsupported dtype " + std::to_string(dtype));
  const auto rank = get_le<std::uint16_t>(in, "rank");
  if (rank == 0) throw FormatError("HVFT: rank must be at least 1");
  Shape shape(rank);
  for (auto& e : shape) {
    e = get_le<std::uint64_t>(in, "extent");
    if (e == 0) throw FormatError("HVFT: zero extent");
  }
  const std::size_t n = shape_numel(shape);
  if (const auto here = in.tellg(); here != std::streampos(-1)) {
    in.seekg(0, std::ios::end);
    const auto remaining = static_cast<std::uint64_t>(in.tellg() - here);
    in.seekg(here);
    if (remaining != n * sizeof(double)) {
      throw FormatError("HVFT: payload is " + std::to_string(remaining) + " bytes, extents need " +
                        std::to_string(n * sizeof(double)));
    }
  }
  std::vector<double> values(n);
  for (auto& v : values) v = std::bit_cast<double>(get_le<std::uint64_t>(in, "payload"));
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("HVFT: trailing bytes after payload");
  return Tensor::from(std::move(shape), std::move(values));
}

void save_hvft(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("HVFT: cannot open " + path.string() + " for writing");
  write_hvft(out, t);
}

Tensor load_hvft(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("HVFT: cannot open " + path.string());
  try {
    return read_hvft(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace hvfa
