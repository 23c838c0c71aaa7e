#include "uwdl/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace uwdl::io {

namespace {

template <typename U>
void put_le(std::ostream& out, U v) {
  std::array<char, sizeof(U)> bytes;
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = char((v >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
  if (!out) throw Error("write failed");
}

template <typename U>
U get_le(std::istream& in) {
  std::array<unsigned char, sizeof(U)> bytes;
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw Error("unexpected end of file");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= U(bytes[i]) << (8 * i);
  return v;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace

void put_u32(std::ostream& out, std::uint32_t v) { put_le(out, v); }
void put_u64(std::ostream& out, std::uint64_t v) { put_le(out, v); }
void put_f64(std::ostream& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }
void put_f32(std::ostream& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v)); }
std::uint32_t get_u32(std::istream& in) { return get_le<std::uint32_t>(in); }
std::uint64_t get_u64(std::istream& in) { return get_le<std::uint64_t>(in); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get_le<std::uint64_t>(in)); }
float get_f32(std::istream& in) { return std::bit_cast<float>(get_le<std::uint32_t>(in)); }

void expect_magic(std::istream& in, const char (&magic)[5]) {
  char got[4];
  in.read(got, 4);
  if (!in || std::memcmp(got, magic, 4) != 0)
    throw Error(std::string("bad magic, expected ") + magic);
}

HsiCube read_cube(std::istream& in) {
  expect_magic(in, "HSIC");
  const auto version = get_u32(in);
  if (version != kCubeVersion) throw Error("unsupported HSIC version " + std::to_string(version));
  HsiCube cube;
  cube.height = get_u32(in);
  cube.width = get_u32(in);
  const auto d = get_u32(in);
  std::vector<double> w(d);
  for (auto& x : w) x = get_f64(in);
  cube.wavelengths = SupportGrid(std::move(w));
  cube.reflectance.resize(Eigen::Index(cube.pixel_count()), d);
  for (Eigen::Index p = 0; p < cube.reflectance.rows(); ++p)
    for (Eigen::Index b = 0; b < Eigen::Index(d); ++b) cube.reflectance(p, b) = get_f32(in);
  cube.validate();
  return cube;
}

void write_cube(std::ostream& out, const HsiCube& cube) {
  cube.validate();
  out.write("HSIC", 4);
  put_u32(out, kCubeVersion);
  put_u32(out, cube.height);
  put_u32(out, cube.width);
  put_u32(out, std::uint32_t(cube.bands()));
  for (double w : cube.wavelengths.wavelengths()) put_f64(out, w);
  for (Eigen::Index p = 0; p < cube.reflectance.rows(); ++p)
    for (Eigen::Index b = 0; b < cube.reflectance.cols(); ++b)
      put_f32(out, float(cube.reflectance(p, b)));
}

LabelMap read_labels(std::istream& in) {
  expect_magic(in, "HSIL");
  const auto version = get_u32(in);
  if (version != kLabelVersion) throw Error("unsupported HSIL version " + std::to_string(version));
  LabelMap map;
  map.height = get_u32(in);
  map.width = get_u32(in);
  map.labels.resize(map.pixel_count());
  for (auto& l : map.labels) {
    std::array<unsigned char, 2> b;
    in.read(reinterpret_cast<char*>(b.data()), 2);
    if (!in) throw Error("unexpected end of file");
    l = int(b[0]) | (int(b[1]) << 8);
  }
  return map;
}

void write_labels(std::ostream& out, const LabelMap& map) {
  map.validate();
  out.write("HSIL", 4);
  put_u32(out, kLabelVersion);
  put_u32(out, map.height);
  put_u32(out, map.width);
  for (int l : map.labels) {
    if (l > 0xFFFF) throw Error("label does not fit in 16 bits");
    const char b[2] = {char(l & 0xFF), char((l >> 8) & 0xFF)};
    out.write(b, 2);
  }
  if (!out) throw Error("write failed");
}

HsiCube read_cube(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_cube(in);
}

void write_cube(const std::filesystem::path& path, const HsiCube& cube) {
  auto out = open_out(path);
  write_cube(out, cube);
}

LabelMap read_labels(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_labels(in);
}

void write_labels(const std::filesystem::path& path, const LabelMap& labels) {
  auto out = open_out(path);
  write_labels(out, labels);
}

}  // namespace uwdl::io
