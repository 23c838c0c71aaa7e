#pragma once

#include <filesystem>
#include <iosfwd>

#include "uwdl/measures.hpp"

namespace uwdl::io {

inline constexpr std::uint32_t kCubeVersion = 1;
inline constexpr std::uint32_t kLabelVersion = 1;

// "HSIC": magic, u32 version, u32 H, W, d, d f64 wavelengths, H*W*d f32
// reflectances. Little-endian, pixel-major, band-contiguous.
HsiCube read_cube(const std::filesystem::path& path);
void write_cube(const std::filesystem::path& path, const HsiCube& cube);
HsiCube read_cube(std::istream& in);
void write_cube(std::ostream& out, const HsiCube& cube);

// "HSIL": magic, u32 version, u32 H, W, then H*W u16 labels.
LabelMap read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const LabelMap& labels);
LabelMap read_labels(std::istream& in);
void write_labels(std::ostream& out, const LabelMap& labels);

// Little-endian primitive helpers shared with the checkpoint format.
void put_u32(std::ostream& out, std::uint32_t v);
void put_u64(std::ostream& out, std::uint64_t v);
void put_f64(std::ostream& out, double v);
void put_f32(std::ostream& out, float v);
std::uint32_t get_u32(std::istream& in);
std::uint64_t get_u64(std::istream& in);
double get_f64(std::istream& in);
float get_f32(std::istream& in);
void expect_magic(std::istream& in, const char (&magic)[5]);

}  // namespace uwdl::io
