#include <fstream>

#include "uwdl/pipeline.hpp"

namespace uwdl {

namespace {

constexpr std::array<std::array<std::uint8_t, 3>, 17> kPalette = {{
    {0, 0, 0},       {230, 25, 75},   {60, 180, 75},  {255, 225, 25}, {0, 130, 200},
    {245, 130, 48},  {145, 30, 180},  {70, 240, 240}, {240, 50, 230}, {210, 245, 60},
    {250, 190, 212}, {0, 128, 128},   {220, 190, 255}, {170, 110, 40}, {255, 250, 200},
    {128, 0, 0},     {170, 255, 195},
}};

void write_rgb(const std::filesystem::path& path, std::uint32_t h, std::uint32_t w,
               const std::vector<std::uint8_t>& rgb) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("render: cannot open " + path.string() + " for writing");
  out << "P6\n" << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()), std::streamsize(rgb.size()));
  if (!out) throw Error("render: write to " + path.string() + " failed");
}

}  // namespace

std::array<std::uint8_t, 3> palette_color(int label) {
  if (label < 0) throw Error("render: negative label");
  if (label == 0) return kPalette[0];
  return kPalette[std::size_t((label - 1) % 16 + 1)];
}

void write_ppm(const std::filesystem::path& path, const LabelMap& map) {
  map.validate();
  std::vector<std::uint8_t> rgb;
  rgb.reserve(map.labels.size() * 3);
  for (int l : map.labels) {
    const auto c = palette_color(l);
    rgb.insert(rgb.end(), c.begin(), c.end());
  }
  write_rgb(path, map.height, map.width, rgb);
}

void render_labels(const LabelMap& pred, const LabelMap& truth, const std::filesystem::path& dir) {
  pred.validate();
  truth.validate();
  if (pred.height != truth.height || pred.width != truth.width)
    throw Error("render: predicted and ground-truth maps differ in shape");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("render: cannot create " + dir.string() + ": " + ec.message());

  write_ppm(dir / "pred.ppm", pred);
  write_ppm(dir / "truth.ppm", truth);
  std::vector<std::uint8_t> mask(pred.labels.size() * 3, 0);
  for (std::size_t i = 0; i < pred.labels.size(); ++i)
    if (truth.labels[i] != 0 && pred.labels[i] != truth.labels[i])
      mask[3 * i] = mask[3 * i + 1] = mask[3 * i + 2] = 255;
  write_rgb(dir / "mismatch.ppm", pred.height, pred.width, mask);
}

}  // namespace uwdl
