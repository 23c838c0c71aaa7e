#pragma once

#include <cmath>
#include <random>

#include "uwdl/measures.hpp"

namespace fixtures {

using namespace uwdl;

inline Vector random_measure(std::mt19937_64& rng, Eigen::Index d, double lo = 0.05, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = u(rng);
  return v;
}

inline Vector random_probability(std::mt19937_64& rng, Eigen::Index d) {
  Vector v = random_measure(rng, d);
  return v / v.sum();
}

inline RowMatrix random_rows(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d, double lo = 0.05,
                             double hi = 1.0) {
  RowMatrix x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) = random_measure(rng, d, lo, hi).transpose();
  return x;
}

inline CostMatrix random_grid_cost(std::mt19937_64& rng, std::size_t d, double max_value = 1.0) {
  std::uniform_real_distribution<double> step(0.5, 1.5);
  std::vector<double> w(d);
  double x = 0.0;
  for (auto& wi : w) wi = (x += step(rng));
  return rescale_cost(build_cost(SupportGrid(w)), max_value);
}

// Three classes in vertical bands, each a bump at its own band position with
// pixel-wise brightness scaling and multiplicative noise. Class 0 pixels are
// a thin unlabeled border column.
struct SyntheticScene {
  HsiCube cube;
  LabelMap truth;
};

inline SyntheticScene synthetic_scene(std::uint32_t h = 30, std::uint32_t w = 30, std::size_t d = 32,
                                      std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> bright(0.6, 1.0), noise(0.95, 1.05);
  const double centers[3] = {0.2 * double(d), 0.5 * double(d), 0.8 * double(d)};
  const double scale[3] = {1.0, 0.7, 0.85};
  SyntheticScene s;
  s.cube.height = h;
  s.cube.width = w;
  std::vector<double> wl(d);
  for (std::size_t i = 0; i < d; ++i) wl[i] = 400.0 + 10.0 * double(i);
  s.cube.wavelengths = SupportGrid(wl);
  s.cube.reflectance.resize(Eigen::Index(h) * w, Eigen::Index(d));
  s.truth.height = h;
  s.truth.width = w;
  s.truth.labels.assign(std::size_t(h) * w, 0);
  for (std::uint32_t r = 0; r < h; ++r)
    for (std::uint32_t c = 0; c < w; ++c) {
      const std::size_t p = std::size_t(r) * w + c;
      const int cls = c == 0 ? 0 : int(std::min<std::uint32_t>(2, 3 * c / w));
      s.truth.labels[p] = c == 0 ? 0 : cls + 1;
      const double b = bright(rng) * scale[cls];
      for (std::size_t i = 0; i < d; ++i) {
        const double z = (double(i) - centers[cls]) / (0.08 * double(d));
        s.cube.reflectance(Eigen::Index(p), Eigen::Index(i)) = b * (0.02 + std::exp(-0.5 * z * z)) * noise(rng);
      }
    }
  return s;
}

}  // namespace fixtures
