#include "uwdl/measures.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace uwdl {

SupportGrid::SupportGrid(std::vector<double> wavelengths) : wavelengths_(std::move(wavelengths)) {
  if (wavelengths_.size() < 2) throw Error("support grid needs at least 2 points");
  for (std::size_t i = 1; i < wavelengths_.size(); ++i) {
    if (!(wavelengths_[i] > wavelengths_[i - 1]))
      throw Error("support grid must be strictly increasing (index " + std::to_string(i) + ")");
  }
}

SupportGrid SupportGrid::uniform(std::size_t d) {
  std::vector<double> w(d);
  std::iota(w.begin(), w.end(), 0.0);
  return SupportGrid(std::move(w));
}

CostMatrix::CostMatrix(Matrix entries) : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols()) throw Error("cost matrix must be square");
  for (Eigen::Index i = 0; i < entries_.rows(); ++i) {
    if (entries_(i, i) != 0.0) throw Error("cost matrix must have a zero diagonal");
    for (Eigen::Index j = 0; j < i; ++j) {
      if (entries_(i, j) != entries_(j, i)) throw Error("cost matrix must be symmetric");
      if (entries_(i, j) < 0.0) throw Error("cost matrix must be nonnegative");
    }
  }
}

void HsiCube::validate() const {
  if (reflectance.rows() != Eigen::Index(pixel_count()) ||
      reflectance.cols() != Eigen::Index(bands()))
    throw Error("cube reflectance shape does not match H*W x d");
  if (reflectance.size() > 0 && reflectance.minCoeff() < 0.0)
    throw Error("cube reflectances must be nonnegative");
}

int LabelMap::max_label() const {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
}

void LabelMap::validate() const {
  if (labels.size() != pixel_count()) throw Error("label map size does not match H*W");
  for (int l : labels)
    if (l < 0) throw Error("labels must be nonnegative");
}

CostMatrix build_cost(const SupportGrid& grid) {
  const auto d = Eigen::Index(grid.size());
  Matrix c(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      const double diff = grid[i] - grid[j];
      c(i, j) = diff * diff;
    }
  return CostMatrix(std::move(c));
}

CostMatrix rescale_cost(const CostMatrix& cost, double max_value) {
  if (!(max_value > 0.0)) throw Error("rescale_cost: max_value must be positive");
  const double m = cost.size() > 0 ? cost.max() : 0.0;
  if (!(m > 0.0)) throw Error("rescale_cost: cost matrix has no positive entry");
  if (m == max_value) return cost;
  Matrix scaled = cost.entries() * (max_value / m);
  // Pin the corner entries so the maximum is exact.
  for (Eigen::Index i = 0; i < scaled.rows(); ++i)
    for (Eigen::Index j = 0; j < scaled.cols(); ++j)
      if (cost(i, j) == m) scaled(i, j) = max_value;
  return CostMatrix(std::move(scaled));
}

HsiCube normalize_global(const HsiCube& cube) {
  cube.validate();
  const Vector totals = cube.pixel_totals();
  const double m = totals.size() > 0 ? totals.maxCoeff() : 0.0;
  if (!(m > 0.0)) throw Error("normalize_global: cube has no pixel with positive mass");
  HsiCube out = cube;
  out.reflectance /= m;
  return out;
}

HsiCube normalize_per_pixel(const HsiCube& cube) {
  cube.validate();
  HsiCube out = cube;
  for (Eigen::Index p = 0; p < out.reflectance.rows(); ++p) {
    const double t = out.reflectance.row(p).sum();
    if (t > 0.0) out.reflectance.row(p) /= t;
  }
  return out;
}

std::vector<std::size_t> sampling_pool(const HsiCube& cube, const LabelMap* labels,
                                       bool labeled_only) {
  if (labeled_only && labels == nullptr) throw Error("labeled_only sampling needs a label map");
  if (labels && labels->pixel_count() != cube.pixel_count())
    throw Error("label map dimensions do not match the cube");
  std::vector<std::size_t> pool;
  pool.reserve(cube.pixel_count());
  for (std::size_t p = 0; p < cube.pixel_count(); ++p) {
    if (labeled_only && labels->labels[p] == 0) continue;
    if (!(cube.reflectance.row(Eigen::Index(p)).sum() > 0.0)) continue;
    pool.push_back(p);
  }
  return pool;
}

PixelSample sample_pixels(const HsiCube& cube, const LabelMap& labels, std::size_t n,
                          std::uint64_t seed, bool labeled_only) {
  std::vector<std::size_t> pool = sampling_pool(cube, &labels, labeled_only);
  if (n > pool.size())
    throw Error("sample_pixels: requested " + std::to_string(n) + " pixels from a pool of " +
                std::to_string(pool.size()));

  // Partial Fisher-Yates.
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(n);
  std::sort(pool.begin(), pool.end());

  PixelSample out;
  out.measures.resize(Eigen::Index(n), Eigen::Index(cube.bands()));
  for (std::size_t i = 0; i < n; ++i) out.measures.row(Eigen::Index(i)) = cube.reflectance.row(Eigen::Index(pool[i]));
  out.indices = std::move(pool);
  return out;
}

}  // namespace uwdl
