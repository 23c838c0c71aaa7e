#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace uwdl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// A nonnegative mass vector on a SupportGrid. Total mass is unconstrained.
using DiscreteMeasure = Vector;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SupportGrid {
 public:
  explicit SupportGrid(std::vector<double> wavelengths);

  // 0, 1, ..., d-1; used when a dataset ships without wavelength metadata.
  static SupportGrid uniform(std::size_t d);

  std::size_t size() const { return wavelengths_.size(); }
  const std::vector<double>& wavelengths() const { return wavelengths_; }
  double operator[](std::size_t i) const { return wavelengths_[i]; }

 private:
  std::vector<double> wavelengths_;
};

// Symmetric, zero-diagonal, nonnegative d x d ground cost.
class CostMatrix {
 public:
  CostMatrix() = default;
  explicit CostMatrix(Matrix entries);

  const Matrix& entries() const { return entries_; }
  Eigen::Index size() const { return entries_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }
  double max() const { return entries_.maxCoeff(); }

 private:
  Matrix entries_;
};

struct HsiCube {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  SupportGrid wavelengths = SupportGrid::uniform(2);
  // H*W rows, one spectrum per row; pixel index = row * W + col.
  RowMatrix reflectance;

  std::size_t pixel_count() const { return std::size_t(height) * width; }
  std::size_t bands() const { return wavelengths.size(); }
  Vector pixel_totals() const { return reflectance.rowwise().sum(); }
  void validate() const;
};

struct LabelMap {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<int> labels;  // 0 = no ground truth

  std::size_t pixel_count() const { return std::size_t(height) * width; }
  int max_label() const;
  void validate() const;
};

CostMatrix build_cost(const SupportGrid& grid);

// Scales C so its largest entry equals max_value.
CostMatrix rescale_cost(const CostMatrix& cost, double max_value = 10.0);

// Divides every pixel by the largest pixel total in the cube.
HsiCube normalize_global(const HsiCube& cube);

// Rescales every pixel with positive mass to total mass 1 (balanced mode).
HsiCube normalize_per_pixel(const HsiCube& cube);

struct PixelSample {
  std::vector<std::size_t> indices;  // ascending
  RowMatrix measures;                // indices.size() x d
};

// Pixels eligible for sampling: positive total mass and, if labeled_only, a
// nonzero ground-truth label.
std::vector<std::size_t> sampling_pool(const HsiCube& cube, const LabelMap* labels,
                                       bool labeled_only);

PixelSample sample_pixels(const HsiCube& cube, const LabelMap& labels, std::size_t n,
                          std::uint64_t seed, bool labeled_only);

}  // namespace uwdl
