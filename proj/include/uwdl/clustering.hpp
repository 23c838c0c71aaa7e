#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Sparse>

#include "uwdl/measures.hpp"

namespace uwdl {

using SparseMatrix = Eigen::SparseMatrix<double>;
using CountMatrix = Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic>;

struct KnnGraph {
  SparseMatrix adjacency;  // symmetric, binary, zero diagonal
  int neighbors = 0;
};

// Binary kNN graph under squared Euclidean distance between rows,
// symmetrized by max(W, W^T). Equal distances resolve to the lower index.
KnnGraph knn_graph(const RowMatrix& points, int neighbors);
KnnGraph knn_graph_serial(const RowMatrix& points, int neighbors);

// I - D^{-1/2} W D^{-1/2}, dense.
Matrix normalized_laplacian(const SparseMatrix& adjacency);

struct SpectralEmbedding {
  Matrix vectors;      // n x K, columns orthonormal
  Vector eigenvalues;  // K smallest, ascending
};

SpectralEmbedding spectral_embedding(const SparseMatrix& adjacency, int clusters);

struct KMeansOptions {
  int restarts = 10;
  int max_iters = 300;
};

struct KMeansResult {
  std::vector<int> labels;  // 1..K
  RowMatrix centers;
  double inertia = 0.0;
};

// k-means++ seeding, best inertia over restarts, deterministic per seed.
KMeansResult kmeans(const RowMatrix& points, int clusters, std::uint64_t seed,
                    const KMeansOptions& opts = {});

struct LabelMatch {
  // mapping[c] is the class matched to cluster c (1-based; index 0 unused);
  // 0 when the cluster was matched to a padding column.
  std::vector<int> mapping;
  long agreement = 0;
};

struct ClusterResult {
  std::vector<int> labels;          // 1..K
  std::vector<int> matched_labels;  // empty until matched
  CountMatrix confusion;            // clusters x classes, filled when matched
  SpectralEmbedding embedding;
};

ClusterResult spectral_cluster(const RowMatrix& weights, int neighbors, int clusters,
                               std::uint64_t seed);

// confusion(c-1, t-1) = #{i : pred_i = c, truth_i = t}; truth 0 is skipped.
CountMatrix confusion_matrix(const std::vector<int>& pred, const std::vector<int>& truth,
                             int clusters, int classes);

// Minimum-cost assignment of rows to columns (rows <= cols). Returns the
// column assigned to each row.
std::vector<int> solve_assignment(const Matrix& cost);

// Cluster -> class mapping maximizing total agreement over a square padded
// profit matrix. Pixels with truth 0 do not count.
LabelMatch hungarian_match(const std::vector<int>& pred, const std::vector<int>& truth);

std::vector<int> apply_mapping(const std::vector<int>& pred, const LabelMatch& match);

// Fraction of pixels with truth != 0 whose matched label equals the truth.
double accuracy(const std::vector<int>& matched_pred, const std::vector<int>& truth);

// Unweighted mean over nonempty clusters of majority-class count / cluster size.
double purity(const std::vector<int>& pred, const std::vector<int>& truth);

// Labels every unsampled pixel by majority vote over its `neighbors` nearest
// sampled pixels in l1 distance; ties go to the label seen first in
// nearest-first order.
LabelMap inpaint(const HsiCube& cube, const std::vector<std::size_t>& sampled_indices,
                 const std::vector<int>& sampled_labels, int neighbors = 10);
LabelMap inpaint_serial(const HsiCube& cube, const std::vector<std::size_t>& sampled_indices,
                        const std::vector<int>& sampled_labels, int neighbors = 10);

}  // namespace uwdl
