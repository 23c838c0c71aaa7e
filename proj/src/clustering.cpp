#include "uwdl/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <utility>

#include <Eigen/Eigenvalues>

namespace uwdl {

namespace {

void check_points(const RowMatrix& points, int neighbors) {
  if (points.rows() < 2) throw Error("knn graph: need at least two points");
  if (neighbors < 1 || neighbors >= points.rows())
    throw Error("knn graph: neighbors must be in [1, n-1], got " + std::to_string(neighbors));
  if (!points.allFinite()) throw Error("knn graph: non-finite coordinates");
}

// Indices of the `count` smallest keys, nearest first, lower index on ties.
void nearest(std::vector<std::pair<double, Eigen::Index>>& scratch, std::size_t count,
             std::vector<Eigen::Index>& out) {
  std::partial_sort(scratch.begin(), scratch.begin() + std::ptrdiff_t(count), scratch.end());
  out.resize(count);
  for (std::size_t t = 0; t < count; ++t) out[t] = scratch[t].second;
}

KnnGraph knn_impl(const RowMatrix& points, int neighbors, bool parallel) {
  check_points(points, neighbors);
  const Eigen::Index n = points.rows();
  std::vector<std::vector<Eigen::Index>> nbrs(static_cast<std::size_t>(n));

  auto row = [&](Eigen::Index i, std::vector<std::pair<double, Eigen::Index>>& scratch) {
    scratch.clear();
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) scratch.emplace_back((points.row(i) - points.row(j)).squaredNorm(), j);
    nearest(scratch, std::size_t(neighbors), nbrs[std::size_t(i)]);
  };
  if (parallel) {
#pragma omp parallel
    {
      std::vector<std::pair<double, Eigen::Index>> scratch;
#pragma omp for schedule(static)
      for (Eigen::Index i = 0; i < n; ++i) row(i, scratch);
    }
  } else {
    std::vector<std::pair<double, Eigen::Index>> scratch;
    for (Eigen::Index i = 0; i < n; ++i) row(i, scratch);
  }

  std::vector<std::pair<Eigen::Index, Eigen::Index>> edges;
  edges.reserve(std::size_t(2 * n * neighbors));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j : nbrs[std::size_t(i)]) {
      edges.emplace_back(i, j);
      edges.emplace_back(j, i);
    }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(edges.size());
  for (const auto& [i, j] : edges) trips.emplace_back(i, j, 1.0);
  KnnGraph g;
  g.neighbors = neighbors;
  g.adjacency.resize(n, n);
  g.adjacency.setFromTriplets(trips.begin(), trips.end());
  return g;
}

double sq_dist(const RowMatrix& a, Eigen::Index i, const RowMatrix& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

struct Lloyd {
  std::vector<int> labels;
  RowMatrix centers;
  double inertia = 0.0;
};

RowMatrix seed_plus_plus(const RowMatrix& x, int k, std::mt19937_64& rng) {
  const Eigen::Index n = x.rows();
  RowMatrix centers(k, x.cols());
  std::vector<char> chosen(std::size_t(n), 0);
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  Eigen::Index first = pick(rng);
  centers.row(0) = x.row(first);
  chosen[std::size_t(first)] = 1;
  Vector d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = sq_dist(x, i, centers, 0);

  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index next = -1;
    if (total > 0.0) {
      std::uniform_real_distribution<double> unif(0.0, total);
      double r = unif(rng), acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        acc += d2[i];
        next = i;
        if (acc >= r) break;
      }
    }
    if (next < 0) {
      // Every point already coincides with a center; take an unchosen one.
      std::vector<Eigen::Index> rest;
      for (Eigen::Index i = 0; i < n; ++i)
        if (!chosen[std::size_t(i)]) rest.push_back(i);
      std::uniform_int_distribution<std::size_t> pr(0, rest.size() - 1);
      next = rest[pr(rng)];
    }
    chosen[std::size_t(next)] = 1;
    centers.row(c) = x.row(next);
    for (Eigen::Index i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(x, i, centers, c));
  }
  return centers;
}

Lloyd lloyd(const RowMatrix& x, RowMatrix centers, int max_iters) {
  const Eigen::Index n = x.rows();
  const int k = int(centers.rows());
  Lloyd out;
  out.labels.assign(std::size_t(n), -1);
  Vector best(n);
  for (int it = 0; it < max_iters; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int arg = 0;
      double bd = sq_dist(x, i, centers, 0);
      for (int c = 1; c < k; ++c) {
        const double dc = sq_dist(x, i, centers, c);
        if (dc < bd) bd = dc, arg = c;
      }
      best[i] = bd;
      if (out.labels[std::size_t(i)] != arg) changed = true, out.labels[std::size_t(i)] = arg;
    }
    if (!changed && it > 0) break;

    RowMatrix sums = RowMatrix::Zero(k, x.cols());
    std::vector<long> counts(std::size_t(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(out.labels[std::size_t(i)]) += x.row(i);
      ++counts[std::size_t(out.labels[std::size_t(i)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[std::size_t(c)] > 0) {
        centers.row(c) = sums.row(c) / double(counts[std::size_t(c)]);
        continue;
      }
      // Empty cluster: move it to the point farthest from its center.
      Eigen::Index far = 0;
      best.maxCoeff(&far);
      centers.row(c) = x.row(far);
      best[far] = 0.0;
    }
  }
  out.inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    int arg = 0;
    double bd = sq_dist(x, i, centers, 0);
    for (int c = 1; c < k; ++c) {
      const double dc = sq_dist(x, i, centers, c);
      if (dc < bd) bd = dc, arg = c;
    }
    out.labels[std::size_t(i)] = arg;
    out.inertia += bd;
  }
  out.centers = std::move(centers);
  return out;
}

LabelMap inpaint_impl(const HsiCube& cube, const std::vector<std::size_t>& idx,
                      const std::vector<int>& lab, int neighbors, bool parallel) {
  cube.validate();
  if (idx.empty()) throw Error("inpaint: no sampled pixels");
  if (idx.size() != lab.size()) throw Error("inpaint: sampled indices and labels differ in length");
  if (neighbors < 1) throw Error("inpaint: neighbors must be positive");
  const std::size_t total = cube.pixel_count();
  for (std::size_t s : idx)
    if (s >= total) throw Error("inpaint: sampled index " + std::to_string(s) + " is out of range");

  LabelMap out;
  out.height = cube.height;
  out.width = cube.width;
  out.labels.assign(total, 0);
  std::vector<char> sampled(total, 0);
  for (std::size_t t = 0; t < idx.size(); ++t) {
    out.labels[idx[t]] = lab[t];
    sampled[idx[t]] = 1;
  }
  const std::size_t kn = std::min<std::size_t>(std::size_t(neighbors), idx.size());
  const auto& X = cube.reflectance;

  auto pixel = [&](std::size_t p, std::vector<std::pair<double, Eigen::Index>>& scratch,
                   std::vector<Eigen::Index>& near) {
    if (sampled[p]) return;
    scratch.clear();
    for (std::size_t t = 0; t < idx.size(); ++t)
      scratch.emplace_back((X.row(Eigen::Index(p)) - X.row(Eigen::Index(idx[t]))).cwiseAbs().sum(),
                           Eigen::Index(t));
    nearest(scratch, kn, near);
    // Count votes; the first label to reach the top count in nearest-first
    // order wins ties.
    std::vector<std::pair<int, int>> votes;  // label, count
    for (Eigen::Index t : near) {
      const int l = lab[std::size_t(t)];
      auto it = std::find_if(votes.begin(), votes.end(), [&](auto& v) { return v.first == l; });
      if (it == votes.end())
        votes.emplace_back(l, 1);
      else
        ++it->second;
    }
    int winner = votes.front().first, count = votes.front().second;
    for (const auto& [l, c] : votes)
      if (c > count) winner = l, count = c;
    out.labels[p] = winner;
  };

  if (parallel) {
#pragma omp parallel
    {
      std::vector<std::pair<double, Eigen::Index>> scratch;
      std::vector<Eigen::Index> near;
#pragma omp for schedule(dynamic, 64)
      for (std::ptrdiff_t p = 0; p < std::ptrdiff_t(total); ++p) pixel(std::size_t(p), scratch, near);
    }
  } else {
    std::vector<std::pair<double, Eigen::Index>> scratch;
    std::vector<Eigen::Index> near;
    for (std::size_t p = 0; p < total; ++p) pixel(p, scratch, near);
  }
  return out;
}

}  // namespace

KnnGraph knn_graph(const RowMatrix& points, int neighbors) { return knn_impl(points, neighbors, true); }

KnnGraph knn_graph_serial(const RowMatrix& points, int neighbors) {
  return knn_impl(points, neighbors, false);
}

Matrix normalized_laplacian(const SparseMatrix& adjacency) {
  const Eigen::Index n = adjacency.rows();
  if (adjacency.cols() != n) throw Error("laplacian: adjacency must be square");
  Vector deg = Vector::Zero(n);
  for (Eigen::Index c = 0; c < adjacency.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(adjacency, c); it; ++it) deg[it.row()] += it.value();
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(deg[i] > 0.0)) throw Error("laplacian: vertex " + std::to_string(i) + " is isolated");
  const Vector inv_sqrt = deg.array().rsqrt();
  Matrix lap = Matrix::Identity(n, n);
  for (Eigen::Index c = 0; c < adjacency.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(adjacency, c); it; ++it)
      lap(it.row(), it.col()) -= inv_sqrt[it.row()] * it.value() * inv_sqrt[it.col()];
  return lap;
}

SpectralEmbedding spectral_embedding(const SparseMatrix& adjacency, int clusters) {
  if (clusters < 1 || clusters > adjacency.rows())
    throw Error("spectral embedding: cluster count must be in [1, n]");
  const Matrix lap = normalized_laplacian(adjacency);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(lap);
  if (eig.info() != Eigen::Success) throw Error("spectral embedding: eigensolver failed");
  SpectralEmbedding out;
  out.vectors = eig.eigenvectors().leftCols(clusters);
  out.eigenvalues = eig.eigenvalues().head(clusters);
  return out;
}

KMeansResult kmeans(const RowMatrix& points, int clusters, std::uint64_t seed,
                    const KMeansOptions& opts) {
  if (clusters < 1 || clusters > points.rows())
    throw Error("kmeans: cluster count must be in [1, n]");
  if (opts.restarts < 1 || opts.max_iters < 1) throw Error("kmeans: restarts and max_iters must be positive");
  std::mt19937_64 rng(seed);
  Lloyd best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < opts.restarts; ++r) {
    Lloyd run = lloyd(points, seed_plus_plus(points, clusters, rng), opts.max_iters);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  KMeansResult out;
  out.labels.resize(best.labels.size());
  for (std::size_t i = 0; i < best.labels.size(); ++i) out.labels[i] = best.labels[i] + 1;
  out.centers = std::move(best.centers);
  out.inertia = best.inertia;
  return out;
}

ClusterResult spectral_cluster(const RowMatrix& weights, int neighbors, int clusters,
                               std::uint64_t seed) {
  if (clusters < 1 || clusters > weights.rows())
    throw Error("spectral clustering: cluster count must be in [1, n], got " + std::to_string(clusters));
  const KnnGraph g = knn_graph(weights, neighbors);
  ClusterResult out;
  out.embedding = spectral_embedding(g.adjacency, clusters);
  const RowMatrix emb = out.embedding.vectors;
  out.labels = kmeans(emb, clusters, seed).labels;
  return out;
}

CountMatrix confusion_matrix(const std::vector<int>& pred, const std::vector<int>& truth,
                             int clusters, int classes) {
  if (pred.size() != truth.size()) throw Error("confusion matrix: label vectors differ in length");
  CountMatrix m = CountMatrix::Zero(clusters, classes);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] == 0) continue;
    if (pred[i] < 1 || pred[i] > clusters || truth[i] < 0 || truth[i] > classes)
      throw Error("confusion matrix: label out of range at position " + std::to_string(i));
    ++m(pred[i] - 1, truth[i] - 1);
  }
  return m;
}

LabelMatch hungarian_match(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size()) throw Error("matching: label vectors differ in length");
  int clusters = 0, classes = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 1) throw Error("matching: cluster labels must be positive");
    if (truth[i] < 0) throw Error("matching: class labels must be nonnegative");
    clusters = std::max(clusters, pred[i]);
    classes = std::max(classes, truth[i]);
  }
  LabelMatch out;
  out.mapping.assign(std::size_t(clusters) + 1, 0);
  if (clusters == 0 || classes == 0) return out;

  const CountMatrix conf = confusion_matrix(pred, truth, clusters, classes);
  const int s = std::max(clusters, classes);
  const double top = double(conf.maxCoeff());
  Matrix cost = Matrix::Constant(s, s, top);
  for (int c = 0; c < clusters; ++c)
    for (int t = 0; t < classes; ++t) cost(c, t) = top - double(conf(c, t));
  const std::vector<int> col = solve_assignment(cost);
  for (int c = 0; c < clusters; ++c) {
    const int t = col[std::size_t(c)];
    if (t < classes) {
      out.mapping[std::size_t(c) + 1] = t + 1;
      out.agreement += conf(c, t);
    }
  }
  return out;
}

std::vector<int> apply_mapping(const std::vector<int>& pred, const LabelMatch& match) {
  std::vector<int> out(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 1 || std::size_t(pred[i]) >= match.mapping.size())
      throw Error("apply mapping: cluster label out of range at position " + std::to_string(i));
    out[i] = match.mapping[std::size_t(pred[i])];
  }
  return out;
}

double accuracy(const std::vector<int>& matched_pred, const std::vector<int>& truth) {
  if (matched_pred.size() != truth.size()) throw Error("accuracy: label vectors differ in length");
  long hit = 0, total = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == 0) continue;
    ++total;
    hit += matched_pred[i] == truth[i];
  }
  if (total == 0) throw Error("accuracy: no labeled pixels");
  return double(hit) / double(total);
}

double purity(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size()) throw Error("purity: label vectors differ in length");
  int clusters = 0, classes = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] == 0) continue;
    clusters = std::max(clusters, pred[i]);
    classes = std::max(classes, truth[i]);
  }
  if (clusters == 0) throw Error("purity: no labeled pixels");
  const CountMatrix conf = confusion_matrix(pred, truth, clusters, classes);
  // Extended precision keeps small rational cases correctly rounded.
  long double sum = 0.0L;
  int used = 0;
  for (int c = 0; c < clusters; ++c) {
    const long size = conf.row(c).sum();
    if (size == 0) continue;
    sum += static_cast<long double>(conf.row(c).maxCoeff()) / static_cast<long double>(size);
    ++used;
  }
  return static_cast<double>(sum / used);
}

LabelMap inpaint(const HsiCube& cube, const std::vector<std::size_t>& sampled_indices,
                 const std::vector<int>& sampled_labels, int neighbors) {
  return inpaint_impl(cube, sampled_indices, sampled_labels, neighbors, true);
}

LabelMap inpaint_serial(const HsiCube& cube, const std::vector<std::size_t>& sampled_indices,
                        const std::vector<int>& sampled_labels, int neighbors) {
  return inpaint_impl(cube, sampled_indices, sampled_labels, neighbors, false);
}

}  // namespace uwdl
