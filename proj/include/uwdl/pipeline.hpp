#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "uwdl/clustering.hpp"
#include "uwdl/wdl.hpp"

namespace uwdl {

using json = nlohmann::json;

// Error raised by a pipeline stage; what() reads "[stage] message (config <hash>)".
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& message, const std::string& config_hash = {});
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct RunConfig {
  std::filesystem::path cube_path;
  std::filesystem::path labels_path;
  std::filesystem::path output_dir;  // empty: nothing written

  std::size_t pixels = 1000;
  std::size_t atoms = 24;
  int clusters = 6;
  int neighbors = 25;
  double epsilon = 0.1;
  double tau = 1000.0;
  bool balanced = false;  // per-pixel probability normalization and balanced barycenters
  int iterations = 500;
  int inner_iters = 100;
  double learning_rate = 0.01;
  LossKind loss_kind = LossKind::quadratic;
  std::uint64_t seed = 0;
  double cost_max = 10.0;
  int inpaint_neighbors = 10;
  bool labeled_only = true;  // sample only pixels with ground truth

  void validate() const;
  // Hash of every field that affects results (paths and output_dir excluded).
  std::string hash() const;
};

json to_json(const RunConfig& cfg);
// Fields absent from j keep their value in base.
RunConfig run_config_from_json(const json& j, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

struct RunReport {
  RunConfig config;
  std::string config_hash;
  std::string status = "ok";  // "ok" or "failed"
  std::string error;
  double accuracy = 0.0;
  double purity = 0.0;
  std::vector<long> cluster_sizes;
  CountMatrix confusion;      // clusters x classes over the sampled pixels
  std::vector<int> mapping;   // cluster -> class, 0 when unmatched
  std::vector<double> loss_trace;
  double seconds = 0.0;
  std::string finished_at;    // UTC, ISO 8601

  json to_json() const;
  static RunReport from_json(const json& j);
};

// Working data after normalization and subsampling.
struct PreparedData {
  HsiCube cube;        // normalized
  LabelMap truth;
  CostMatrix cost;     // rescaled to cfg.cost_max
  PixelSample sample;
  std::vector<int> sample_truth;
};

PreparedData prepare(const RunConfig& cfg, const HsiCube& cube, const LabelMap& truth);
TrainConfig make_train_config(const RunConfig& cfg, const CostMatrix& cost);

struct ClusterOutcome {
  RunReport report;                // metrics fields filled
  std::vector<int> sample_labels;  // raw cluster ids of the sampled pixels
  LabelMap inpainted;              // cluster ids mapped to classes; unmatched clusters after them
};

// Spectral clustering, matching, metrics and in-painting from learned weights.
ClusterOutcome cluster_stage(const RunConfig& cfg, const PreparedData& data, const RowMatrix& weights);

// Full UBCSC run. Writes report.json, labels.hsil and the rendered maps into
// cfg.output_dir when it is set.
RunReport run_ubcsc(const RunConfig& cfg, const HsiCube& cube, const LabelMap& truth);
RunReport run_ubcsc(const RunConfig& cfg);

struct SweepGrid {
  std::vector<double> taus;
  std::vector<double> epsilons;
  std::vector<int> neighbors;
  std::vector<double> atom_multipliers;  // times the ground-truth class count
  std::vector<int> clusters;             // empty: base.clusters

  void validate() const;
  static SweepGrid paper();
};

json to_json(const SweepGrid& grid);
SweepGrid sweep_grid_from_json(const json& j);

struct SweepResult {
  std::vector<RunReport> reports;
  std::vector<bool> reused;  // loaded from a previous, completed run
  std::optional<std::size_t> best_accuracy;
  std::optional<std::size_t> best_purity;
};

std::vector<RunConfig> expand_grid(const SweepGrid& grid, const RunConfig& base, int classes);
std::uint64_t derive_seed(std::uint64_t base_seed, const RunConfig& cfg);

// Cartesian product of the grid. With base.output_dir set, each run is written
// to runs/<hash>/report.json as soon as it finishes and index.json is rewritten; runs
// already present with status "ok" are loaded instead of recomputed.
SweepResult run_sweep(const SweepGrid& grid, const RunConfig& base, const HsiCube& cube,
                      const LabelMap& truth,
                      const std::function<void(const RunReport&, bool reused)>& on_run = {});

struct GaussianDemo {
  std::vector<double> lambdas;
  std::vector<double> balanced_mass;
  std::vector<double> unbalanced_mass;
  RowMatrix balanced;    // steps x d
  RowMatrix unbalanced;  // steps x d
  Vector left, right;    // endpoint Gaussians
  std::vector<double> grid;
};

struct GaussianDemoConfig {
  int steps = 11;
  double tau = 0.5;
  double epsilon = 0.001;
  int bins = 64;
  double mean_left = 0.25;
  double mean_right = 0.75;
  double sigma = 0.06;
  int inner_iters = 2000;
};

GaussianDemo demo_gaussians(const GaussianDemoConfig& cfg = {});
void write_demo(const std::filesystem::path& dir, const GaussianDemo& demo);

// Half the l1 distance.
double total_variation(const Eigen::Ref<const Vector>& p, const Eigen::Ref<const Vector>& q);

// Palette color for a label; index 0 is black, labels above 16 wrap.
std::array<std::uint8_t, 3> palette_color(int label);
void write_ppm(const std::filesystem::path& path, const LabelMap& map);
// pred.ppm, truth.ppm and mismatch.ppm (white where truth != 0 and pred != truth).
void render_labels(const LabelMap& pred, const LabelMap& truth, const std::filesystem::path& dir);

struct Evaluation {
  double accuracy = 0.0;
  double purity = 0.0;
  LabelMatch match;
};
// Metrics of an arbitrary label map against ground truth over pixels with truth != 0.
Evaluation evaluate_labels(const LabelMap& pred, const LabelMap& truth);

}  // namespace uwdl
