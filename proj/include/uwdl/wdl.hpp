#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "uwdl/barycenter.hpp"

namespace uwdl {

enum class LossKind { quadratic, tv, kl };

LossKind parse_loss_kind(const std::string& name);
std::string to_string(LossKind kind);

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Atoms as columns: d x k.
struct Dictionary {
  Matrix atoms;
};

struct WeightLogits {
  RowMatrix logits;  // n x k, unconstrained

  RowMatrix lambda() const;  // row-wise softmax
};

struct TrainConfig {
  LossKind loss_kind = LossKind::quadratic;
  double learning_rate = 0.01;
  int iterations = 500;
  std::uint64_t seed = 0;
  BarycenterConfig barycenter;
  AdamParams optimizer;
  double floor = 1e-15;
  // Initial atoms get uniform jitter in [0, init_jitter * max(X)).
  double init_jitter = 1e-3;

  void validate() const;
};

struct AdamMoments {
  Matrix m_atoms, v_atoms;
  RowMatrix m_logits, v_logits;
  long step = 0;
};

struct TrainState {
  Dictionary dictionary;
  WeightLogits weights;
  AdamMoments moments;
  std::vector<std::size_t> atom_sources;  // input rows the atoms were seeded from
};

struct Gradients {
  Matrix d_atoms;      // d x k
  RowMatrix d_logits;  // n x k
  double loss = 0.0;
};

struct TrainResult {
  Dictionary dictionary;
  RowMatrix weights;  // final softmax rows
  std::vector<double> loss_trace;
  TrainState state;
};

// X: n x d, one measure per row.
TrainState init_state(const RowMatrix& data, std::size_t k, std::uint64_t seed,
                      double jitter = 1e-3, double floor = 1e-15);

double reconstruction_loss(const RowMatrix& recon, const RowMatrix& data, LossKind kind);

// Derivative of reconstruction_loss with respect to recon.
RowMatrix reconstruction_loss_grad(const RowMatrix& recon, const RowMatrix& data, LossKind kind);

// Reverse-mode gradients of reconstruction_loss(barycenter_batch(D, softmax(logits)), X)
// through all unrolled scaling iterations.
Gradients gradients(const TrainState& state, const RowMatrix& data, const TrainConfig& cfg);
// Single-threaded reference; bit-identical to gradients().
Gradients gradients_serial(const TrainState& state, const RowMatrix& data, const TrainConfig& cfg);
// Central finite differences, for cross-checking only.
Gradients gradients_finite_difference(const TrainState& state, const RowMatrix& data,
                                      const TrainConfig& cfg, double step = 1e-5);

// Adam with bias correction, then floors the atoms at cfg.floor.
void adam_step(TrainState& state, const Gradients& grads, const TrainConfig& cfg);

using TrainCallback = std::function<void(int iteration, double loss, const TrainState&)>;

TrainResult train(const RowMatrix& data, std::size_t k, const TrainConfig& cfg,
                  const TrainCallback& on_iteration = {});
// Continues from an existing state (e.g. a checkpoint) for cfg.iterations more steps.
TrainResult train_from(TrainState state, const RowMatrix& data, const TrainConfig& cfg,
                       const TrainCallback& on_iteration = {});

// "UWDL" checkpoint: dictionary, logits, Adam moments, config and seed.
struct Checkpoint {
  TrainConfig config;
  TrainState state;
};
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace uwdl
