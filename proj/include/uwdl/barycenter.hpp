#pragma once

#include <limits>
#include <vector>

#include "uwdl/measures.hpp"
#include "uwdl/transport.hpp"

namespace uwdl {

inline constexpr double kBalancedTau = std::numeric_limits<double>::infinity();

struct BarycenterConfig {
  double epsilon = 0.1;
  double tau = 1000.0;  // kBalancedTau gives the balanced (mass-preserving) barycenter
  int inner_iters = 100;
  CostMatrix cost;
  bool force_log_domain = false;
  double stabilize_threshold = 1e30;

  bool balanced() const { return std::isinf(tau); }
  // Scaling exponent tau / (tau + eps).
  double exponent() const { return balanced() ? 1.0 : tau / (tau + epsilon); }
  // eps / (tau + eps); zero in the balanced limit.
  double mean_power() const { return balanced() ? 0.0 : epsilon / (tau + epsilon); }
  void validate() const;
};

// Throws unless all entries are >= 0 and sum to 1 within tol.
void validate_weights(const Eigen::Ref<const Vector>& lambda, double tol = 1e-6);

// atoms: d x k, one atom per column. Runs exactly cfg.inner_iters scaling
// iterations; switches to log-domain arithmetic when plain scalings overflow.
DiscreteMeasure barycenter(const Matrix& atoms, const Eigen::Ref<const Vector>& lambda,
                           const BarycenterConfig& cfg);

// lambdas: n x k, one weight vector per row. Returns n x d.
RowMatrix barycenter_batch(const Matrix& atoms, const RowMatrix& lambdas,
                           const BarycenterConfig& cfg);
// Single-threaded reference for barycenter_batch.
RowMatrix barycenter_batch_serial(const Matrix& atoms, const RowMatrix& lambdas,
                                  const BarycenterConfig& cfg);

// sum_j lambda_j UOT(p, atom_j), each term solved to convergence.
double barycenter_objective(const DiscreteMeasure& p, const Matrix& atoms,
                            const Eigen::Ref<const Vector>& lambda, const BarycenterConfig& cfg,
                            int solver_iters = 20000);

namespace kernel {

// Intermediates of one scaling iteration, kept for reverse-mode sweeps.
struct IterationRecord {
  Matrix kv;         // G v_prev
  Matrix u;          // (A / kv)^a
  Matrix log_ktu;    // log(G^T u)
  Vector log_q;      // power mean of log_ktu
};

struct Tape {
  std::vector<IterationRecord> iters;
};

// Log-domain counterpart; v_prev of iteration t is a (log_q - log_ktu) of t-1.
struct LogIterationRecord {
  Matrix log_kv;
  Matrix log_u;
  Matrix log_ktu;
  Vector log_q;
};

struct LogTape {
  std::vector<LogIterationRecord> iters;
};

// Plain-arithmetic forward pass with gibbs = exp(-C/eps). Returns false when a
// non-finite or over-threshold scaling appears; failed_iter then names it.
bool forward_plain(const Matrix& atoms, const Eigen::Ref<const Vector>& lambda,
                   const Matrix& gibbs, const BarycenterConfig& cfg, Vector& q, Tape* tape,
                   int* failed_iter = nullptr);

void forward_log(const Matrix& atoms, const Eigen::Ref<const Vector>& lambda,
                 const BarycenterConfig& cfg, Vector& q, LogTape* tape = nullptr);

// log of the weighted power mean (sum_j w_j x_j^beta)^(1/beta) from log x;
// beta = 0 is the weighted geometric mean.
double log_power_mean(const double* log_x, Eigen::Index stride, const Eigen::Ref<const Vector>& w,
                      double beta);

Matrix gibbs_kernel(const CostMatrix& cost, double epsilon);

}  // namespace kernel

}  // namespace uwdl
