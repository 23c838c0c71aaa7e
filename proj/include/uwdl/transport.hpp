#pragma once

#include <limits>
#include <vector>

#include "uwdl/measures.hpp"

namespace uwdl {

enum class TransportMode { balanced, unbalanced };

struct SinkhornConfig {
  double epsilon = 0.1;  // entropic regularization
  double tau = 1.0;      // marginal relaxation, unbalanced only
  int max_iters = 10000;
  double tolerance = 1e-9;  // l1 marginal residual
  // Scalings above this switch the solver to log-domain potentials.
  double stabilize_threshold = 1e30;
  bool force_log_domain = false;
  bool record_residuals = false;

  void validate(TransportMode mode) const;
};

struct TransportResult {
  Matrix plan;
  double cost = 0.0;
  int iterations = 0;
  double marginal_error = 0.0;
  bool converged = false;
  bool log_domain = false;
  std::vector<double> residuals;  // per iteration, when requested
};

// Generalized KL, sum a log(a/b) - a + b, with 0 log 0 = 0. Returns +inf when
// a has mass outside the support of b.
double kl_divergence(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

// sum x log x with 0 log 0 = 0.
double neg_entropy(const Eigen::Ref<const Matrix>& plan);

// Balanced: <C,X> + eps * sum X log X.
// Unbalanced: <C,X> + tau KL(X1|mu) + tau KL(X^T 1|nu) + eps KL(X|mu nu^T).
// Evaluation only, no constraints are enforced.
// The solvers take any nonnegative n x m ground cost; the CostMatrix
// overloads cover the usual shared-grid case.
double primal_cost(const Eigen::Ref<const Matrix>& plan, const Matrix& cost,
                   const Eigen::Ref<const Vector>& mu, const Eigen::Ref<const Vector>& nu,
                   double epsilon, double tau, TransportMode mode);

TransportResult solve_balanced(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                               const Matrix& cost, const SinkhornConfig& cfg);

TransportResult solve_unbalanced(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                 const Matrix& cost, const SinkhornConfig& cfg);

inline double primal_cost(const Eigen::Ref<const Matrix>& plan, const CostMatrix& cost,
                          const Eigen::Ref<const Vector>& mu, const Eigen::Ref<const Vector>& nu,
                          double epsilon, double tau, TransportMode mode) {
  return primal_cost(plan, cost.entries(), mu, nu, epsilon, tau, mode);
}

inline TransportResult solve_balanced(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                      const CostMatrix& cost, const SinkhornConfig& cfg) {
  return solve_balanced(mu, nu, cost.entries(), cfg);
}

inline TransportResult solve_unbalanced(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                        const CostMatrix& cost, const SinkhornConfig& cfg) {
  return solve_unbalanced(mu, nu, cost.entries(), cfg);
}

// log(sum exp(x)), -inf for an empty or all -inf input.
double log_sum_exp(const double* x, Eigen::Index n, Eigen::Index stride = 1);

}  // namespace uwdl
