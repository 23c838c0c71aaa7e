#include "uwdl/barycenter.hpp"

#include <cmath>

namespace uwdl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_inputs(const Matrix& atoms, const Eigen::Ref<const Vector>& lambda,
                  const BarycenterConfig& cfg) {
  if (atoms.cols() == 0) throw Error("barycenter: no atoms");
  if (atoms.rows() != cfg.cost.size()) throw Error("barycenter: atoms do not match the cost grid");
  if (lambda.size() != atoms.cols()) throw Error("barycenter: weight length differs from atom count");
  if (atoms.minCoeff() < 0.0) throw Error("barycenter: atoms must be nonnegative");
  validate_weights(lambda);
}

bool within(const Matrix& m, double threshold) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double x = m.data()[i];
    if (!std::isfinite(x) || x > threshold) return false;
  }
  return true;
}

}  // namespace

void BarycenterConfig::validate() const {
  if (!(epsilon > 0.0)) throw Error("barycenter: epsilon must be positive");
  if (!(tau > 0.0)) throw Error("barycenter: tau must be positive");
  if (inner_iters < 1) throw Error("barycenter: inner_iters must be at least 1");
  if (cost.size() == 0) throw Error("barycenter: missing cost matrix");
}

void validate_weights(const Eigen::Ref<const Vector>& lambda, double tol) {
  if (lambda.size() == 0) throw Error("weight vector is empty");
  for (Eigen::Index j = 0; j < lambda.size(); ++j)
    if (!(lambda[j] >= 0.0)) throw Error("weights must be nonnegative");
  if (std::abs(lambda.sum() - 1.0) > tol) throw Error("weights must sum to 1");
}

namespace kernel {

Matrix gibbs_kernel(const CostMatrix& cost, double epsilon) {
  return (-cost.entries() / epsilon).array().exp().matrix();
}

double log_power_mean(const double* log_x, Eigen::Index stride, const Eigen::Ref<const Vector>& w,
                      double beta) {
  const Eigen::Index k = w.size();
  if (beta == 0.0) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < k; ++j)
      if (w[j] > 0.0) s += w[j] * log_x[j * stride];
    return s;
  }
  // log(sum w x^beta) / beta, written with expm1/log1p so small beta keeps
  // full precision.
  double s = 0.0;
  for (Eigen::Index j = 0; j < k; ++j)
    if (w[j] > 0.0) s += w[j] * std::expm1(beta * log_x[j * stride]);
  return std::log1p(s) / beta;
}

bool forward_plain(const Matrix& atoms, const Eigen::Ref<const Vector>& lambda,
                   const Matrix& gibbs, const BarycenterConfig& cfg, Vector& q, Tape* tape,
                   int* failed_iter) {
  const Eigen::Index d = atoms.rows(), k = atoms.cols();
  const double a = cfg.exponent();
  const double beta = cfg.mean_power();
  Matrix v = Matrix::Ones(d, k);
  Matrix kv(d, k), u(d, k), ktu(d, k), log_ktu(d, k);
  Vector log_q(d);
  if (tape) tape->iters.resize(std::size_t(cfg.inner_iters));

  for (int it = 0; it < cfg.inner_iters; ++it) {
    kv.noalias() = gibbs * v;
    u = (atoms.array() / kv.array()).pow(a);
    ktu.noalias() = gibbs.transpose() * u;
    log_ktu = ktu.array().log();
    for (Eigen::Index i = 0; i < d; ++i) log_q[i] = log_power_mean(&log_ktu(i, 0), d, lambda, beta);
    for (Eigen::Index j = 0; j < k; ++j)
      for (Eigen::Index i = 0; i < d; ++i)
        v(i, j) = std::exp(a * (log_q[i] - log_ktu(i, j)));

    if (!within(u, cfg.stabilize_threshold) || !within(v, cfg.stabilize_threshold) ||
        !log_q.allFinite()) {
      if (failed_iter) *failed_iter = it;
      return false;
    }
    if (tape) {
      auto& rec = tape->iters[std::size_t(it)];
      rec.kv = kv;
      rec.u = u;
      rec.log_ktu = log_ktu;
      rec.log_q = log_q;
    }
  }
  q = log_q.array().exp();
  return true;
}

void forward_log(const Matrix& atoms, const Eigen::Ref<const Vector>& lambda,
                 const BarycenterConfig& cfg, Vector& q, LogTape* tape) {
  const Eigen::Index d = atoms.rows(), k = atoms.cols();
  const double a = cfg.exponent();
  const double beta = cfg.mean_power();
  const Matrix neg_c = -cfg.cost.entries() / cfg.epsilon;  // symmetric
  const Matrix log_a = atoms.array().log();
  Matrix log_v = Matrix::Zero(d, k), log_u(d, k), log_ktu(d, k), log_kv(d, k);
  Vector log_q(d), buf(d);
  if (tape) tape->iters.resize(std::size_t(cfg.inner_iters));

  for (int it = 0; it < cfg.inner_iters; ++it) {
    for (Eigen::Index j = 0; j < k; ++j)
      for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index m = 0; m < d; ++m) buf[m] = neg_c(m, i) + log_v(m, j);
        log_kv(i, j) = log_sum_exp(buf.data(), d);
        log_u(i, j) = log_a(i, j) == kNegInf ? kNegInf : a * (log_a(i, j) - log_kv(i, j));
      }
    for (Eigen::Index j = 0; j < k; ++j)
      for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index m = 0; m < d; ++m) buf[m] = neg_c(m, i) + log_u(m, j);
        log_ktu(i, j) = log_sum_exp(buf.data(), d);
      }
    for (Eigen::Index i = 0; i < d; ++i) log_q[i] = log_power_mean(&log_ktu(i, 0), d, lambda, beta);
    for (Eigen::Index j = 0; j < k; ++j)
      for (Eigen::Index i = 0; i < d; ++i)
        if (log_q[i] == kNegInf)
          log_v(i, j) = kNegInf;
        else
          log_v(i, j) = log_ktu(i, j) == kNegInf ? 0.0 : a * (log_q[i] - log_ktu(i, j));
    if (tape) {
      auto& rec = tape->iters[std::size_t(it)];
      rec.log_kv = log_kv;
      rec.log_u = log_u;
      rec.log_ktu = log_ktu;
      rec.log_q = log_q;
    }
  }
  q = log_q.array().exp();
}

}  // namespace kernel

DiscreteMeasure barycenter(const Matrix& atoms, const Eigen::Ref<const Vector>& lambda,
                           const BarycenterConfig& cfg) {
  cfg.validate();
  check_inputs(atoms, lambda, cfg);
  Vector q;
  if (!cfg.force_log_domain) {
    const Matrix gibbs = kernel::gibbs_kernel(cfg.cost, cfg.epsilon);
    if (kernel::forward_plain(atoms, lambda, gibbs, cfg, q, nullptr)) return q;
  }
  kernel::forward_log(atoms, lambda, cfg, q);
  return q;
}

namespace {

RowMatrix batch_impl(const Matrix& atoms, const RowMatrix& lambdas, const BarycenterConfig& cfg,
                     bool parallel) {
  cfg.validate();
  if (lambdas.cols() != atoms.cols()) throw Error("barycenter_batch: weight width differs from atom count");
  for (Eigen::Index r = 0; r < lambdas.rows(); ++r) check_inputs(atoms, lambdas.row(r).transpose(), cfg);

  const Matrix gibbs = kernel::gibbs_kernel(cfg.cost, cfg.epsilon);
  const Eigen::Index n = lambdas.rows();
  RowMatrix out(n, atoms.rows());
  auto item = [&](Eigen::Index r) {
    const Vector lambda = lambdas.row(r).transpose();
    Vector q;
    if (cfg.force_log_domain || !kernel::forward_plain(atoms, lambda, gibbs, cfg, q, nullptr))
      kernel::forward_log(atoms, lambda, cfg, q);
    out.row(r) = q.transpose();
  };
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (Eigen::Index r = 0; r < n; ++r) item(r);
  } else {
    for (Eigen::Index r = 0; r < n; ++r) item(r);
  }
  return out;
}

}  // namespace

RowMatrix barycenter_batch(const Matrix& atoms, const RowMatrix& lambdas,
                           const BarycenterConfig& cfg) {
  return batch_impl(atoms, lambdas, cfg, true);
}

RowMatrix barycenter_batch_serial(const Matrix& atoms, const RowMatrix& lambdas,
                                  const BarycenterConfig& cfg) {
  return batch_impl(atoms, lambdas, cfg, false);
}

double barycenter_objective(const DiscreteMeasure& p, const Matrix& atoms,
                            const Eigen::Ref<const Vector>& lambda, const BarycenterConfig& cfg,
                            int solver_iters) {
  cfg.validate();
  check_inputs(atoms, lambda, cfg);
  SinkhornConfig sc;
  sc.epsilon = cfg.epsilon;
  sc.tau = cfg.balanced() ? 1.0 : cfg.tau;
  sc.max_iters = solver_iters;
  sc.tolerance = 1e-12;
  double total = 0.0;
  for (Eigen::Index j = 0; j < atoms.cols(); ++j) {
    if (lambda[j] == 0.0) continue;
    const Vector atom = atoms.col(j);
    const auto res = cfg.balanced() ? solve_balanced(p, atom, cfg.cost, sc)
                                    : solve_unbalanced(p, atom, cfg.cost, sc);
    total += lambda[j] * res.cost;
  }
  return total;
}

}  // namespace uwdl
