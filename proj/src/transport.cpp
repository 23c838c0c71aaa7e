#include "uwdl/transport.hpp"

#include <algorithm>
#include <cmath>

namespace uwdl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_measure(const Vector& m, const char* name) {
  for (Eigen::Index i = 0; i < m.size(); ++i)
    if (!(m[i] >= 0.0) || !std::isfinite(m[i]))
      throw Error(std::string(name) + " must be finite and nonnegative");
}

// Shared scaling core. X = diag(u) G diag(v) with G = exp(-C/eps);
// u = mu / (G v)^a, v = nu / (G^T u)^a, a = tau / (tau + eps) (a = 1 balanced).
// The unbalanced reference measure mu nu^T is carried by the mu, nu factors.
class ScalingSolver {
 public:
  ScalingSolver(const Vector& mu, const Vector& nu, const Matrix& cost,
                const SinkhornConfig& cfg, double exponent)
      : mu_(mu), nu_(nu), cost_(cost), cfg_(cfg), a_(exponent) {}

  TransportResult run() {
    TransportResult res;
    Vector u, v;
    int start = 0;
    if (!cfg_.force_log_domain) {
      const auto done = run_naive(res, u, v);
      if (done) return res;
      start = res.iterations;
    }
    run_log(res, u, v, start);
    return res;
  }

 private:
  double residual_naive(const Vector& u, const Vector& gv) const {
    double r = 0.0;
    for (Eigen::Index i = 0; i < mu_.size(); ++i) {
      const double lhs = u[i] > 0.0 ? u[i] * std::pow(gv[i], a_) : 0.0;
      r += std::abs(lhs - mu_[i]);
    }
    return r;
  }

  bool scalings_ok(const Vector& s, const Vector& mass) const {
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (!std::isfinite(s[i]) || s[i] > cfg_.stabilize_threshold) return false;
      if (mass[i] > 0.0 && !(s[i] > 0.0)) return false;
    }
    return true;
  }

  // Returns true when finished; false when the log domain should take over,
  // in which case u, v hold the last finite scalings (possibly empty).
  bool run_naive(TransportResult& res, Vector& u_out, Vector& v_out) {
    const Matrix kernel = (-cost_ / cfg_.epsilon).array().exp().matrix();
    const Eigen::Index n = mu_.size(), m = nu_.size();
    Vector u = Vector::Zero(n), v = Vector::Ones(m);
    for (Eigen::Index j = 0; j < m; ++j)
      if (nu_[j] == 0.0) v[j] = 0.0;
    Vector gv = kernel * v;

    for (int it = 1; it <= cfg_.max_iters; ++it) {
      Vector un(n), vn(m);
      for (Eigen::Index i = 0; i < n; ++i)
        un[i] = mu_[i] > 0.0 ? mu_[i] / std::pow(gv[i], a_) : 0.0;
      if (!scalings_ok(un, mu_)) return false;
      const Vector gtu = kernel.transpose() * un;
      for (Eigen::Index j = 0; j < m; ++j)
        vn[j] = nu_[j] > 0.0 ? nu_[j] / std::pow(gtu[j], a_) : 0.0;
      if (!scalings_ok(vn, nu_)) return false;

      u = std::move(un);
      v = std::move(vn);
      u_out = u;
      v_out = v;
      gv = kernel * v;
      res.iterations = it;
      res.marginal_error = residual_naive(u, gv);
      if (cfg_.record_residuals) res.residuals.push_back(res.marginal_error);
      if (res.marginal_error < cfg_.tolerance) {
        res.converged = true;
        break;
      }
    }
    res.plan = u.asDiagonal() * kernel * v.asDiagonal();
    res.log_domain = false;
    return true;
  }

  void run_log(TransportResult& res, const Vector& u0, const Vector& v0, int start) {
    const Eigen::Index n = mu_.size(), m = nu_.size();
    const Matrix neg_c = -cost_ / cfg_.epsilon;
    const Matrix neg_ct = neg_c.transpose();
    Vector log_mu = mu_.array().log(), log_nu = nu_.array().log();
    Vector f(n), g(m);
    if (u0.size() == n && v0.size() == m) {
      f = u0.array().log();
      g = v0.array().log();
    } else {
      f.setZero();
      g.setZero();
      for (Eigen::Index j = 0; j < m; ++j)
        if (nu_[j] == 0.0) g[j] = kNegInf;
    }

    Vector buf(std::max(n, m));
    auto lse_row = [&](Eigen::Index i, const Vector& pot) {
      for (Eigen::Index j = 0; j < m; ++j) buf[j] = neg_ct(j, i) + pot[j];
      return log_sum_exp(buf.data(), m);
    };
    auto lse_col = [&](Eigen::Index j, const Vector& pot) {
      for (Eigen::Index i = 0; i < n; ++i) buf[i] = neg_c(i, j) + pot[i];
      return log_sum_exp(buf.data(), n);
    };

    Vector row_lse(n);
    for (Eigen::Index i = 0; i < n; ++i) row_lse[i] = lse_row(i, g);
    res.converged = false;
    for (int it = start + 1; it <= cfg_.max_iters; ++it) {
      for (Eigen::Index i = 0; i < n; ++i)
        f[i] = mu_[i] > 0.0 ? log_mu[i] - a_ * row_lse[i] : kNegInf;
      for (Eigen::Index j = 0; j < m; ++j)
        g[j] = nu_[j] > 0.0 ? log_nu[j] - a_ * lse_col(j, f) : kNegInf;
      for (Eigen::Index i = 0; i < n; ++i) row_lse[i] = lse_row(i, g);

      double r = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double lhs = mu_[i] > 0.0 ? std::exp(f[i] + a_ * row_lse[i]) : 0.0;
        r += std::abs(lhs - mu_[i]);
      }
      res.iterations = it;
      res.marginal_error = r;
      if (cfg_.record_residuals) res.residuals.push_back(r);
      if (r < cfg_.tolerance) {
        res.converged = true;
        break;
      }
    }
    res.plan.resize(n, m);
    for (Eigen::Index j = 0; j < m; ++j)
      for (Eigen::Index i = 0; i < n; ++i)
        res.plan(i, j) = (f[i] == kNegInf || g[j] == kNegInf) ? 0.0 : std::exp(f[i] + neg_c(i, j) + g[j]);
    res.log_domain = true;
  }

  const Vector& mu_;
  const Vector& nu_;
  const Matrix& cost_;
  const SinkhornConfig& cfg_;
  double a_;
};

void check_shapes(const Vector& mu, const Vector& nu, const Matrix& cost) {
  if (mu.size() != cost.rows() || nu.size() != cost.cols())
    throw Error("measure sizes must match the cost matrix");
  if (cost.size() == 0) throw Error("empty cost matrix");
  if (!cost.allFinite() || cost.minCoeff() < 0.0) throw Error("cost entries must be finite and nonnegative");
}

}  // namespace

void SinkhornConfig::validate(TransportMode mode) const {
  if (!(epsilon > 0.0)) throw Error("epsilon must be positive");
  if (mode == TransportMode::unbalanced && !(tau > 0.0)) throw Error("tau must be positive");
  if (max_iters < 1) throw Error("max_iters must be at least 1");
  if (!(tolerance > 0.0)) throw Error("tolerance must be positive");
}

double log_sum_exp(const double* x, Eigen::Index n, Eigen::Index stride) {
  double mx = kNegInf;
  for (Eigen::Index i = 0; i < n; ++i) mx = std::max(mx, x[i * stride]);
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) s += std::exp(x[i * stride] - mx);
  return mx + std::log(s);
}

double kl_divergence(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] > 0.0) {
      if (!(b[i] > 0.0)) return std::numeric_limits<double>::infinity();
      s += a[i] * std::log(a[i] / b[i]) - a[i] + b[i];
    } else {
      s += b[i];
    }
  }
  return s;
}

double neg_entropy(const Eigen::Ref<const Matrix>& plan) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < plan.cols(); ++j)
    for (Eigen::Index i = 0; i < plan.rows(); ++i) {
      const double x = plan(i, j);
      if (x > 0.0) s += x * std::log(x);
    }
  return s;
}

double primal_cost(const Eigen::Ref<const Matrix>& plan, const Matrix& cost,
                   const Eigen::Ref<const Vector>& mu, const Eigen::Ref<const Vector>& nu,
                   double epsilon, double tau, TransportMode mode) {
  if (plan.rows() != mu.size() || plan.cols() != nu.size() || plan.rows() != cost.rows() ||
      plan.cols() != cost.cols())
    throw Error("primal_cost: shape mismatch");
  if (plan.size() > 0 && plan.minCoeff() < 0.0) throw Error("primal_cost: plan must be nonnegative");

  const double transport = (plan.array() * cost.array()).sum();
  if (mode == TransportMode::balanced) return transport + epsilon * neg_entropy(plan);

  const Vector rows = plan.rowwise().sum();
  const Vector cols = plan.colwise().sum().transpose();
  const Matrix ref = mu * nu.transpose();
  const double ent = kl_divergence(Eigen::Map<const Vector>(Matrix(plan).data(), plan.size()),
                                   Eigen::Map<const Vector>(ref.data(), ref.size()));
  return transport + tau * kl_divergence(rows, mu) + tau * kl_divergence(cols, nu) + epsilon * ent;
}

TransportResult solve_balanced(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                               const Matrix& cost, const SinkhornConfig& cfg) {
  cfg.validate(TransportMode::balanced);
  check_shapes(mu, nu, cost);
  check_measure(mu, "mu");
  check_measure(nu, "nu");
  const double tm = mu.sum(), tn = nu.sum();
  if (!(tm > 0.0) || !(tn > 0.0)) throw Error("solve_balanced: both measures need positive mass");
  if (std::abs(tm - tn) > 1e-9 * std::max(tm, tn))
    throw Error("solve_balanced: total masses differ");

  TransportResult res = ScalingSolver(mu, nu, cost, cfg, 1.0).run();
  res.cost = primal_cost(res.plan, cost, mu, nu, cfg.epsilon, 0.0, TransportMode::balanced);
  return res;
}

TransportResult solve_unbalanced(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                 const Matrix& cost, const SinkhornConfig& cfg) {
  cfg.validate(TransportMode::unbalanced);
  check_shapes(mu, nu, cost);
  check_measure(mu, "mu");
  check_measure(nu, "nu");
  const double tm = mu.sum(), tn = nu.sum();
  if (!(tm > 0.0) && !(tn > 0.0)) throw Error("solve_unbalanced: both measures are zero");

  TransportResult res;
  if (!(tm > 0.0) || !(tn > 0.0)) {
    res.plan = Matrix::Zero(mu.size(), nu.size());
    res.converged = true;
  } else {
    res = ScalingSolver(mu, nu, cost, cfg, cfg.tau / (cfg.tau + cfg.epsilon)).run();
  }
  res.cost = primal_cost(res.plan, cost, mu, nu, cfg.epsilon, cfg.tau, TransportMode::unbalanced);
  return res;
}

}  // namespace uwdl
