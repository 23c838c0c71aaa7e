#include "uwdl/wdl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace uwdl {

LossKind parse_loss_kind(const std::string& name) {
  if (name == "quadratic") return LossKind::quadratic;
  if (name == "tv") return LossKind::tv;
  if (name == "kl") return LossKind::kl;
  throw Error("unknown loss kind '" + name + "' (expected quadratic, tv or kl)");
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::quadratic: return "quadratic";
    case LossKind::tv: return "tv";
    case LossKind::kl: return "kl";
  }
  return "?";
}

RowMatrix WeightLogits::lambda() const {
  RowMatrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - mx).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

void TrainConfig::validate() const {
  if (iterations < 1) throw Error("train: iterations must be at least 1");
  if (!(learning_rate > 0.0)) throw Error("train: learning_rate must be positive");
  if (!(floor > 0.0)) throw Error("train: floor must be positive");
  barycenter.validate();
}

TrainState init_state(const RowMatrix& data, std::size_t k, std::uint64_t seed, double jitter,
                      double floor) {
  const auto n = std::size_t(data.rows());
  if (k < 1) throw Error("init_state: need at least one atom");
  if (k > n) throw Error("init_state: more atoms (" + std::to_string(k) + ") than inputs (" +
                         std::to_string(n) + ")");
  std::mt19937_64 rng(seed);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  order.resize(k);

  TrainState st;
  st.atom_sources = order;
  const Eigen::Index d = data.cols();
  const double scale = jitter * std::max(data.maxCoeff(), 0.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  st.dictionary.atoms.resize(d, Eigen::Index(k));
  for (std::size_t j = 0; j < k; ++j)
    for (Eigen::Index b = 0; b < d; ++b)
      st.dictionary.atoms(b, Eigen::Index(j)) =
          std::max(data(Eigen::Index(order[j]), b) + scale * unif(rng), floor);

  std::normal_distribution<double> normal(0.0, 1.0);
  st.weights.logits.resize(Eigen::Index(n), Eigen::Index(k));
  for (Eigen::Index r = 0; r < st.weights.logits.rows(); ++r)
    for (Eigen::Index c = 0; c < st.weights.logits.cols(); ++c) st.weights.logits(r, c) = normal(rng);

  st.moments.m_atoms = Matrix::Zero(d, Eigen::Index(k));
  st.moments.v_atoms = Matrix::Zero(d, Eigen::Index(k));
  st.moments.m_logits = RowMatrix::Zero(Eigen::Index(n), Eigen::Index(k));
  st.moments.v_logits = RowMatrix::Zero(Eigen::Index(n), Eigen::Index(k));
  return st;
}

namespace {

void check_same_shape(const RowMatrix& a, const RowMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error("reconstruction_loss: shape mismatch");
}

double item_loss(const Vector& p, const Eigen::Ref<const Vector>& x, LossKind kind) {
  switch (kind) {
    case LossKind::quadratic: return (p - x).squaredNorm();
    case LossKind::tv: return (p - x).cwiseAbs().sum();
    case LossKind::kl: return kl_divergence(x, p);
  }
  return 0.0;
}

Vector item_loss_grad(const Vector& p, const Eigen::Ref<const Vector>& x, LossKind kind) {
  switch (kind) {
    case LossKind::quadratic: return 2.0 * (p - x);
    case LossKind::tv: return (p - x).unaryExpr([](double z) { return double((z > 0) - (z < 0)); });
    case LossKind::kl: {
      Vector g(p.size());
      for (Eigen::Index i = 0; i < p.size(); ++i) g[i] = 1.0 - (x[i] > 0.0 ? x[i] / p[i] : 0.0);
      return g;
    }
  }
  return Vector();
}

// Reverse sweep over a log-domain tape, used when plain scalings overflow.
// Adjoints are carried for the log quantities; every kernel weight
// exp(-C/eps + log x - log Kx) lies in [0, 1].
double item_backward_log(const Matrix& atoms, const Eigen::Ref<const Vector>& lambda,
                         const Eigen::Ref<const Vector>& target, const TrainConfig& cfg,
                         Eigen::Index item, Matrix& d_atoms, Vector& lambda_bar) {
  const BarycenterConfig& bc = cfg.barycenter;
  const Eigen::Index d = atoms.rows(), k = atoms.cols();
  const double a = bc.exponent();
  const double beta = bc.mean_power();
  const Matrix neg_c = -bc.cost.entries() / bc.epsilon;
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  kernel::LogTape tape;
  Vector q;
  kernel::forward_log(atoms, lambda, bc, q, &tape);
  for (int it = 0; it < bc.inner_iters; ++it)
    if (tape.iters[std::size_t(it)].log_q.hasNaN() || tape.iters[std::size_t(it)].log_ktu.hasNaN())
      throw Error("gradients: non-finite barycenter scaling at inner iteration " + std::to_string(it) +
                  " for item " + std::to_string(item));

  const double loss = item_loss(q, target, cfg.loss_kind);
  const Vector q_bar = item_loss_grad(q, target, cfg.loss_kind);

  Vector log_q_bar = q_bar.cwiseProduct(q);
  Matrix lv_bar = Matrix::Zero(d, k), lktu_bar(d, k), lu_bar(d, k), lkv_bar(d, k);
  Matrix la_bar = Matrix::Zero(d, k);

  for (int it = bc.inner_iters - 1; it >= 0; --it) {
    const auto& rec = tape.iters[std::size_t(it)];
    if (it != bc.inner_iters - 1) log_q_bar.setZero();

    // log_v = a (log_q - log_ktu); constant where log_q or log_ktu is -inf.
    for (Eigen::Index j = 0; j < k; ++j)
      for (Eigen::Index i = 0; i < d; ++i) {
        lktu_bar(i, j) = 0.0;
        if (rec.log_q[i] == kNegInf || rec.log_ktu(i, j) == kNegInf) continue;
        log_q_bar[i] += a * lv_bar(i, j);
        lktu_bar(i, j) = -a * lv_bar(i, j);
      }

    for (Eigen::Index i = 0; i < d; ++i) {
      const double g = log_q_bar[i];
      if (g == 0.0 || rec.log_q[i] == kNegInf) continue;
      const double scale = std::exp(beta * rec.log_q[i]);
      for (Eigen::Index j = 0; j < k; ++j) {
        if (lambda[j] == 0.0) continue;
        const double l = rec.log_ktu(i, j);
        if (beta == 0.0) {
          lktu_bar(i, j) += g * lambda[j];
          lambda_bar[j] += g * l;
        } else {
          lktu_bar(i, j) += g * lambda[j] * std::exp(beta * l) / scale;
          lambda_bar[j] += g * std::expm1(beta * l) / (beta * scale);
        }
      }
    }

    // log_ktu[i] = LSE_m(-C[m,i]/eps + log_u[m])
    for (Eigen::Index j = 0; j < k; ++j)
      for (Eigen::Index m = 0; m < d; ++m) {
        double s = 0.0;
        if (rec.log_u(m, j) != kNegInf)
          for (Eigen::Index i = 0; i < d; ++i)
            if (lktu_bar(i, j) != 0.0)
              s += lktu_bar(i, j) * std::exp(neg_c(m, i) + rec.log_u(m, j) - rec.log_ktu(i, j));
        lu_bar(m, j) = s;
      }

    // log_u = a (log A - log_kv)
    la_bar += a * lu_bar;
    lkv_bar = -a * lu_bar;

    // log_kv[i] = LSE_m(-C[i,m]/eps + log_v_prev[m])
    if (it == 0) break;
    const auto& prev = tape.iters[std::size_t(it - 1)];
    for (Eigen::Index j = 0; j < k; ++j)
      for (Eigen::Index m = 0; m < d; ++m) {
        double lv_prev;
        if (prev.log_q[m] == kNegInf)
          lv_prev = kNegInf;
        else
          lv_prev = prev.log_ktu(m, j) == kNegInf ? 0.0 : a * (prev.log_q[m] - prev.log_ktu(m, j));
        double s = 0.0;
        if (lv_prev != kNegInf)
          for (Eigen::Index i = 0; i < d; ++i)
            if (lkv_bar(i, j) != 0.0) s += lkv_bar(i, j) * std::exp(neg_c(i, m) + lv_prev - rec.log_kv(i, j));
        lv_bar(m, j) = s;
      }
  }

  for (Eigen::Index j = 0; j < k; ++j)
    for (Eigen::Index i = 0; i < d; ++i)
      if (atoms(i, j) > 0.0) d_atoms(i, j) += la_bar(i, j) / atoms(i, j);
  return loss;
}

// Per-item forward + reverse sweep. Accumulates into d_atoms and writes the
// logit gradient row; returns the item loss.
double item_backward(const Matrix& atoms, const Matrix& gibbs, const Eigen::Ref<const Vector>& logits,
                     const Eigen::Ref<const Vector>& target, const TrainConfig& cfg,
                     Eigen::Index item, Matrix& d_atoms, Eigen::Ref<Vector> d_logits) {
  const BarycenterConfig& bc = cfg.barycenter;
  const Eigen::Index d = atoms.rows(), k = atoms.cols();
  const double a = bc.exponent();
  const double beta = bc.mean_power();

  Vector lambda = (logits.array() - logits.maxCoeff()).exp();
  lambda /= lambda.sum();

  kernel::Tape tape;
  Vector q;
  if (bc.force_log_domain || !kernel::forward_plain(atoms, lambda, gibbs, bc, q, &tape)) {
    Vector lambda_bar = Vector::Zero(k);
    const double loss = item_backward_log(atoms, lambda, target, cfg, item, d_atoms, lambda_bar);
    d_logits = (lambda.array() * (lambda_bar.array() - lambda.dot(lambda_bar))).matrix();
    return loss;
  }

  const double loss = item_loss(q, target, cfg.loss_kind);
  const Vector q_bar = item_loss_grad(q, target, cfg.loss_kind);

  Vector log_q_bar = q_bar.cwiseProduct(q);
  Vector lambda_bar = Vector::Zero(k);
  Matrix v_bar = Matrix::Zero(d, k);
  Matrix l_bar(d, k), u_bar(d, k), kv_bar(d, k);

  for (int it = bc.inner_iters - 1; it >= 0; --it) {
    const auto& rec = tape.iters[std::size_t(it)];
    if (it != bc.inner_iters - 1) log_q_bar.setZero();

    // v = exp(a (log_q - log_ktu))
    for (Eigen::Index j = 0; j < k; ++j)
      for (Eigen::Index i = 0; i < d; ++i) {
        const double v = std::exp(a * (rec.log_q[i] - rec.log_ktu(i, j)));
        const double t = v_bar(i, j) * v * a;
        log_q_bar[i] += t;
        l_bar(i, j) = -t;
      }

    // log_q = power mean of log_ktu with weights lambda
    for (Eigen::Index i = 0; i < d; ++i) {
      const double g = log_q_bar[i];
      if (g == 0.0) continue;
      const double scale = std::exp(beta * rec.log_q[i]);  // 1 + sum lambda expm1(beta l)
      for (Eigen::Index j = 0; j < k; ++j) {
        const double l = rec.log_ktu(i, j);
        if (beta == 0.0) {
          l_bar(i, j) += g * lambda[j];
          lambda_bar[j] += g * l;
        } else {
          const double e = std::exp(beta * l);
          l_bar(i, j) += g * lambda[j] * e / scale;
          lambda_bar[j] += g * std::expm1(beta * l) / (beta * scale);
        }
      }
    }

    // log_ktu = log(G^T u)
    const Matrix ktu_bar = l_bar.array() / rec.log_ktu.array().exp();
    u_bar.noalias() = gibbs * ktu_bar;

    // u = (A / kv)^a
    for (Eigen::Index j = 0; j < k; ++j)
      for (Eigen::Index i = 0; i < d; ++i) {
        const double w = u_bar(i, j) * a * rec.u(i, j);
        d_atoms(i, j) += w / atoms(i, j);
        kv_bar(i, j) = -w / rec.kv(i, j);
      }

    // kv = G v_prev
    v_bar.noalias() = gibbs.transpose() * kv_bar;
  }

  // lambda = softmax(logits)
  d_logits = (lambda.array() * (lambda_bar.array() - lambda.dot(lambda_bar))).matrix();
  return loss;
}

Gradients gradients_impl(const TrainState& state, const RowMatrix& data, const TrainConfig& cfg,
                         bool parallel) {
  cfg.validate();
  const Matrix& atoms = state.dictionary.atoms;
  const RowMatrix& logits = state.weights.logits;
  if (data.cols() != atoms.rows()) throw Error("gradients: data width differs from atom length");
  if (logits.rows() != data.rows() || logits.cols() != atoms.cols())
    throw Error("gradients: logits shape must be n x k");
  if (atoms.rows() != cfg.barycenter.cost.size())
    throw Error("gradients: atoms do not match the cost grid");

  const Matrix gibbs = kernel::gibbs_kernel(cfg.barycenter.cost, cfg.barycenter.epsilon);
  const Eigen::Index n = data.rows(), d = atoms.rows(), k = atoms.cols();

  // Fixed blocks, summed in block order: the result does not depend on the
  // thread count.
  constexpr Eigen::Index kBlock = 8;
  const Eigen::Index blocks = (n + kBlock - 1) / kBlock;
  std::vector<Matrix> block_atoms(std::size_t(blocks), Matrix::Zero(d, k));
  std::vector<double> block_loss(std::size_t(blocks), 0.0);

  Gradients out;
  out.d_logits.resize(n, k);
  auto run_block = [&](Eigen::Index b) {
    Matrix& acc = block_atoms[std::size_t(b)];
    double loss = 0.0;
    for (Eigen::Index r = b * kBlock; r < std::min(n, (b + 1) * kBlock); ++r) {
      Vector grad_row(k);
      loss += item_backward(atoms, gibbs, logits.row(r).transpose(), data.row(r).transpose(), cfg,
                            r, acc, grad_row);
      out.d_logits.row(r) = grad_row.transpose();
    }
    block_loss[std::size_t(b)] = loss;
  };

  if (parallel) {
    std::string error;
#pragma omp parallel for schedule(dynamic)
    for (Eigen::Index b = 0; b < blocks; ++b) {
      try {
        run_block(b);
      } catch (const std::exception& e) {
#pragma omp critical(uwdl_grad_error)
        if (error.empty()) error = e.what();
      }
    }
    if (!error.empty()) throw Error(error);
  } else {
    for (Eigen::Index b = 0; b < blocks; ++b) run_block(b);
  }

  out.d_atoms = Matrix::Zero(d, k);
  for (Eigen::Index b = 0; b < blocks; ++b) {
    out.d_atoms += block_atoms[std::size_t(b)];
    out.loss += block_loss[std::size_t(b)];
  }
  return out;
}

double full_loss(const Matrix& atoms, const RowMatrix& logits, const RowMatrix& data,
                 const TrainConfig& cfg) {
  WeightLogits w{logits};
  const RowMatrix recon = barycenter_batch_serial(atoms, w.lambda(), cfg.barycenter);
  return reconstruction_loss(recon, data, cfg.loss_kind);
}

}  // namespace

double reconstruction_loss(const RowMatrix& recon, const RowMatrix& data, LossKind kind) {
  check_same_shape(recon, data);
  double s = 0.0;
  for (Eigen::Index r = 0; r < recon.rows(); ++r)
    s += item_loss(recon.row(r).transpose(), data.row(r).transpose(), kind);
  return s;
}

RowMatrix reconstruction_loss_grad(const RowMatrix& recon, const RowMatrix& data, LossKind kind) {
  check_same_shape(recon, data);
  RowMatrix g(recon.rows(), recon.cols());
  for (Eigen::Index r = 0; r < recon.rows(); ++r)
    g.row(r) = item_loss_grad(recon.row(r).transpose(), data.row(r).transpose(), kind).transpose();
  return g;
}

Gradients gradients(const TrainState& state, const RowMatrix& data, const TrainConfig& cfg) {
  return gradients_impl(state, data, cfg, true);
}

Gradients gradients_serial(const TrainState& state, const RowMatrix& data, const TrainConfig& cfg) {
  return gradients_impl(state, data, cfg, false);
}

Gradients gradients_finite_difference(const TrainState& state, const RowMatrix& data,
                                      const TrainConfig& cfg, double step) {
  cfg.validate();
  Matrix atoms = state.dictionary.atoms;
  RowMatrix logits = state.weights.logits;
  Gradients g;
  g.loss = full_loss(atoms, logits, data, cfg);
  g.d_atoms.resize(atoms.rows(), atoms.cols());
  for (Eigen::Index j = 0; j < atoms.cols(); ++j)
    for (Eigen::Index i = 0; i < atoms.rows(); ++i) {
      const double x0 = atoms(i, j);
      atoms(i, j) = x0 + step;
      const double fp = full_loss(atoms, logits, data, cfg);
      atoms(i, j) = x0 - step;
      const double fm = full_loss(atoms, logits, data, cfg);
      atoms(i, j) = x0;
      g.d_atoms(i, j) = (fp - fm) / (2.0 * step);
    }
  g.d_logits.resize(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r)
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      const double x0 = logits(r, c);
      logits(r, c) = x0 + step;
      const double fp = full_loss(atoms, logits, data, cfg);
      logits(r, c) = x0 - step;
      const double fm = full_loss(atoms, logits, data, cfg);
      logits(r, c) = x0;
      g.d_logits(r, c) = (fp - fm) / (2.0 * step);
    }
  return g;
}

void adam_step(TrainState& state, const Gradients& grads, const TrainConfig& cfg) {
  auto& mom = state.moments;
  const auto& p = cfg.optimizer;
  ++mom.step;
  const double bc1 = 1.0 - std::pow(p.beta1, double(mom.step));
  const double bc2 = 1.0 - std::pow(p.beta2, double(mom.step));
  const double lr = cfg.learning_rate;

  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = p.beta1 * m + (1.0 - p.beta1) * g;
    v = p.beta2 * v + (1.0 - p.beta2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + p.epsilon);
  };
  update(state.dictionary.atoms, mom.m_atoms, mom.v_atoms, grads.d_atoms);
  update(state.weights.logits, mom.m_logits, mom.v_logits, grads.d_logits);
  state.dictionary.atoms = state.dictionary.atoms.cwiseMax(cfg.floor);
}

TrainResult train_from(TrainState state, const RowMatrix& data, const TrainConfig& cfg,
                       const TrainCallback& on_iteration) {
  cfg.validate();
  if (data.rows() == 0) throw Error("train: no input measures");
  TrainResult res;
  res.loss_trace.reserve(std::size_t(cfg.iterations));
  for (int it = 0; it < cfg.iterations; ++it) {
    const Gradients g = gradients(state, data, cfg);
    if (!std::isfinite(g.loss))
      throw Error("train: non-finite loss at iteration " + std::to_string(it));
    res.loss_trace.push_back(g.loss);
    adam_step(state, g, cfg);
    if (on_iteration) on_iteration(it, g.loss, state);
  }
  res.dictionary = state.dictionary;
  res.weights = state.weights.lambda();
  res.state = std::move(state);
  return res;
}

TrainResult train(const RowMatrix& data, std::size_t k, const TrainConfig& cfg,
                  const TrainCallback& on_iteration) {
  cfg.validate();
  return train_from(init_state(data, k, cfg.seed, cfg.init_jitter, cfg.floor), data, cfg,
                    on_iteration);
}

}  // namespace uwdl
