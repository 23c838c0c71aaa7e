#include <fstream>

#include "uwdl/io.hpp"
#include "uwdl/wdl.hpp"

namespace uwdl {

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

template <typename M>
void put_matrix(std::ostream& out, const M& m) {
  io::put_u64(out, std::uint64_t(m.rows()));
  io::put_u64(out, std::uint64_t(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) io::put_f64(out, m(r, c));
}

template <typename M>
M get_matrix(std::istream& in) {
  const auto rows = io::get_u64(in);
  const auto cols = io::get_u64(in);
  if (rows > (1u << 24) || cols > (1u << 24)) throw Error("checkpoint: implausible matrix shape");
  M m{Eigen::Index(rows), Eigen::Index(cols)};
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = io::get_f64(in);
  return m;
}

}  // namespace

// Layout: "UWDL", u32 version, config scalars, cost, atoms, logits, Adam
// moments and step, atom sources. Little-endian throughout.
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  const auto& c = ckpt.config;
  out.write("UWDL", 4);
  io::put_u32(out, kCheckpointVersion);
  io::put_u32(out, std::uint32_t(c.loss_kind));
  io::put_f64(out, c.learning_rate);
  io::put_u32(out, std::uint32_t(c.iterations));
  io::put_u64(out, c.seed);
  io::put_f64(out, c.barycenter.epsilon);
  io::put_f64(out, c.barycenter.tau);
  io::put_u32(out, std::uint32_t(c.barycenter.inner_iters));
  io::put_f64(out, c.optimizer.beta1);
  io::put_f64(out, c.optimizer.beta2);
  io::put_f64(out, c.optimizer.epsilon);
  io::put_f64(out, c.floor);
  io::put_f64(out, c.init_jitter);
  put_matrix(out, c.barycenter.cost.entries());

  const auto& s = ckpt.state;
  put_matrix(out, s.dictionary.atoms);
  put_matrix(out, s.weights.logits);
  put_matrix(out, s.moments.m_atoms);
  put_matrix(out, s.moments.v_atoms);
  put_matrix(out, s.moments.m_logits);
  put_matrix(out, s.moments.v_logits);
  io::put_u64(out, std::uint64_t(s.moments.step));
  io::put_u64(out, s.atom_sources.size());
  for (auto idx : s.atom_sources) io::put_u64(out, idx);
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  io::expect_magic(in, "UWDL");
  const auto version = io::get_u32(in);
  if (version != kCheckpointVersion)
    throw Error("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ck;
  auto& c = ck.config;
  const auto loss = io::get_u32(in);
  if (loss > 2) throw Error("checkpoint: bad loss kind");
  c.loss_kind = LossKind(loss);
  c.learning_rate = io::get_f64(in);
  c.iterations = int(io::get_u32(in));
  c.seed = io::get_u64(in);
  c.barycenter.epsilon = io::get_f64(in);
  c.barycenter.tau = io::get_f64(in);
  c.barycenter.inner_iters = int(io::get_u32(in));
  c.optimizer.beta1 = io::get_f64(in);
  c.optimizer.beta2 = io::get_f64(in);
  c.optimizer.epsilon = io::get_f64(in);
  c.floor = io::get_f64(in);
  c.init_jitter = io::get_f64(in);
  c.barycenter.cost = CostMatrix(get_matrix<Matrix>(in));

  auto& s = ck.state;
  s.dictionary.atoms = get_matrix<Matrix>(in);
  s.weights.logits = get_matrix<RowMatrix>(in);
  s.moments.m_atoms = get_matrix<Matrix>(in);
  s.moments.v_atoms = get_matrix<Matrix>(in);
  s.moments.m_logits = get_matrix<RowMatrix>(in);
  s.moments.v_logits = get_matrix<RowMatrix>(in);
  s.moments.step = long(io::get_u64(in));
  const auto nsrc = io::get_u64(in);
  if (nsrc > (1u << 24)) throw Error("checkpoint: implausible atom count");
  s.atom_sources.resize(nsrc);
  for (auto& idx : s.atom_sources) idx = io::get_u64(in);
  return ck;
}

}  // namespace uwdl
