#include <filesystem>
#include <fstream>
#include <set>

#include <doctest.h>

#include "fixtures.hpp"
#include "uwdl/io.hpp"
#include "uwdl/pipeline.hpp"

using namespace uwdl;
namespace fs = std::filesystem;

namespace {

RunConfig quick_config() {
  RunConfig c;
  c.pixels = 90;
  c.atoms = 3;
  c.clusters = 3;
  c.neighbors = 8;
  c.iterations = 15;
  c.inner_iters = 10;
  c.seed = 4;
  return c;
}

const fixtures::SyntheticScene& scene() {
  static const fixtures::SyntheticScene s = fixtures::synthetic_scene(12, 12, 16, 5);
  return s;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  return p;
}

json read(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("runs are deterministic per config") {
  const RunConfig c = quick_config();
  const RunReport a = run_ubcsc(c, scene().cube, scene().truth);
  const RunReport b = run_ubcsc(c, scene().cube, scene().truth);
  CHECK(a.accuracy == b.accuracy);
  CHECK(a.purity == b.purity);
  CHECK(a.confusion == b.confusion);
  CHECK(a.loss_trace == b.loss_trace);
  CHECK(a.mapping == b.mapping);
  CHECK(a.config_hash == c.hash());
}

TEST_CASE("report metrics can be recomputed from the confusion matrix") {
  const RunReport r = run_ubcsc(quick_config(), scene().cube, scene().truth);
  REQUIRE(r.confusion.rows() == 3);
  long agree = 0, total = r.confusion.sum();
  double pur = 0.0;
  int used = 0;
  for (Eigen::Index c = 0; c < r.confusion.rows(); ++c) {
    const int t = r.mapping[std::size_t(c) + 1];
    if (t > 0) agree += r.confusion(c, t - 1);
    const long size = r.confusion.row(c).sum();
    if (size > 0) {
      pur += double(r.confusion.row(c).maxCoeff()) / double(size);
      ++used;
    }
  }
  CHECK(total == 90);
  CHECK(r.accuracy == doctest::Approx(double(agree) / double(total)));
  CHECK(r.purity == doctest::Approx(pur / used));
  long sizes = 0;
  for (long s : r.cluster_sizes) sizes += s;
  CHECK(sizes == 90);
}

TEST_CASE("run outputs are written and readable") {
  RunConfig c = quick_config();
  c.output_dir = fresh_dir("uwdl_test_run");
  const RunReport r = run_ubcsc(c, scene().cube, scene().truth);
  for (const char* f : {"report.json", "labels.hsil", "pred.ppm", "truth.ppm", "mismatch.ppm"})
    CHECK(fs::exists(c.output_dir / f));
  const RunReport back = RunReport::from_json(read(c.output_dir / "report.json"));
  CHECK(back.accuracy == r.accuracy);
  CHECK(back.confusion == r.confusion);
  CHECK(back.config_hash == r.config_hash);
  CHECK(back.config.hash() == r.config_hash);
  const LabelMap painted = io::read_labels(c.output_dir / "labels.hsil");
  CHECK(painted.pixel_count() == 144);
  CHECK(std::none_of(painted.labels.begin(), painted.labels.end(), [](int l) { return l == 0; }));
  fs::remove_all(c.output_dir);
}

TEST_CASE("balanced mode runs through the same pipeline") {
  RunConfig c = quick_config();
  c.balanced = true;
  const PreparedData d = prepare(c, scene().cube, scene().truth);
  for (Eigen::Index r = 0; r < d.sample.measures.rows(); ++r)
    CHECK(d.sample.measures.row(r).sum() == doctest::Approx(1.0));
  CHECK(std::isinf(make_train_config(c, d.cost).barycenter.tau));
  CHECK(run_ubcsc(c, scene().cube, scene().truth).status == "ok");
  CHECK(c.hash() != quick_config().hash());
}

TEST_CASE("prepare normalizes, rescales and samples labeled pixels") {
  const RunConfig c = quick_config();
  const PreparedData d = prepare(c, scene().cube, scene().truth);
  CHECK(d.cube.pixel_totals().maxCoeff() == doctest::Approx(1.0));
  CHECK(d.cost.max() == 10.0);
  CHECK(d.sample.indices.size() == 90);
  for (int t : d.sample_truth) CHECK(t != 0);
}

TEST_CASE("stage errors name the stage and config hash") {
  RunConfig c = quick_config();
  c.pixels = 10000;
  try {
    run_ubcsc(c, scene().cube, scene().truth);
    FAIL("expected an error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "sample");
    CHECK(std::string(e.what()).find("[sample]") == 0);
    CHECK(std::string(e.what()).find(c.hash()) != std::string::npos);
  }
  c = quick_config();
  c.iterations = 0;
  CHECK_THROWS_WITH_AS(run_ubcsc(c, scene().cube, scene().truth), doctest::Contains("[config]"), StageError);
  c = quick_config();
  c.cube_path = "/nonexistent.hsic";
  c.labels_path = "/nonexistent.hsil";
  CHECK_THROWS_WITH_AS(run_ubcsc(c), doctest::Contains("[load]"), StageError);
  LabelMap wrong = scene().truth;
  wrong.width = 6;
  wrong.labels.resize(72);
  CHECK_THROWS_WITH_AS(run_ubcsc(quick_config(), scene().cube, wrong), doctest::Contains("[sample]"), StageError);
}

TEST_CASE("config JSON round trip and partial overrides") {
  RunConfig c = quick_config();
  c.cube_path = "a.hsic";
  c.balanced = true;
  c.loss_kind = LossKind::kl;
  const RunConfig back = run_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.hash() == c.hash());

  const RunConfig partial = run_config_from_json(json{{"tau", 5.0}, {"nn", 3}}, c);
  CHECK(partial.tau == 5.0);
  CHECK(partial.neighbors == 3);
  CHECK(partial.atoms == c.atoms);
  CHECK(partial.balanced);

  RunConfig moved = c;
  moved.cube_path = "elsewhere.hsic";
  moved.output_dir = "out";
  CHECK(moved.hash() == c.hash());
  CHECK(c.hash().size() == 16);

  CHECK_THROWS_AS(run_config_from_json(json{{"mode", "sideways"}}), Error);
  CHECK_THROWS_AS(run_config_from_json(json{{"tau", "big"}}), Error);
  CHECK_THROWS_AS(run_config_from_json(json::array()), Error);

  const fs::path p = fresh_dir("uwdl_test_cfg.json");
  {
    std::ofstream out(p);
    out << R"({"atoms": 5, "loss": "tv"})";
  }
  const RunConfig loaded = load_run_config(p, c);
  CHECK(loaded.atoms == 5);
  CHECK(loaded.loss_kind == LossKind::tv);
  CHECK(loaded.clusters == c.clusters);
  fs::remove(p);
}

TEST_CASE("sweep grid expansion") {
  const SweepGrid paper = SweepGrid::paper();
  CHECK(paper.taus.size() == 4);
  CHECK(paper.epsilons.size() == 6);
  CHECK(paper.neighbors.size() == 10);
  CHECK(expand_grid(paper, quick_config(), 6).size() == 4 * 6 * 10 * 4);

  SweepGrid g{{10.0, 100.0}, {0.1, 0.2}, {8}, {1.0}, {}};
  const auto runs = expand_grid(g, quick_config(), 3);
  REQUIRE(runs.size() == 4);
  std::set<std::string> hashes;
  std::set<std::uint64_t> seeds;
  for (const auto& r : runs) {
    hashes.insert(r.hash());
    seeds.insert(r.seed);
    CHECK(r.atoms == 3);
  }
  CHECK(hashes.size() == 4);
  CHECK(seeds.size() == 4);
  CHECK(expand_grid(g, quick_config(), 3)[2].seed == runs[2].seed);

  const SweepGrid back = sweep_grid_from_json(to_json(g));
  CHECK(back.taus == g.taus);
  CHECK(back.neighbors == g.neighbors);
  CHECK_THROWS_AS(expand_grid(SweepGrid{{}, {0.1}, {8}, {1.0}, {}}, quick_config(), 3), Error);
}

TEST_CASE("a one-point sweep equals a single run") {
  const SweepGrid g{{1000.0}, {0.1}, {8}, {1.0}, {}};
  const SweepResult s = run_sweep(g, quick_config(), scene().cube, scene().truth);
  REQUIRE(s.reports.size() == 1);
  const RunConfig cfg = expand_grid(g, quick_config(), 3).front();
  const RunReport single = run_ubcsc(cfg, scene().cube, scene().truth);
  CHECK(s.reports[0].accuracy == single.accuracy);
  CHECK(s.reports[0].confusion == single.confusion);
  CHECK(s.reports[0].loss_trace == single.loss_trace);
  CHECK(s.best_accuracy == std::optional<std::size_t>(0));
}

TEST_CASE("sweeps persist, resume and summarize") {
  RunConfig base = quick_config();
  base.output_dir = fresh_dir("uwdl_test_sweep");
  const SweepGrid g{{100.0, 1000.0}, {0.1, 0.2}, {8}, {1.0}, {}};
  const SweepResult first = run_sweep(g, base, scene().cube, scene().truth);
  REQUIRE(first.reports.size() == 4);
  std::set<std::string> hashes;
  for (const auto& r : first.reports) hashes.insert(r.config_hash);
  CHECK(hashes.size() == 4);

  // Simulate a sweep killed before its last run finished.
  const fs::path last = base.output_dir / "runs" / first.reports[3].config_hash / "report.json";
  fs::remove(last);
  std::vector<std::string> before;
  std::vector<fs::file_time_type> mtimes;
  for (int i = 0; i < 3; ++i) {
    const fs::path p = base.output_dir / "runs" / first.reports[std::size_t(i)].config_hash / "report.json";
    before.push_back(slurp(p));
    mtimes.push_back(fs::last_write_time(p));
  }

  int recomputed = 0;
  const SweepResult second = run_sweep(g, base, scene().cube, scene().truth,
                                       [&](const RunReport&, bool reused) { recomputed += !reused; });
  CHECK(recomputed == 1);
  CHECK(second.reused == std::vector<bool>{true, true, true, false});
  for (int i = 0; i < 3; ++i) {
    const fs::path p = base.output_dir / "runs" / first.reports[std::size_t(i)].config_hash / "report.json";
    CHECK(slurp(p) == before[std::size_t(i)]);
    CHECK(fs::last_write_time(p) == mtimes[std::size_t(i)]);
    CHECK(second.reports[std::size_t(i)].finished_at == first.reports[std::size_t(i)].finished_at);
  }
  CHECK(second.reports[3].accuracy == first.reports[3].accuracy);

  // Summary maxima agree with a rescan of the persisted reports.
  const json idx = read(base.output_dir / "index.json");
  double best_acc = -1.0, best_pur = -1.0;
  std::string acc_hash, pur_hash;
  for (const auto& e : idx.at("runs")) {
    const RunReport r = RunReport::from_json(read(base.output_dir / e.at("report").get<std::string>()));
    if (r.accuracy > best_acc) best_acc = r.accuracy, acc_hash = r.config_hash;
    if (r.purity > best_pur) best_pur = r.purity, pur_hash = r.config_hash;
  }
  CHECK(idx.at("runs").size() == 4);
  CHECK(idx.at("best_accuracy").get<std::string>() == acc_hash);
  CHECK(idx.at("best_purity").get<std::string>() == pur_hash);
  fs::remove_all(base.output_dir);
}

TEST_CASE("a failing run is recorded and the sweep continues") {
  RunConfig base = quick_config();
  base.output_dir = fresh_dir("uwdl_test_sweep_fail");
  const SweepGrid g{{1000.0}, {0.1}, {8, 500}, {1.0}, {}};
  const SweepResult s = run_sweep(g, base, scene().cube, scene().truth);
  REQUIRE(s.reports.size() == 2);
  CHECK(s.reports[0].status == "ok");
  CHECK(s.reports[1].status == "failed");
  CHECK(s.reports[1].error.find("[config]") != std::string::npos);
  CHECK(s.best_accuracy == std::optional<std::size_t>(0));

  // Failed runs are retried on resume.
  const SweepResult again = run_sweep(g, base, scene().cube, scene().truth);
  CHECK(again.reused == std::vector<bool>{true, false});
  fs::remove_all(base.output_dir);
}

TEST_CASE("rendering") {
  LabelMap one;
  one.height = one.width = 1;
  one.labels = {3};
  const fs::path dir = fresh_dir("uwdl_test_render");
  fs::create_directories(dir);
  write_ppm(dir / "one.ppm", one);
  const std::string px = slurp(dir / "one.ppm");
  const auto c3 = palette_color(3);
  CHECK(px.substr(0, 11) == "P6\n1 1\n255\n");
  REQUIRE(px.size() == 14);
  CHECK(std::uint8_t(px[11]) == c3[0]);
  CHECK(std::uint8_t(px[12]) == c3[1]);
  CHECK(std::uint8_t(px[13]) == c3[2]);
  CHECK(palette_color(0) == std::array<std::uint8_t, 3>{0, 0, 0});
  CHECK(palette_color(17) == palette_color(1));
  CHECK(palette_color(1) != palette_color(2));

  render_labels(scene().truth, scene().truth, dir);
  const std::string mask = slurp(dir / "mismatch.ppm");
  const std::string header = "P6\n12 12\n255\n";
  CHECK(mask.substr(0, header.size()) == header);
  CHECK(std::all_of(mask.begin() + long(header.size()), mask.end(), [](char ch) { return ch == 0; }));

  LabelMap off = scene().truth;
  off.labels[5] = off.labels[5] % 3 + 1;
  render_labels(off, scene().truth, dir);
  const std::string mask2 = slurp(dir / "mismatch.ppm");
  CHECK(std::uint8_t(mask2[header.size() + 15]) == 255);
  CHECK(std::count(mask2.begin() + long(header.size()), mask2.end(), char(255)) == 3);
  CHECK_THROWS_AS(write_ppm("/nonexistent/dir/x.ppm", one), Error);
  fs::remove_all(dir);
}

TEST_CASE("evaluate_labels on label maps") {
  const LabelMap& t = scene().truth;
  const Evaluation same = evaluate_labels(t, t);
  CHECK(same.accuracy == 1.0);
  CHECK(same.purity == 1.0);
  LabelMap swapped = t;
  for (int& l : swapped.labels)
    if (l == 1) l = 2;
    else if (l == 2) l = 1;
  CHECK(evaluate_labels(swapped, t).accuracy == 1.0);
}

TEST_CASE("total variation is half the l1 distance") {
  CHECK(total_variation(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)) == 1.0);
  CHECK(total_variation(Eigen::Vector3d(0.5, 0.2, 0.3), Eigen::Vector3d(0.5, 0.2, 0.3)) == 0.0);
}

TEST_CASE("gaussian demo contract at reduced resolution") {
  GaussianDemoConfig c;
  c.steps = 5;
  c.bins = 32;
  c.inner_iters = 800;
  const GaussianDemo d = demo_gaussians(c);
  REQUIRE(d.balanced_mass.size() == 5);
  for (double m : d.balanced_mass) CHECK(m == doctest::Approx(1.0).epsilon(1e-6));
  const double lo = *std::min_element(d.unbalanced_mass.begin(), d.unbalanced_mass.end());
  const double hi = *std::max_element(d.unbalanced_mass.begin(), d.unbalanced_mass.end());
  CHECK(hi / lo > 1.01);
  CHECK(total_variation(d.unbalanced.row(0).transpose(), d.left) < 0.1);
  CHECK(total_variation(d.unbalanced.row(4).transpose(), d.right) < 0.1);
  const fs::path dir = fresh_dir("uwdl_test_demo");
  write_demo(dir, d);
  CHECK(fs::exists(dir / "mass.csv"));
  CHECK(fs::exists(dir / "curves.csv"));
  fs::remove_all(dir);
}
