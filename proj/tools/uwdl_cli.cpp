#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "uwdl/io.hpp"
#include "uwdl/pipeline.hpp"

namespace fs = std::filesystem;
using namespace uwdl;

namespace {

struct RunFlags {
  std::string config, cube, labels, out, loss, mode;
  double tau = 0, epsilon = 0, lr = 0;
  std::size_t atoms = 0, pixels = 0;
  int clusters = 0, nn = 0, iterations = 0, inner_iters = 0;
  std::uint64_t seed = 0;
  std::vector<CLI::Option*> opts;

  void add(CLI::App* app) {
    app->add_option("--config", config, "JSON config file; flags override its values");
    opts = {
        app->add_option("--cube", cube, "HSIC cube"),
        app->add_option("--labels", labels, "HSIL ground truth"),
        app->add_option("--out", out, "output directory"),
        app->add_option("--tau", tau, "marginal relaxation"),
        app->add_option("--epsilon", epsilon, "entropic regularization"),
        app->add_option("--atoms", atoms, "dictionary size k"),
        app->add_option("--clusters", clusters, "cluster count K"),
        app->add_option("--nn", nn, "kNN graph neighbors"),
        app->add_option("--pixels", pixels, "subsample size n"),
        app->add_option("--iterations", iterations, "training iterations"),
        app->add_option("--inner-iters", inner_iters, "barycenter scaling iterations"),
        app->add_option("--lr", lr, "Adam learning rate"),
        app->add_option("--seed", seed, "random seed"),
        app->add_option("--loss", loss, "quadratic|tv|kl"),
        app->add_option("--mode", mode, "balanced|unbalanced")->check(CLI::IsMember({"balanced", "unbalanced"})),
    };
  }

  RunConfig resolve() const {
    RunConfig c;
    if (!config.empty()) c = load_run_config(config, c);
    json j = json::object();
    auto given = [&](std::size_t i) { return opts[i]->count() > 0; };
    if (given(0)) j["cube"] = cube;
    if (given(1)) j["labels"] = labels;
    if (given(2)) j["output"] = out;
    if (given(3)) j["tau"] = tau;
    if (given(4)) j["epsilon"] = epsilon;
    if (given(5)) j["atoms"] = atoms;
    if (given(6)) j["clusters"] = clusters;
    if (given(7)) j["nn"] = nn;
    if (given(8)) j["pixels"] = pixels;
    if (given(9)) j["iterations"] = iterations;
    if (given(10)) j["inner_iters"] = inner_iters;
    if (given(11)) j["learning_rate"] = lr;
    if (given(12)) j["seed"] = seed;
    if (given(13)) j["loss"] = loss;
    if (given(14)) j["mode"] = mode;
    return run_config_from_json(j, c);
  }
};

void print_report(const RunReport& r) {
  std::printf("accuracy %.4f  purity %.4f  loss %.6g -> %.6g  %.1f s  (config %s)\n", r.accuracy,
              r.purity, r.loss_trace.empty() ? 0.0 : r.loss_trace.front(),
              r.loss_trace.empty() ? 0.0 : r.loss_trace.back(), r.seconds, r.config_hash.c_str());
}

LabelMap load_truth(const RunConfig& c) {
  if (c.cube_path.empty() || c.labels_path.empty()) throw Error("--cube and --labels are required");
  return io::read_labels(c.labels_path);
}

int cmd_train(const RunFlags& f) {
  const RunConfig c = f.resolve();
  c.validate();
  if (c.output_dir.empty()) throw Error("--out is required");
  const HsiCube cube = io::read_cube(c.cube_path);
  const PreparedData data = prepare(c, cube, load_truth(c));
  const TrainConfig tc = make_train_config(c, data.cost);
  const TrainResult res = train(data.sample.measures, c.atoms, tc, [&](int it, double loss, const TrainState&) {
    if (it % 50 == 0 || it + 1 == tc.iterations) std::printf("iter %4d  loss %.8g\n", it, loss);
  });
  fs::create_directories(c.output_dir);
  write_checkpoint(c.output_dir / "checkpoint.uwdl", Checkpoint{tc, res.state});
  std::ofstream(c.output_dir / "sample.json")
      << json{{"config", to_json(c)}, {"indices", data.sample.indices}}.dump(2) << '\n';
  std::printf("wrote %s\n", (c.output_dir / "checkpoint.uwdl").c_str());
  return 0;
}

int cmd_cluster(const RunFlags& f, const std::string& trained_dir) {
  std::ifstream in(fs::path(trained_dir) / "sample.json");
  if (!in) throw Error("no sample.json in " + trained_dir);
  const json meta = json::parse(in);
  RunConfig c = run_config_from_json(meta.at("config"));
  // Clustering-stage flags may differ from the training run.
  const RunConfig over = f.resolve();
  if (f.opts[6]->count()) c.clusters = over.clusters;
  if (f.opts[7]->count()) c.neighbors = over.neighbors;
  if (f.opts[2]->count()) c.output_dir = over.output_dir;
  if (f.opts[0]->count()) c.cube_path = over.cube_path;
  if (f.opts[1]->count()) c.labels_path = over.labels_path;

  const HsiCube cube = io::read_cube(c.cube_path);
  const LabelMap truth = load_truth(c);
  const PreparedData data = prepare(c, cube, truth);
  if (data.sample.indices != meta.at("indices").get<std::vector<std::size_t>>())
    throw Error("resampled pixels differ from the training sample");
  const Checkpoint ck = read_checkpoint(fs::path(trained_dir) / "checkpoint.uwdl");
  ClusterOutcome co = cluster_stage(c, data, ck.state.weights.lambda());
  if (!c.output_dir.empty()) {
    fs::create_directories(c.output_dir);
    io::write_labels(c.output_dir / "labels.hsil", co.inpainted);
    render_labels(co.inpainted, truth, c.output_dir);
    std::ofstream(c.output_dir / "report.json") << co.report.to_json().dump(2) << '\n';
  }
  print_report(co.report);
  return 0;
}

int cmd_run(const RunFlags& f) {
  const RunReport r = run_ubcsc(f.resolve());
  print_report(r);
  return 0;
}

int cmd_sweep(const RunFlags& f, const std::string& grid_path) {
  const RunConfig base = f.resolve();
  SweepGrid grid = SweepGrid::paper();
  if (!grid_path.empty()) {
    std::ifstream in(grid_path);
    if (!in) throw Error("cannot open " + grid_path);
    grid = sweep_grid_from_json(json::parse(in));
  }
  const HsiCube cube = io::read_cube(base.cube_path);
  const LabelMap truth = load_truth(base);
  const SweepResult res = run_sweep(grid, base, cube, truth, [](const RunReport& r, bool reused) {
    std::printf("%s %-6s tau=%g eps=%g nn=%d k=%zu K=%d  acc %.4f  purity %.4f%s\n", r.config_hash.c_str(),
                r.status.c_str(), r.config.tau, r.config.epsilon, r.config.neighbors, r.config.atoms,
                r.config.clusters, r.accuracy, r.purity, reused ? "  (reused)" : "");
    if (r.status != "ok") std::printf("  %s\n", r.error.c_str());
  });
  if (res.best_accuracy)
    std::printf("best accuracy: %s %.4f\n", res.reports[*res.best_accuracy].config_hash.c_str(),
                res.reports[*res.best_accuracy].accuracy);
  if (res.best_purity)
    std::printf("best purity:   %s %.4f\n", res.reports[*res.best_purity].config_hash.c_str(),
                res.reports[*res.best_purity].purity);
  return 0;
}

int cmd_demo(const GaussianDemoConfig& cfg, const std::string& out) {
  const GaussianDemo demo = demo_gaussians(cfg);
  std::printf("%8s %16s %16s\n", "lambda", "balanced mass", "unbalanced mass");
  for (std::size_t s = 0; s < demo.lambdas.size(); ++s)
    std::printf("%8.3f %16.10f %16.10f\n", demo.lambdas[s], demo.balanced_mass[s], demo.unbalanced_mass[s]);
  if (!out.empty()) write_demo(out, demo);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unbalanced Wasserstein dictionary learning for hyperspectral clustering"};
  app.require_subcommand(1);

  RunFlags train_f, cluster_f, run_f, sweep_f;
  auto* train_cmd = app.add_subcommand("train", "learn a dictionary and weights on a pixel subsample");
  train_f.add(train_cmd);
  auto* cluster_cmd = app.add_subcommand("cluster", "cluster, match and in-paint from a trained run");
  cluster_f.add(cluster_cmd);
  std::string trained_dir;
  cluster_cmd->add_option("--trained", trained_dir, "output directory of `train`")->required();
  auto* run_cmd = app.add_subcommand("run", "full pipeline: sample, train, cluster, match, in-paint");
  run_f.add(run_cmd);
  auto* sweep_cmd = app.add_subcommand("sweep", "hyperparameter sweep (default: the published grid)");
  sweep_f.add(sweep_cmd);
  std::string grid_path;
  sweep_cmd->add_option("--grid", grid_path, "JSON grid with tau, epsilon, nn, atom_multipliers, clusters");

  auto* demo_cmd = app.add_subcommand("demo-gauss", "barycentric interpolation between two Gaussians");
  GaussianDemoConfig demo_cfg;
  std::string demo_out;
  demo_cmd->add_option("--steps", demo_cfg.steps, "interpolation steps")->capture_default_str();
  demo_cmd->add_option("--tau", demo_cfg.tau)->capture_default_str();
  demo_cmd->add_option("--epsilon", demo_cfg.epsilon)->capture_default_str();
  demo_cmd->add_option("--bins", demo_cfg.bins)->capture_default_str();
  demo_cmd->add_option("--inner-iters", demo_cfg.inner_iters)->capture_default_str();
  demo_cmd->add_option("--out", demo_out, "directory for mass.csv and curves.csv");

  auto* render_cmd = app.add_subcommand("render", "write label maps as PPM images");
  std::string pred_path, truth_path, render_out;
  render_cmd->add_option("--pred", pred_path)->required();
  render_cmd->add_option("--truth", truth_path)->required();
  render_cmd->add_option("--out", render_out)->required();

  auto* eval_cmd = app.add_subcommand("evaluate", "accuracy and purity of a label map");
  std::string eval_pred, eval_truth;
  eval_cmd->add_option("--pred", eval_pred)->required();
  eval_cmd->add_option("--truth", eval_truth)->required();

  CLI11_PARSE(app, argc, argv);

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    if (*train_cmd) return cmd_train(train_f);
    if (*cluster_cmd) return cmd_cluster(cluster_f, trained_dir);
    if (*run_cmd) return cmd_run(run_f);
    if (*sweep_cmd) return cmd_sweep(sweep_f, grid_path);
    if (*demo_cmd) return cmd_demo(demo_cfg, demo_out);
    if (*render_cmd) {
      render_labels(io::read_labels(pred_path), io::read_labels(truth_path), render_out);
      return 0;
    }
    if (*eval_cmd) {
      const Evaluation ev = evaluate_labels(io::read_labels(eval_pred), io::read_labels(eval_truth));
      std::printf("%s\n", json{{"accuracy", ev.accuracy}, {"purity", ev.purity}, {"mapping", ev.match.mapping}}
                              .dump()
                              .c_str());
      return 0;
    }
  } catch (const StageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: [%s] %s\n", stage.c_str(), e.what());
    return 1;
  }
  return 1;
}
