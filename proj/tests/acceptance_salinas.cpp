// Salinas A acceptance criteria. Needs <dir>/salinas_a.hsic and
// <dir>/salinas_a.hsil; exits 77 (skipped) when they are absent.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "uwdl/io.hpp"
#include "uwdl/pipeline.hpp"

using namespace uwdl;

namespace {

constexpr double kAccuracyMedian = 0.80;
constexpr double kPurityMedian = 0.85;
// "Same order" as the reference 226 s run.
constexpr double kReferenceSeconds = 226.0;
constexpr double kRuntimeFactor = 10.0;
constexpr int kSeeds = 5;

int failures = 0;

void report(const char* name, bool pass, const std::string& detail) {
  std::printf("%s  %-32s %s\n", pass ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string join(const std::vector<double>& v) {
  std::string s;
  char buf[32];
  for (double x : v) {
    std::snprintf(buf, sizeof buf, "%s%.3f", s.empty() ? "" : ",", x);
    s += buf;
  }
  return s;
}

struct Series {
  std::vector<double> accuracy, purity, seconds;
};

Series run_seeds(RunConfig cfg, const HsiCube& cube, const LabelMap& truth, const char* label) {
  Series s;
  for (int seed = 0; seed < kSeeds; ++seed) {
    cfg.seed = std::uint64_t(seed);
    const RunReport r = run_ubcsc(cfg, cube, truth);
    s.accuracy.push_back(r.accuracy);
    s.purity.push_back(r.purity);
    s.seconds.push_back(r.seconds);
    std::fprintf(stderr, "  %s seed %d: accuracy %.3f purity %.3f %.0f s\n", label, seed, r.accuracy, r.purity,
                 r.seconds);
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  const std::filesystem::path dir = argc > 1 ? argv[1] : "data/salinas_a";
  const auto cube_path = dir / "salinas_a.hsic", labels_path = dir / "salinas_a.hsil";
  if (!std::filesystem::exists(cube_path) || !std::filesystem::exists(labels_path)) {
    std::printf("SKIP  salinas.accuracy_and_purity     dataset not found at %s\n", dir.c_str());
    std::printf("SKIP  salinas.ubcsc_beats_bcsc        dataset not found at %s\n", dir.c_str());
    return 77;
  }
  const HsiCube cube = io::read_cube(cube_path);
  const LabelMap truth = io::read_labels(labels_path);

  RunConfig base;
  base.tau = 1000.0;
  base.epsilon = 0.1;
  base.atoms = 24;
  base.neighbors = 25;
  base.clusters = 6;
  base.iterations = 500;

  const Series ub = run_seeds(base, cube, truth, "ubcsc");
  RunConfig pur = base;
  pur.clusters = 7;
  pur.atoms = 60;
  pur.neighbors = 45;
  const Series pr = run_seeds(pur, cube, truth, "purity");
  const double acc = median(ub.accuracy), purity = median(pr.purity), secs = median(ub.seconds);
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "accuracy %s median %.3f (>= %.2f, reference 0.89); purity K=7 %s median %.3f (>= %.2f, reference "
                "0.92); median run %.0f s (< %.0f s)",
                join(ub.accuracy).c_str(), acc, kAccuracyMedian, join(pr.purity).c_str(), purity, kPurityMedian,
                secs, kRuntimeFactor * kReferenceSeconds);
  report("salinas.accuracy_and_purity",
         acc >= kAccuracyMedian && purity >= kPurityMedian && secs < kRuntimeFactor * kReferenceSeconds, buf);

  RunConfig bal = base;
  bal.balanced = true;
  const Series bc = run_seeds(bal, cube, truth, "bcsc");
  std::snprintf(buf, sizeof buf, "median UBCSC %.3f vs balanced %.3f (reference 0.89 vs 0.68)", acc,
                median(bc.accuracy));
  report("salinas.ubcsc_beats_bcsc", acc > median(bc.accuracy), buf);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
