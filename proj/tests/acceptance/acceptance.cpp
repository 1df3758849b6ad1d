// One PASS/FAIL line per acceptance criterion. Exit status is non-zero when
// any criterion fails. Pass criterion numbers as arguments to run a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "synthetic.hpp"

#include "mug/gradcheck.hpp"
#include "mug/model.hpp"
#include "mug/profile.hpp"
#include "mug/results_io.hpp"
#include "mug/stats.hpp"
#include "mug/trainer.hpp"

namespace fs = std::filesystem;
using mug::Tensor;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path data_file(const char* name) { return fs::path(MUG_DATA_DIR) / name; }

std::vector<std::string> names_of(const mug::stats::CDResult& r, const std::vector<std::size_t>& idx) {
  std::vector<std::string> out;
  for (auto i : idx) out.push_back(r.methods[i]);
  return out;
}

Outcome critical_difference_value() {
  const double cd = mug::stats::nemenyi_cd(9, 8, 0.05);
  return {std::abs(cd - 4.247) <= 1e-3, fmt("nemenyi_cd(9,8)=%.6f", cd)};
}

Outcome mean_rank_values() {
  using Ranks = std::map<std::string, double>;
  const Ranks logloss{{"AutoGluon", 1.375}, {"MuGNet", 1.875}, {"tabMLP", 3.75},  {"GBM", 4.375},  {"AutoMM", 5.0},
                      {"RoBERTa", 6.125},   {"Electra", 7.25}, {"ViT", 7.5},      {"Swin", 7.75}};
  const Ranks acc{{"MuGNet", 1.5},  {"AutoGluon", 1.75}, {"GBM", 4.125}, {"AutoMM", 4.875}, {"tabMLP", 5.0625},
                  {"RoBERTa", 6.0}, {"Electra", 7.0},    {"ViT", 7.25},  {"Swin", 7.4375}};
  double worst = 0.0;
  std::string deviations;
  for (const auto& [file, orient, expected] :
       {std::tuple{"benchmark_logloss.csv", mug::stats::Orientation::lower_better, logloss},
        std::tuple{"benchmark_accuracy.csv", mug::stats::Orientation::higher_better, acc}}) {
    const auto m = mug::stats::read_results(data_file(file), orient);
    const auto ranks = mug::stats::mean_ranks(m);
    if (ranks.size() != expected.size()) return {false, "method count mismatch"};
    for (std::size_t i = 0; i < ranks.size(); ++i) {
      auto it = expected.find(m.methods[i]);
      if (it == expected.end()) return {false, "unexpected method " + m.methods[i]};
      const double err = std::abs(ranks[i] - it->second);
      worst = std::max(worst, err);
      if (err > 1e-9) deviations += fmt(" %s %s=%.4f (expected %.4f)", file, m.methods[i].c_str(), ranks[i], it->second);
    }
  }
  return {worst <= 1e-9, fmt("max |mean rank - expected| = %.3g over 18 values", worst) + deviations};
}

Outcome cd_groups() {
  const auto m = mug::stats::read_results(data_file("benchmark_logloss.csv"), mug::stats::Orientation::lower_better);
  const auto r = mug::stats::cd_analysis(m, 0.05);
  const std::vector<std::vector<std::string>> expected{
      {"AutoGluon", "MuGNet", "tabMLP", "GBM", "AutoMM"},
      {"tabMLP", "GBM", "AutoMM", "RoBERTa", "Electra", "ViT", "Swin"}};
  std::vector<std::vector<std::string>> got;
  for (const auto& g : r.groups) got.push_back(names_of(r, g));
  std::string shown;
  for (const auto& g : got) {
    shown += '{';
    for (std::size_t i = 0; i < g.size(); ++i) shown += (i ? "," : "") + g[i];
    shown += '}';
  }
  return {got == expected, "groups " + shown};
}

Outcome pareto_set() {
  const auto pts = mug::stats::read_points(data_file("benchmark_cost_quality.csv"));
  const auto flags = mug::stats::pareto_frontier(pts);
  std::set<std::string> on;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (flags[i]) on.insert(pts[i].name);
  const std::set<std::string> expected{"tabMLP", "GBM", "MuGNet"};
  std::string shown;
  for (const auto& s : on) shown += (shown.empty() ? "" : ",") + s;
  return {on == expected, "frontier {" + shown + "}"};
}

Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  mug::Rng rng(2024);
  const std::size_t n = 12;
  const std::array<std::size_t, 3> dims{5, 4, 6};
  const auto features = mugtest::random_features(n, dims, rng);
  const auto g = mugtest::random_multiplex(n, 0.3, rng);
  auto config = mugtest::small_model(dims, 3);
  auto params = mug::model::MuGNetParams::init(config, 11);
  // Scale weights up so attention coefficients are far from uniform.
  for (auto* t : params.tensors())
    for (auto& v : t->values()) v *= 2.0;
  std::vector<std::size_t> rows(n), targets(n);
  for (std::size_t i = 0; i < n; ++i) {
    rows[i] = i;
    targets[i] = rng.below(3);
  }
  const auto lg = mug::model::loss_and_gradients(g, features, params, rows, targets);
  auto ptrs = params.tensors();
  const auto res = mug::nn::finite_difference_check(
      [&] { return mug::model::loss_value(g, features, params, rows, targets); }, ptrs, lg.grads, {1e-5, 0, 0});
  const double secs = seconds_since(t0);
  return {res.max_relative_error < 1e-4 && secs < 10.0,
          fmt("max relative error %.3g over %zu coordinates in %.2fs", res.max_relative_error,
              res.coordinates_checked, secs)};
}

Outcome fusion_properties() {
  mug::Rng rng(77);
  double alpha_err = 0.0, fused_err = 0.0, prob_err = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(9);
    const std::array<std::size_t, 3> dims{1 + rng.below(5), 1 + rng.below(5), 1 + rng.below(5)};
    const auto features = mugtest::random_features(n, dims, rng);
    const auto g = mugtest::random_multiplex(n, rng.uniform(), rng);
    const auto params = mug::model::MuGNetParams::init(mugtest::small_model(dims, 2 + rng.below(4)), rng.next());
    const auto h = mug::model::encode_modalities(g, features, params);
    const auto trace = mug::model::attention_fuse(h[0], h[1], h[2], params);
    const auto probs = mug::model::classify_head(trace.fused, params);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t m = 0; m < 3; ++m) s += trace.alpha(i, m);
      alpha_err = std::max(alpha_err, std::abs(s - 1.0));
      for (std::size_t c = 0; c < trace.fused.cols(); ++c) {
        double convex = 0.0;
        for (std::size_t m = 0; m < 3; ++m) convex += trace.alpha(i, m) * h[m](i, c);
        fused_err = std::max(fused_err, std::abs(convex - trace.fused(i, c)));
      }
      double p = 0.0;
      for (std::size_t c = 0; c < probs.cols(); ++c) p += probs(i, c);
      prob_err = std::max(prob_err, std::abs(p - 1.0));
    }
  }
  return {alpha_err <= 1e-9 && fused_err <= 1e-12 && prob_err <= 1e-9,
          fmt("1000 fixtures: |sum alpha - 1| %.2g, |fused - convex| %.2g, |sum p - 1| %.2g", alpha_err, fused_err,
              prob_err)};
}

Outcome equitability() {
  using mug::profile::shannon_equitability;
  const std::vector<std::size_t> uniform{7, 7, 7, 7, 7};
  const std::vector<std::size_t> skewed{3, 1};
  const double u = shannon_equitability(uniform);
  const double s = shannon_equitability(skewed);
  bool scale_exact = true;
  mug::Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    std::vector<std::size_t> counts(2 + rng.below(8));
    for (auto& c : counts) c = 1 + rng.below(50);
    const std::size_t k = 2 + rng.below(1000);
    auto scaled = counts;
    for (auto& c : scaled) c *= k;
    scale_exact = scale_exact && shannon_equitability(counts) == shannon_equitability(scaled);
  }
  return {std::abs(u - 1.0) <= 1e-12 && std::abs(s - 0.8113) <= 1e-4 && scale_exact,
          fmt("uniform %.12f, [3,1] %.6f, scale invariance %s", u, s, scale_exact ? "exact" : "broken")};
}

struct Accuracies {
  double full = 0.0;
  std::array<double, 3> single{};
};

Outcome multimodal_dependence() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = mugtest::scratch_dir("acceptance_synthetic");
  const std::uint64_t seed = 3;
  mugtest::SyntheticSpec spec;
  spec.seed = seed;
  const auto synth = mugtest::write_synthetic(dir, spec);
  const auto ds = mug::data::load_dataset(synth.table, synth.image_dir, synth.schema, synth.options);
  mug::data::ExtractorSpec xs;
  xs.image_side = spec.image_side;
  xs.text_dims = 16;
  xs.image_dims_per_channel = 8;
  xs.seed = seed;
  mug::data::FeatureExtractor extractor(xs);
  extractor.fit(ds);
  const auto features = extractor.transform(ds);

  auto run = [&](int keep) {
    auto f = features;
    std::array<Tensor*, 3> blocks{&f.tab, &f.txt, &f.img};
    for (int m = 0; m < 3; ++m)
      if (keep >= 0 && m != keep) *blocks[m] = Tensor(blocks[m]->rows(), blocks[m]->cols(), 0.0);
    const auto train = mug::train::select_split(ds, f, mug::data::Split::train);
    const auto val = mug::train::select_split(ds, f, mug::data::Split::val);
    const auto test = mug::train::select_split(ds, f, mug::data::Split::test);
    const auto k = ds.label_vocab.size();
    const auto gcfg = mug::graph::GraphConfig::shared({mug::graph::Similarity::knn, 0.75, 10});
    const auto mcfg = mug::train::resolve_model_config({}, f, k);
    // Same schedule for every variant. The interaction between the two
    // informative modalities is learned only after a long plateau.
    mug::train::TrainConfig tcfg;
    tcfg.lr_max = 0.01;
    tcfg.patience = 100;
    tcfg.seed = seed;
    const auto r = mug::train::train_model(train, val, k, gcfg, mcfg, tcfg);
    const auto pred = mug::train::predict_unseen(train.features, test.features, gcfg, r.best);
    return mug::stats::accuracy(pred.probs, test.labels);
  };

  Accuracies acc;
  acc.full = run(-1);
  for (int m = 0; m < 3; ++m) acc.single[m] = run(m);
  const double secs = seconds_since(t0);
  const bool ok = acc.full >= 0.90 && *std::max_element(acc.single.begin(), acc.single.end()) <= 0.65 && secs < 300;
  return {ok, fmt("test accuracy full %.3f, tab-only %.3f, txt-only %.3f, img-only %.3f in %.1fs", acc.full,
                  acc.single[0], acc.single[1], acc.single[2], secs)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome train_determinism() {
  const auto dir = mugtest::scratch_dir("acceptance_determinism");
  mugtest::SyntheticSpec spec;
  spec.samples = 120;
  spec.seed = 9;
  const auto synth = mugtest::write_synthetic(dir / "data", spec);
  mugtest::write_schema_file(dir / "schema.cfg", synth);
  {
    std::ofstream cfg(dir / "run.cfg");
    cfg << "extract.image_side = 16\nextract.text_dims = 16\nextract.image_dims = 8\ntrain.epochs = 40\n";
  }
  std::array<fs::path, 2> outs{dir / "run_a", dir / "run_b"};
  for (const auto& out : outs) {
    const std::string cmd = std::string("\"") + MUGBENCH_EXE + "\" --log-level warn train --seed 7 --config \"" +
                            (dir / "run.cfg").string() + "\" --schema \"" + (dir / "schema.cfg").string() +
                            "\" --data \"" + synth.table.string() + "\" --out-dir \"" + out.string() +
                            "\" > \"" + (out.string() + ".log") + "\" 2>&1";
    if (std::system(cmd.c_str()) != 0) return {false, "train exited non-zero; see " + out.string() + ".log"};
  }
  std::vector<std::string> differing;
  const std::vector<std::string> files{"history.csv", "model.mugp", "model.mugp.config", "metrics.csv",
                                       "test_predictions.csv"};
  for (const auto& f : files) {
    const auto a = slurp(outs[0] / f), b = slurp(outs[1] / f);
    if (a.empty() || a != b) differing.push_back(f);
  }
  std::string shown;
  for (const auto& f : differing) shown += " " + f;
  return {differing.empty(), differing.empty() ? "history, checkpoint and predictions byte-identical across two runs"
                                               : "differing or missing:" + shown};
}

Outcome friedman_identities() {
  using namespace mug::stats;
  mug::Rng rng(31);
  double sum_err = 0.0;
  for (int t = 0; t < 500; ++t) {
    ResultsMatrix m;
    const std::size_t k = 2 + rng.below(9), n = 2 + rng.below(10);
    for (std::size_t i = 0; i < k; ++i) m.methods.push_back("m" + std::to_string(i));
    for (std::size_t d = 0; d < n; ++d) m.datasets.push_back("d" + std::to_string(d));
    m.values = Tensor(k, n);
    for (auto& v : m.values.values()) v = static_cast<double>(rng.below(4));  // frequent ties
    m.orientation = rng.below(2) ? Orientation::lower_better : Orientation::higher_better;
    const auto ranks = mean_ranks(m);
    double s = 0.0;
    for (double r : ranks) s += r;
    sum_err = std::max(sum_err, std::abs(s - static_cast<double>(k * (k + 1)) / 2.0));
  }

  ResultsMatrix tied{{"a", "b", "c"}, {"d1", "d2", "d3", "d4"}, Tensor(3, 4, 0.5), Orientation::lower_better};
  const auto ft = friedman_test(tied);
  ResultsMatrix ordered{{"a", "b", "c"}, {"d1", "d2", "d3", "d4"}, Tensor(3, 4), Orientation::lower_better};
  for (std::size_t d = 0; d < 4; ++d)
    for (std::size_t i = 0; i < 3; ++i) ordered.values(i, d) = static_cast<double>(i);
  const auto fo = friedman_test(ordered);
  const bool ok = sum_err <= 1e-9 && ft.statistic == 0.0 && ft.p_value == 1.0 && std::abs(fo.statistic - 8.0) <= 1e-9 &&
                  std::abs(fo.p_value - 0.0183) <= 1e-3;
  return {ok, fmt("rank-sum error %.2g; tied chi2=%g p=%g; ordered chi2=%.6f p=%.6f", sum_err, ft.statistic,
                  ft.p_value, fo.statistic, fo.p_value)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"critical difference for 9 methods on 8 datasets", critical_difference_value},
      {"mean ranks of the benchmark tables", mean_rank_values},
      {"critical-difference groups", cd_groups},
      {"Pareto frontier", pareto_set},
      {"finite-difference gradient check", gradient_check},
      {"fusion and probability invariants", fusion_properties},
      {"Shannon equitability", equitability},
      {"multimodal dependence on synthetic data", multimodal_dependence},
      {"train determinism", train_determinism},
      {"rank and Friedman identities", friedman_identities},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!wanted.empty() && !wanted.contains(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
