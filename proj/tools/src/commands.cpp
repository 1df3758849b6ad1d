#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>

#include <spdlog/spdlog.h>

#include "mug/cd_diagram.hpp"
#include "mug/csv.hpp"
#include "mug/error.hpp"
#include "mug/profile.hpp"
#include "mug/results_io.hpp"
#include "mug/stats.hpp"
#include "mug/trainer.hpp"

namespace mugcli {

using mug::KeyValueConfig;
namespace data = mug::data;
namespace graph = mug::graph;
namespace stats = mug::stats;
namespace train = mug::train;

namespace {

fs::path manifest_beside(const fs::path& out) {
  return out.parent_path() / (out.stem().string() + ".manifest.json");
}

void place_manifest(RunManifest& m, const CommonOptions& c, const fs::path& fallback) {
  m.set_output(c.manifest.empty() ? fallback : fs::path(c.manifest));
}

/// Loads the config (hashed first) and settles the seed.
KeyValueConfig open_config(const CommonOptions& c, RunManifest& m, std::uint64_t& seed) {
  if (!c.config.empty()) m.add_input(c.config);
  auto cfg = load_config(c.config);
  seed = resolve_seed(cfg, c.seed);
  m.set_seed(seed);
  m.set_config(cfg);
  return cfg;
}

void hash_data_inputs(const DataOptions& d, RunManifest& m) {
  if (d.data.empty()) throw mug::ConfigError("--data is required");
  if (!d.schema.empty()) m.add_input(d.schema);
  require_rows(d.data);
  m.add_input(d.data);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Data loaded, split and featurised for a training run.
struct Prepared {
  KeyValueConfig cfg;
  std::uint64_t seed = 0;
  data::SchemaConfig schema;
  data::Dataset ds;
  data::FeatureExtractor extractor;
  data::ModalityFeatures features;
};

Prepared prepare(const CommonOptions& c, const DataOptions& d, RunManifest& m,
                 const std::map<std::string, std::string>& overrides) {
  Prepared p;
  p.cfg = open_config(c, m, p.seed);
  if (c.seed || !p.cfg.contains("train.seed")) p.cfg.set("train.seed", std::to_string(p.seed));
  for (const auto& [k, v] : overrides) p.cfg.set(k, v);
  m.set_config(p.cfg);
  hash_data_inputs(d, m);
  p.schema = resolve_schema(p.cfg, d);
  p.ds = load_labelled(p.cfg, d, p.schema, p.seed);
  p.extractor = data::FeatureExtractor(extractor_spec(p.cfg, p.seed));
  p.extractor.fit(p.ds);
  p.features = p.extractor.transform(p.ds);
  spdlog::info("{} samples: {} train, {} val, {} test; feature widths tab {} txt {} img {}", p.ds.size(),
               p.ds.indices_of(data::Split::train).size(), p.ds.indices_of(data::Split::val).size(),
               p.ds.indices_of(data::Split::test).size(), p.features.tab.cols(), p.features.txt.cols(),
               p.features.img.cols());
  return p;
}

struct Blocks {
  train::LabelledBlock train;
  train::LabelledBlock val;
};

Blocks training_blocks(const Prepared& p) {
  Blocks b{train::select_split(p.ds, p.features, data::Split::train),
           train::select_split(p.ds, p.features, data::Split::val)};
  if (b.train.labels.empty()) throw mug::ConfigError("training split is empty");
  if (b.val.labels.empty())
    throw mug::ConfigError("validation split is empty; raise split.val or tag rows in the split column");
  return b;
}

std::map<std::string, std::string> train_overrides(const TrainOptions& o) {
  std::map<std::string, std::string> out;
  if (o.epochs) out["train.epochs"] = std::to_string(*o.epochs);
  if (o.patience) out["train.patience"] = std::to_string(*o.patience);
  if (o.lr) out["train.lr_max"] = train::format_real(*o.lr);
  return out;
}

KeyValueConfig resolved_config(const KeyValueConfig& cfg, const graph::GraphConfig& g,
                               const mug::model::ModelConfig& mc, const train::TrainConfig& tc) {
  KeyValueConfig out = cfg;
  graph_config_to(out, g);
  mc.to_config(out);
  tc.to_config(out);
  return out;
}

void write_metrics(const fs::path& path, const std::vector<std::pair<std::string, std::string>>& rows) {
  auto out = open_output(path);
  mug::csv::write_row(out, {"metric", "value"});
  for (const auto& [k, v] : rows) mug::csv::write_row(out, {k, v});
}

/// History, model bundle, and held-out test scoring shared by train and hpo.
void finish_training(const fs::path& dir, const Prepared& p, const Blocks& blocks, const train::TrainResult& r,
                     const graph::GraphConfig& g, bool history_timing, RunManifest& m) {
  fs::create_directories(dir);
  train::write_history(dir / "history.csv", r.history, history_timing);
  ModelBundle bundle{p.schema, p.extractor, blocks.train.features, g, r.best, p.ds.label_vocab};
  write_bundle(dir, bundle);
  m.set_duration("train_seconds", r.train_seconds);

  const auto& sel = r.selected();
  std::vector<std::pair<std::string, std::string>> metrics{
      {"selected_epoch", std::to_string(r.selected_epoch)},
      {"epochs_run", std::to_string(r.history.size())},
      {"stop_reason", r.stop_reason},
      {"val_logloss", train::format_real(sel.val_logloss)},
      {"val_accuracy", train::format_real(sel.val_accuracy)}};
  std::cout << "selected epoch " << r.selected_epoch << " of " << r.history.size() << " (" << r.stop_reason
            << "): val log-loss " << train::format_real(sel.val_logloss) << ", val accuracy "
            << train::format_real(sel.val_accuracy) << '\n';

  const auto test = train::select_split(p.ds, p.features, data::Split::test);
  if (!test.labels.empty()) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto pred = train::predict_unseen(blocks.train.features, test.features, g, r.best);
    m.set_duration("test_seconds", seconds_since(t0));
    const double ll = stats::log_loss(pred.probs, test.labels);
    const double acc = stats::accuracy(pred.probs, test.labels);
    metrics.emplace_back("test_logloss", train::format_real(ll));
    metrics.emplace_back("test_accuracy", train::format_real(acc));
    write_predictions(dir / "test_predictions.csv", test.features.row_ids, p.ds.label_vocab, pred.probs,
                      pred.alpha);
    std::cout << "test log-loss " << train::format_real(ll) << ", test accuracy " << train::format_real(acc)
              << " over " << test.labels.size() << " rows\n";
  }
  write_metrics(dir / "metrics.csv", metrics);
}

std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += sep;
    out += s;
  }
  return out;
}

}  // namespace

void run_profile(const ProfileOptions& o, RunManifest& m) {
  place_manifest(m, o.common, manifest_beside(o.out));
  std::uint64_t seed = 0;
  auto cfg = open_config(o.common, m, seed);
  hash_data_inputs(o.data, m);
  const auto sc = resolve_schema(cfg, o.data);
  const auto ds = data::load_dataset(o.data.data, image_dir_for(o.data), sc.schema, sc.options);
  const auto p = mug::profile::profile_dataset(ds, {o.train_only});
  mug::profile::write_report(p, o.out);
  mug::profile::print_summary(p, ds, std::cout);
}

void run_build_graphs(const BuildGraphsOptions& o, RunManifest& m) {
  const fs::path dir = o.out_dir;
  place_manifest(m, o.common, dir / "manifest.json");
  auto p = prepare(o.common, o.data, m, {});
  const auto g = graph_config(p.cfg);
  KeyValueConfig resolved = p.cfg;
  graph_config_to(resolved, g);
  m.set_config(resolved);

  std::vector<std::size_t> train_rows = p.ds.indices_of(data::Split::train);
  std::vector<std::size_t> order = train_rows;
  for (auto s : {data::Split::val, data::Split::test})
    for (auto i : p.ds.indices_of(s)) order.push_back(i);
  if (train_rows.empty()) throw mug::ConfigError("training split is empty");
  const auto train_features = p.features.subset(train_rows);
  const auto all_features = p.features.subset(order);

  const auto t0 = std::chrono::steady_clock::now();
  const auto train_graph = graph::build_multiplex_graph(train_features, g);
  const auto inference_graph = graph::extend_inference_graph(train_features, all_features, g);
  m.set_duration("graph_seconds", seconds_since(t0));

  data::write_features(dir / "features" / "train", train_features);
  data::write_features(dir / "features" / "inference", all_features);
  graph::write_multiplex(dir / "graphs" / "train", train_graph);
  graph::write_multiplex(dir / "graphs" / "inference", inference_graph);
  p.extractor.save(dir / "extractor.json");
  {
    auto out = open_output(dir / "schema.cfg");
    data::write_schema_config(p.schema, out);
  }
  {
    auto out = open_output(dir / "graph.cfg");
    KeyValueConfig kv;
    graph_config_to(kv, g);
    kv.write(out);
  }
  auto out = open_output(dir / "split.csv");
  mug::csv::write_row(out, {"sample_id", "split"});
  for (auto i : order) mug::csv::write_row(out, {p.ds.samples[i].id, std::string(data::to_string(p.ds.split[i]))});

  for (auto mod : graph::kModalities) {
    std::cout << graph::to_string(mod) << " [" << g.layer(mod).describe() << "]: "
              << train_graph.layer(mod).edge_count() << " train edges, "
              << inference_graph.layer(mod).edge_count() << " inference edges\n";
  }
}

void run_train(const TrainOptions& o, RunManifest& m) {
  const fs::path dir = o.out_dir;
  place_manifest(m, o.common, dir / "manifest.json");
  const auto p = prepare(o.common, o.data, m, train_overrides(o));
  const auto blocks = training_blocks(p);
  const auto g = graph_config(p.cfg);
  const auto mc = train::resolve_model_config(mug::model::ModelConfig::from_config(p.cfg), p.features,
                                              p.ds.label_vocab.size());
  const auto tc = train::TrainConfig::from_config(p.cfg);
  m.set_config(resolved_config(p.cfg, g, mc, tc));

  const auto r = train::train_model(blocks.train, blocks.val, p.ds.label_vocab.size(), g, mc, tc);
  finish_training(dir, p, blocks, r, g, o.history_timing, m);
}

void run_hpo(const HpoOptions& o, RunManifest& m) {
  const fs::path dir = o.train.out_dir;
  place_manifest(m, o.train.common, dir / "manifest.json");
  auto overrides = train_overrides(o.train);
  if (o.per_modality) overrides["hpo.per_modality"] = "true";
  if (o.budget) overrides["hpo.budget"] = std::to_string(*o.budget);
  const auto p = prepare(o.train.common, o.train.data, m, overrides);
  const auto blocks = training_blocks(p);
  const auto space = hpo_space(p.cfg, p.seed);
  const auto mc = train::resolve_model_config(mug::model::ModelConfig::from_config(p.cfg), p.features,
                                              p.ds.label_vocab.size());
  const auto tc = train::TrainConfig::from_config(p.cfg);
  m.set_config(resolved_config(p.cfg, graph_config(p.cfg), mc, tc));

  const auto t0 = std::chrono::steady_clock::now();
  const auto result = mug::hpo::hpo_search(blocks.train, blocks.val, p.ds.label_vocab.size(), space, mc, tc);
  m.set_duration("search_seconds", seconds_since(t0));

  {
    auto out = open_output(dir / "trials.csv");
    mug::csv::write_row(out, {"trial", "tab", "txt", "img", "val_logloss", "val_accuracy", "error"});
    for (const auto& t : result.trials) {
      mug::csv::write_row(out, {std::to_string(t.index), t.config.tab.describe(), t.config.txt.describe(),
                                t.config.img.describe(),
                                t.val_logloss ? train::format_real(*t.val_logloss) : "",
                                t.val_accuracy ? train::format_real(*t.val_accuracy) : "", t.error});
    }
  }
  {
    KeyValueConfig best;
    graph_config_to(best, result.best_config);
    auto out = open_output(dir / "best_config.cfg");
    best.write(out);
  }
  std::cout << result.trials.size() << " trials; best trial " << result.best_index << ": tab ["
            << result.best_config.tab.describe() << "] txt [" << result.best_config.txt.describe() << "] img ["
            << result.best_config.img.describe() << "]\n";
  finish_training(dir, p, blocks, result.best_result, result.best_config, o.train.history_timing, m);
}

void run_predict(const PredictOptions& o, RunManifest& m) {
  place_manifest(m, o.common, manifest_beside(o.out));
  std::uint64_t seed = 0;
  open_config(o.common, m, seed);
  if (o.model_dir.empty()) throw mug::ConfigError("--model-dir is required");
  if (!fs::is_directory(o.model_dir)) throw mug::IngestionError("model directory not found: " + o.model_dir);
  m.add_input_tree(o.model_dir);
  DataOptions d;
  d.data = o.data;
  d.image_dir = o.image_dir;
  hash_data_inputs(d, m);

  const auto bundle = read_bundle(o.model_dir);
  auto options = bundle.schema.options;
  options.split_column.clear();
  options.label_optional = true;
  const auto ds = data::load_dataset(o.data, image_dir_for(d), bundle.schema.schema, options);
  if (ds.empty()) throw mug::DomainError("empty dataset: " + o.data + " has no data rows");
  const auto unseen = bundle.extractor.transform(ds);

  const auto t0 = std::chrono::steady_clock::now();
  const auto pred = train::predict_unseen(bundle.train_features, unseen, bundle.graph, bundle.params);
  m.set_duration("test_seconds", seconds_since(t0));
  write_predictions(o.out, unseen.row_ids, bundle.labels, pred.probs, pred.alpha);
  std::cout << "wrote " << unseen.rows() << " predictions to " << o.out << '\n';
}

void run_evaluate(const EvaluateOptions& o, RunManifest& m) {
  place_manifest(m, o.common, manifest_beside(o.out));
  std::uint64_t seed = 0;
  auto cfg = open_config(o.common, m, seed);
  if (o.predictions.empty()) throw mug::ConfigError("--predictions is required");
  m.add_input(o.predictions);
  data::SchemaConfig sc;
  if (!o.model_dir.empty()) {
    m.add_input(fs::path(o.model_dir) / "schema.cfg");
    sc = data::schema_from_config(KeyValueConfig::load(fs::path(o.model_dir) / "schema.cfg"));
    sc.options.split_column.clear();
  }
  hash_data_inputs(o.data, m);
  if (o.model_dir.empty()) sc = resolve_schema(cfg, o.data);

  const auto preds = read_predictions(o.predictions);
  const auto ds = data::load_dataset(o.data.data, image_dir_for(o.data), sc.schema, sc.options);
  std::map<std::string, std::string> truth;
  for (const auto& s : ds.samples)
    if (s.label) truth[s.id] = ds.label_vocab[*s.label];

  std::vector<std::size_t> rows, labels;
  for (std::size_t i = 0; i < preds.ids.size(); ++i) {
    auto it = truth.find(preds.ids[i]);
    if (it == truth.end()) continue;
    auto pos = std::find(preds.labels.begin(), preds.labels.end(), it->second);
    if (pos == preds.labels.end())
      throw mug::DomainError("sample " + preds.ids[i] + " has label '" + it->second +
                             "' which the predictions do not cover");
    rows.push_back(i);
    labels.push_back(static_cast<std::size_t>(pos - preds.labels.begin()));
  }
  if (rows.empty()) throw mug::DomainError("no prediction matches a labelled sample id");
  mug::Tensor probs(rows.size(), preds.labels.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < probs.cols(); ++c) probs(r, c) = preds.probs(rows[r], c);

  const double ll = stats::log_loss(probs, labels);
  const double acc = stats::accuracy(probs, labels);
  write_metrics(o.out, {{"log_loss", train::format_real(ll)},
                        {"accuracy", train::format_real(acc)},
                        {"rows", std::to_string(rows.size())}});
  std::cout << "log_loss " << train::format_real(ll) << "\naccuracy " << train::format_real(acc) << "\nrows "
            << rows.size() << '\n';

  if (!o.append_results.empty()) {
    const bool fresh = !fs::exists(o.append_results) || fs::file_size(o.append_results) == 0;
    std::ofstream out(o.append_results, std::ios::app | std::ios::binary);
    if (!out) throw mug::IngestionError("cannot append to " + o.append_results);
    const std::string name = o.dataset_name.empty() ? fs::path(o.data.data).stem().string() : o.dataset_name;
    if (fresh) mug::csv::write_row(out, {"method", "dataset", "metric", "value"});
    mug::csv::write_row(out, {o.method, name, "log_loss", train::format_real(ll)});
    mug::csv::write_row(out, {o.method, name, "accuracy", train::format_real(acc)});
  }
}

void run_rank(const RankOptions& o, RunManifest& m) {
  const fs::path dir = o.out_dir;
  place_manifest(m, o.common, dir / "manifest.json");
  std::uint64_t seed = 0;
  auto cfg = open_config(o.common, m, seed);
  if (o.results.empty()) throw mug::ConfigError("--results is required");
  if (o.orientation.empty()) throw mug::ConfigError("--orientation is required (lower or higher)");
  m.add_input(o.results);
  cfg.set("rank.orientation", o.orientation);
  cfg.set("rank.alpha", train::format_real(o.alpha));
  if (!o.metric.empty()) cfg.set("rank.metric", o.metric);
  m.set_config(cfg);

  const auto results = stats::read_results(o.results, stats::parse_orientation(o.orientation), o.metric);
  const auto cd = stats::cd_analysis(results, o.alpha);

  std::ostringstream report;
  std::vector<std::size_t> order(cd.methods.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return cd.mean_ranks[a] < cd.mean_ranks[b]; });
  report << "methods " << results.method_count() << ", datasets " << results.dataset_count() << ", orientation "
         << stats::to_string(results.orientation) << '\n';
  for (auto i : order) {
    char line[256];
    std::snprintf(line, sizeof line, "  %-20s mean rank %.4f\n", cd.methods[i].c_str(), cd.mean_ranks[i]);
    report << line;
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "Friedman chi2=%.4f df=%zu p=%.6g\n", cd.friedman.statistic,
                cd.friedman.degrees_of_freedom, cd.friedman.p_value);
  report << buf;
  std::snprintf(buf, sizeof buf, "CD=%.4f (alpha=%g)\n", cd.critical_difference, cd.alpha);
  report << buf;
  for (std::size_t g = 0; g < cd.groups.size(); ++g) {
    std::vector<std::string> names;
    for (auto i : cd.groups[g]) names.push_back(cd.methods[i]);
    report << "group " << g + 1 << ": " << join(names, ", ") << '\n';
  }

  {
    auto out = open_output(dir / "ranks.csv");
    stats::write_rank_report(out, cd);
  }
  {
    auto out = open_output(dir / "cd_summary.csv");
    stats::write_cd_summary(out, cd, results.dataset_count());
  }
  {
    auto out = open_output(dir / "groups.csv");
    stats::write_groups(out, cd);
  }
  {
    auto out = open_output(dir / "cd_diagram.svg");
    stats::write_cd_diagram(out, cd, {.title = o.title});
  }
  {
    // Box statistics over min-max normalised scores, one box per method.
    const auto norm = stats::minmax_normalize(results);
    std::vector<stats::BoxStats> boxes;
    for (std::size_t i = 0; i < norm.method_count(); ++i) {
      std::vector<double> row(norm.dataset_count());
      for (std::size_t d = 0; d < row.size(); ++d) row[d] = norm.values(i, d);
      boxes.push_back(stats::box_summary(row));
    }
    auto out = open_output(dir / "box_stats.csv");
    stats::write_box_stats(out, norm.methods, boxes);
  }
  {
    auto out = open_output(dir / "report.txt");
    out << report.str();
  }
  std::cout << report.str();
}

void run_pareto(const ParetoOptions& o, RunManifest& m) {
  place_manifest(m, o.common, manifest_beside(o.out));
  std::uint64_t seed = 0;
  auto cfg = open_config(o.common, m, seed);
  std::vector<stats::ParetoPoint> points;
  if (!o.points.empty()) {
    m.add_input(o.points);
    points = stats::read_points(o.points, o.name_column, o.cost_column, o.quality_column);
  } else {
    if (o.results.empty() || o.durations.empty() || o.orientation.empty())
      throw mug::ConfigError("pass --points, or --results with --orientation and --durations");
    m.add_input(o.results);
    m.add_input(o.durations);
    const auto results = stats::read_results(o.results, stats::parse_orientation(o.orientation), o.metric);
    const auto quality = stats::method_means(stats::minmax_normalize(results));
    const auto table = mug::csv::read_file(o.durations);
    const auto cn = table.column(o.name_column);
    const auto cc = table.column(o.cost_column);
    if (cn == mug::csv::Table::npos || cc == mug::csv::Table::npos)
      throw mug::ParseError("durations file needs columns '" + o.name_column + "' and '" + o.cost_column + "'");
    std::map<std::string, double> cost;
    for (const auto& r : table.rows) {
      try {
        cost[r.fields[cn]] = std::stod(r.fields[cc]);
      } catch (const std::exception&) {
        throw mug::ParseError("bad duration '" + r.fields[cc] + "'", r.line);
      }
    }
    for (std::size_t i = 0; i < results.method_count(); ++i) {
      auto it = cost.find(results.methods[i]);
      if (it == cost.end()) throw mug::ParseError("no duration for method " + results.methods[i]);
      points.push_back({results.methods[i], it->second, quality[i]});
    }
  }
  cfg.set("pareto.source", o.points.empty() ? "results" : "points");
  m.set_config(cfg);

  const auto frontier = stats::pareto_frontier(points);
  {
    auto out = open_output(o.out);
    stats::write_pareto_report(out, points, frontier);
  }
  std::vector<std::size_t> on;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (frontier[i]) on.push_back(i);
  std::sort(on.begin(), on.end(), [&](auto a, auto b) { return points[a].cost < points[b].cost; });
  std::cout << "Pareto frontier (" << on.size() << " of " << points.size() << "):\n";
  for (auto i : on) {
    char line[256];
    std::snprintf(line, sizeof line, "  %-20s cost %.6g quality %.6g\n", points[i].name.c_str(), points[i].cost,
                  points[i].quality);
    std::cout << line;
  }
}

}  // namespace mugcli
