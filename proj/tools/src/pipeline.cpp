#include "pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "mug/csv.hpp"
#include "mug/error.hpp"
#include "mug/trainer.hpp"

namespace mugcli {

using mug::ConfigError;
using mug::KeyValueConfig;
namespace data = mug::data;
namespace graph = mug::graph;

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw ConfigError("config key '" + key + "': expected a number, got '" + text + "'");
  return v;
}

graph::GammaRule parse_gamma_rule(const std::string& key, const std::string& text) {
  if (text == "inverse_dim") return graph::GammaRule::inverse_dim;
  if (text == "median" || text == "median_distance") return graph::GammaRule::median_distance;
  throw ConfigError("config key '" + key + "': unknown gamma rule '" + text + "' (inverse_dim, median)");
}

std::string gamma_rule_name(graph::GammaRule r) {
  return r == graph::GammaRule::inverse_dim ? "inverse_dim" : "median";
}

void apply_layer_keys(const KeyValueConfig& cfg, const std::string& prefix, graph::LayerConfig& layer) {
  if (auto v = cfg.get(prefix + "sim")) layer.sim = graph::parse_similarity(*v);
  if (auto v = cfg.get_double(prefix + "spy")) layer.spy = *v;
  if (auto v = cfg.get_int(prefix + "k")) {
    if (*v <= 0) throw ConfigError(prefix + "k must be positive");
    layer.k = static_cast<std::size_t>(*v);
  }
  if (auto v = cfg.get_double(prefix + "gamma")) layer.rbf_gamma = *v;
  if (auto v = cfg.get(prefix + "gamma_rule")) layer.gamma_rule = parse_gamma_rule(prefix + "gamma_rule", *v);
}

}  // namespace

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw mug::IngestionError("cannot write " + path.string());
  return out;
}

KeyValueConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  return KeyValueConfig::load(path);
}

std::uint64_t resolve_seed(KeyValueConfig& cfg, std::optional<std::uint64_t> flag) {
  std::uint64_t seed = 0;
  if (flag) {
    seed = *flag;
  } else if (auto v = cfg.get_int("seed")) {
    if (*v < 0) throw ConfigError("seed must be non-negative");
    seed = static_cast<std::uint64_t>(*v);
  }
  cfg.set("seed", std::to_string(seed));
  return seed;
}

fs::path image_dir_for(const DataOptions& d) {
  if (!d.image_dir.empty()) return d.image_dir;
  const fs::path p(d.data);
  return p.has_parent_path() ? p.parent_path() : fs::path(".");
}

void require_rows(const fs::path& table) {
  if (!fs::exists(table)) throw mug::IngestionError("data file not found: " + table.string());
  if (fs::file_size(table) == 0 || mug::csv::read_file(table).rows.empty())
    throw mug::DomainError("empty dataset: " + table.string() + " has no data rows");
}

data::SchemaConfig resolve_schema(const KeyValueConfig& cfg, const DataOptions& d) {
  data::SchemaConfig sc;
  if (!d.schema.empty()) {
    sc = data::schema_from_config(KeyValueConfig::load(d.schema));
  } else if (!cfg.with_prefix("column.").empty()) {
    sc = data::schema_from_config(cfg);
  } else {
    if (d.label.empty())
      throw ConfigError("no schema: pass --schema, put column.* keys in --config, or name the --label column");
    sc.options.id_column = d.id_column.empty() ? cfg.get_or("id_column", "") : d.id_column;
    sc.options.split_column = d.split_column.empty() ? cfg.get_or("split_column", "") : d.split_column;
    data::InferenceHints hints;
    hints.label_column = d.label;
    hints.text_columns = d.text_columns;
    hints.image_columns = d.image_columns;
    for (const auto& c : {sc.options.id_column, sc.options.split_column})
      if (!c.empty()) hints.ignore_columns.push_back(c);
    sc.schema = data::infer_schema(d.data, hints);
    data::validate_schema(sc.schema);
  }
  if (!d.id_column.empty()) sc.options.id_column = d.id_column;
  if (!d.split_column.empty()) sc.options.split_column = d.split_column;
  return sc;
}

data::Dataset load_labelled(const KeyValueConfig& cfg, const DataOptions& d, const data::SchemaConfig& sc,
                            std::uint64_t seed) {
  auto ds = data::load_dataset(d.data, image_dir_for(d), sc.schema, sc.options);
  if (ds.empty()) throw mug::DomainError("empty dataset: " + d.data + " has no data rows");
  if (auto min_count = cfg.get_int("data.min_label_count"); min_count && *min_count > 0)
    ds = data::regroup_sparse_labels(std::move(ds), static_cast<std::size_t>(*min_count));
  if (sc.options.split_column.empty()) {
    data::SplitRatios r;
    r.train = cfg.get_double("split.train").value_or(r.train);
    r.val = cfg.get_double("split.val").value_or(r.val);
    r.test = cfg.get_double("split.test").value_or(r.test);
    ds = data::split_dataset(std::move(ds), r, seed);
  }
  ds.check_invariants();
  return ds;
}

data::ExtractorSpec extractor_spec(const KeyValueConfig& cfg, std::uint64_t seed) {
  data::ExtractorSpec s;
  auto count = [&](const char* key, std::size_t& dst) {
    if (auto v = cfg.get_int(key)) {
      if (*v <= 0) throw ConfigError(std::string(key) + " must be positive");
      dst = static_cast<std::size_t>(*v);
    }
  };
  count("extract.text_dims", s.text_dims);
  count("extract.image_dims", s.image_dims_per_channel);
  if (auto v = cfg.get_int("extract.image_side")) {
    if (*v <= 0 || *v > 4096) throw ConfigError("extract.image_side must lie in [1, 4096]");
    s.image_side = static_cast<int>(*v);
  }
  s.seed = seed;
  return s;
}

graph::GraphConfig graph_config(const KeyValueConfig& cfg) {
  graph::LayerConfig base;
  apply_layer_keys(cfg, "graph.", base);
  auto g = graph::GraphConfig::shared(base);
  for (auto m : graph::kModalities) apply_layer_keys(cfg, "graph." + graph::to_string(m) + ".", g.layer(m));
  g.validate();
  return g;
}

void graph_config_to(KeyValueConfig& kv, const graph::GraphConfig& g) {
  for (auto m : graph::kModalities) {
    const auto& l = g.layer(m);
    const std::string p = "graph." + graph::to_string(m) + ".";
    kv.set(p + "sim", graph::to_string(l.sim));
    kv.set(p + "spy", mug::train::format_real(l.spy));
    kv.set(p + "k", std::to_string(l.k));
    if (l.rbf_gamma) kv.set(p + "gamma", mug::train::format_real(*l.rbf_gamma));
    kv.set(p + "gamma_rule", gamma_rule_name(l.gamma_rule));
  }
}

mug::hpo::HPOSpace hpo_space(const KeyValueConfig& cfg, std::uint64_t seed) {
  mug::hpo::HPOSpace s;
  if (auto v = cfg.get("hpo.families")) {
    s.families.clear();
    for (const auto& name : split_list(*v)) s.families.push_back(graph::parse_similarity(name));
  }
  if (auto v = cfg.get("hpo.spy_grid")) {
    s.spy_grid.clear();
    for (const auto& x : split_list(*v)) s.spy_grid.push_back(parse_double("hpo.spy_grid", x));
  }
  if (auto v = cfg.get("hpo.k_grid")) {
    s.k_grid.clear();
    for (const auto& x : split_list(*v)) {
      const double k = parse_double("hpo.k_grid", x);
      if (k < 1 || k != static_cast<double>(static_cast<std::size_t>(k)))
        throw ConfigError("hpo.k_grid entries must be positive integers");
      s.k_grid.push_back(static_cast<std::size_t>(k));
    }
  }
  s.per_modality = cfg.get_bool("hpo.per_modality").value_or(false);
  if (auto v = cfg.get_int("hpo.budget")) {
    if (*v < 0) throw ConfigError("hpo.budget must be non-negative");
    s.budget = static_cast<std::size_t>(*v);
  }
  s.seed = seed;
  s.validate();
  return s;
}

void write_bundle(const fs::path& dir, const ModelBundle& b) {
  fs::create_directories(dir);
  {
    auto out = open_output(dir / "schema.cfg");
    data::write_schema_config(b.schema, out);
  }
  b.extractor.save(dir / "extractor.json");
  data::write_features(dir / "train_features", b.train_features);
  {
    KeyValueConfig kv;
    graph_config_to(kv, b.graph);
    auto out = open_output(dir / "graph.cfg");
    kv.write(out);
  }
  mug::model::save_model(dir / "model.mugp", b.params);
  auto out = open_output(dir / "labels.txt");
  for (const auto& l : b.labels) out << l << '\n';
}

ModelBundle read_bundle(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw mug::IngestionError("model directory not found: " + dir.string());
  ModelBundle b;
  b.schema = data::schema_from_config(KeyValueConfig::load(dir / "schema.cfg"));
  b.extractor = data::FeatureExtractor::load(dir / "extractor.json");
  b.train_features = data::read_features(dir / "train_features");
  b.graph = graph_config(KeyValueConfig::load(dir / "graph.cfg"));
  b.params = mug::model::load_model(dir / "model.mugp");
  std::ifstream in(dir / "labels.txt");
  if (!in) throw mug::IngestionError("cannot read " + (dir / "labels.txt").string());
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) b.labels.push_back(line);
  if (b.labels.size() != b.params.config.n_classes)
    throw mug::ContractError("labels.txt lists " + std::to_string(b.labels.size()) + " labels but the model has " +
                             std::to_string(b.params.config.n_classes) + " classes");
  return b;
}

void write_predictions(const fs::path& path, const std::vector<std::string>& ids,
                       const std::vector<std::string>& labels, const mug::Tensor& probs, const mug::Tensor& alpha) {
  if (probs.rows() != ids.size() || alpha.rows() != ids.size() || probs.cols() != labels.size())
    throw mug::ContractError("prediction table shapes disagree");
  auto out = open_output(path);
  std::vector<std::string> header{"sample_id", "predicted_label"};
  for (const auto& l : labels) header.push_back("p_" + l);
  for (auto m : graph::kModalities) header.push_back("alpha_" + graph::to_string(m));
  mug::csv::write_row(out, header);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.cols(); ++c)
      if (probs(i, c) > probs(i, best)) best = c;
    std::vector<std::string> row{ids[i], labels[best]};
    for (std::size_t c = 0; c < probs.cols(); ++c) row.push_back(mug::train::format_real(probs(i, c)));
    for (std::size_t m = 0; m < 3; ++m) row.push_back(mug::train::format_real(alpha(i, m)));
    mug::csv::write_row(out, row);
  }
}

PredictionTable read_predictions(const fs::path& path) {
  const auto t = mug::csv::read_file(path);
  const auto c_id = t.column("sample_id");
  if (c_id == mug::csv::Table::npos) throw mug::ParseError("predictions file needs a 'sample_id' column");
  PredictionTable p;
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (t.header[c].starts_with("p_")) {
      p.labels.push_back(t.header[c].substr(2));
      cols.push_back(c);
    }
  }
  if (cols.empty()) throw mug::ParseError("predictions file has no p_<label> columns");
  p.probs = mug::Tensor(t.rows.size(), cols.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    p.ids.push_back(t.rows[i].fields[c_id]);
    for (std::size_t j = 0; j < cols.size(); ++j)
      p.probs(i, j) = parse_double("p_" + p.labels[j], t.rows[i].fields[cols[j]]);
  }
  return p;
}

}  // namespace mugcli
