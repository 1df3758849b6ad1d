#include "mug/features.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <spdlog/spdlog.h>

#include <json.hpp>

#include "binary_io.hpp"
#include "mug/error.hpp"
#include "mug/image_io.hpp"
#include "mug/rng.hpp"

namespace mug::data {

using nlohmann::json;

// ---------------------------------------------------------------------------
// ModalityFeatures

void ModalityFeatures::check() const {
  const std::size_t n = rows();
  if (tab.rows() != n || txt.rows() != n || img.rows() != n) {
    throw ContractError("modality blocks are not row-aligned");
  }
  if (!tab.all_finite() || !txt.all_finite() || !img.all_finite()) {
    throw ContractError("modality features contain non-finite entries");
  }
}

ModalityFeatures ModalityFeatures::subset(std::span<const std::size_t> rows) const {
  ModalityFeatures out;
  out.tab = gather_rows(tab, rows);
  out.txt = gather_rows(txt, rows);
  out.img = gather_rows(img, rows);
  for (auto r : rows) out.row_ids.push_back(row_ids.at(r));
  return out;
}

namespace {

Tensor stack(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) throw ContractError("cannot stack blocks of different widths");
  std::vector<double> v(a.values().begin(), a.values().end());
  v.insert(v.end(), b.values().begin(), b.values().end());
  return Tensor(a.rows() + b.rows(), a.cols(), std::move(v));
}

}  // namespace

ModalityFeatures ModalityFeatures::concat(const ModalityFeatures& a, const ModalityFeatures& b) {
  ModalityFeatures out;
  out.tab = stack(a.tab, b.tab);
  out.txt = stack(a.txt, b.txt);
  out.img = stack(a.img, b.img);
  out.row_ids = a.row_ids;
  out.row_ids.insert(out.row_ids.end(), b.row_ids.begin(), b.row_ids.end());
  return out;
}

// ---------------------------------------------------------------------------
// Tabular

void TabularEncoder::fit(const Dataset& ds) {
  const auto fields = ds.tabular_fields();
  const auto train = ds.indices_of(Split::train);
  columns_.clear();
  for (std::size_t c = 0; c < fields.size(); ++c) {
    Column col;
    col.name = fields[c]->column_name;
    col.kind = fields[c]->kind;
    if (col.kind == FieldKind::numerical) {
      std::vector<double> seen;
      for (auto r : train)
        if (const auto& cell = ds.samples[r].tabular[c]) seen.push_back(std::get<double>(*cell));
      if (!seen.empty()) {
        std::sort(seen.begin(), seen.end());
        const std::size_t m = seen.size();
        col.median = m % 2 ? seen[m / 2] : 0.5 * (seen[m / 2 - 1] + seen[m / 2]);
      }
    } else {
      for (auto r : train)
        if (const auto& cell = ds.samples[r].tabular[c]) {
          const auto& token = std::get<std::string>(*cell);
          col.codes.try_emplace(token, col.codes.size());
        }
    }
    columns_.push_back(std::move(col));
  }
  fitted_ = true;
}

double TabularEncoder::encode(const Column& col, const OptionalCell& cell) const {
  if (col.kind == FieldKind::numerical) return cell ? std::get<double>(*cell) : col.median;
  const double reserved = static_cast<double>(col.codes.size());
  if (!cell) return reserved;
  const auto it = col.codes.find(std::get<std::string>(*cell));
  return it == col.codes.end() ? reserved : static_cast<double>(it->second);
}

Tensor TabularEncoder::transform(const Dataset& ds) const {
  if (!fitted_) throw ContractError("TabularEncoder used before fit");
  const auto fields = ds.tabular_fields();
  if (fields.size() != columns_.size()) throw SchemaError("tabular columns differ from fitted schema");
  for (std::size_t c = 0; c < fields.size(); ++c) {
    if (fields[c]->column_name != columns_[c].name || fields[c]->kind != columns_[c].kind) {
      throw SchemaError("tabular column '" + fields[c]->column_name + "' differs from fitted schema");
    }
  }
  Tensor out(ds.size(), columns_.size());
  for (std::size_t r = 0; r < ds.size(); ++r)
    for (std::size_t c = 0; c < columns_.size(); ++c)
      out(r, c) = encode(columns_[c], ds.samples[r].tabular[c]);
  return out;
}

std::vector<double> TabularEncoder::transform_column(const Dataset& ds, const std::string& column) const {
  if (!fitted_) throw ContractError("TabularEncoder used before fit");
  const auto fields = ds.tabular_fields();
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    if (columns_[c].name != column) continue;
    std::vector<double> out;
    out.reserve(ds.size());
    for (const auto& s : ds.samples) out.push_back(encode(columns_[c], s.tabular[c]));
    return out;
  }
  for (const auto& f : ds.schema) {
    if (f.column_name == column) {
      throw SchemaError("column '" + column + "' has kind " + std::string(to_string(f.kind)) +
                        ", which the tabular encoder does not handle");
    }
  }
  throw SchemaError("unknown column '" + column + "'");
}

// ---------------------------------------------------------------------------
// Text

namespace {

std::string joined_text(const Sample& s) {
  std::string all;
  for (const auto& t : s.texts) {
    if (!all.empty()) all.push_back(' ');
    all += t;
  }
  return all;
}

}  // namespace

linalg::SparseRow TextExtractor::counts(const Sample& s) const {
  std::map<std::size_t, double> tally;
  for (const auto& tok : tokenize(joined_text(s))) {
    if (auto it = index_.find(tok); it != index_.end()) tally[it->second] += 1.0;
  }
  return {tally.begin(), tally.end()};
}

void TextExtractor::fit(const Dataset& ds, const ExtractorSpec& spec) {
  const auto train = ds.indices_of(Split::train);
  std::set<std::string> tokens;
  for (auto r : train)
    for (auto& tok : tokenize(joined_text(ds.samples[r]))) tokens.insert(std::move(tok));
  vocab_.assign(tokens.begin(), tokens.end());
  index_.clear();
  for (std::size_t i = 0; i < vocab_.size(); ++i) index_[vocab_[i]] = i;

  std::vector<linalg::SparseRow> rows;
  rows.reserve(train.size());
  for (auto r : train) rows.push_back(counts(ds.samples[r]));
  const std::size_t dims = std::min({spec.text_dims, vocab_.size(), train.size()});
  basis_ = linalg::truncated_svd(rows, vocab_.size(), dims, derive_seed(spec.seed, 1));
}

Tensor TextExtractor::transform(const Dataset& ds) const {
  const std::size_t k = basis_.output_dim();
  Tensor out(ds.size(), k);
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (const auto& [col, cnt] : counts(ds.samples[r]))
      for (std::size_t j = 0; j < k; ++j) out(r, j) += cnt * basis_.components(j, col);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Image

std::optional<std::vector<double>> ImageExtractor::pixels(const Sample& s) const {
  if (!s.image_ref) return std::nullopt;
  try {
    return image::resize_planar(image::load(*s.image_ref), side_);
  } catch (const Error& e) {
    spdlog::warn("sample '{}': {}; using a zero image vector", s.id, e.what());
    return std::nullopt;
  }
}

void ImageExtractor::fit(const Dataset& ds, const ExtractorSpec& spec) {
  side_ = spec.image_side;
  dims_per_channel_ = spec.image_dims_per_channel;
  const std::size_t plane = static_cast<std::size_t>(side_) * side_;

  std::vector<std::vector<double>> loaded;
  if (ds.image_field()) {
    for (auto r : ds.indices_of(Split::train))
      if (auto px = pixels(ds.samples[r])) loaded.push_back(std::move(*px));
  }
  for (std::size_t c = 0; c < 3; ++c) {
    Tensor data(loaded.size(), plane);
    for (std::size_t i = 0; i < loaded.size(); ++i)
      std::copy_n(loaded[i].begin() + static_cast<std::ptrdiff_t>(c * plane), plane, data.row(i).begin());
    channel_[c] = linalg::pca(data, dims_per_channel_, derive_seed(spec.seed, 10 + c));
  }
}

Tensor ImageExtractor::transform(const Dataset& ds) const {
  const std::size_t plane = static_cast<std::size_t>(side_) * side_;
  Tensor out(ds.size(), width());
  if (!ds.image_field()) return out;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    const auto px = pixels(ds.samples[r]);
    if (!px) continue;
    for (std::size_t c = 0; c < 3; ++c) {
      const auto& basis = channel_[c];
      for (std::size_t j = 0; j < basis.output_dim(); ++j) {
        double acc = 0.0;
        for (std::size_t p = 0; p < plane; ++p)
          acc += ((*px)[c * plane + p] - basis.mean(0, p)) * basis.components(j, p);
        out(r, c * dims_per_channel_ + j) = acc;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Combined extractor

void FeatureExtractor::fit(const Dataset& ds) {
  tab_.fit(ds);
  txt_.fit(ds, spec_);
  img_.fit(ds, spec_);
}

ModalityFeatures FeatureExtractor::transform(const Dataset& ds) const {
  ModalityFeatures f;
  f.tab = tab_.transform(ds);
  f.txt = txt_.transform(ds);
  f.img = img_.transform(ds);
  for (const auto& s : ds.samples) f.row_ids.push_back(s.id);
  f.check();
  return f;
}

namespace {

json tensor_json(const Tensor& t) {
  return {{"rows", t.rows()}, {"cols", t.cols()},
          {"values", std::vector<double>(t.values().begin(), t.values().end())}};
}

Tensor tensor_from_json(const json& j) {
  return Tensor(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("values").get<std::vector<double>>());
}

json projection_json(const linalg::LinearProjection& p) {
  return {{"mean", tensor_json(p.mean)}, {"components", tensor_json(p.components)}};
}

linalg::LinearProjection projection_from_json(const json& j) {
  return {tensor_from_json(j.at("mean")), tensor_from_json(j.at("components"))};
}

}  // namespace

void FeatureExtractor::save(const std::filesystem::path& path) const {
  json j;
  j["format"] = "mug-extractor";
  j["version"] = 1;
  j["spec"] = {{"text_dims", spec_.text_dims},
               {"image_dims_per_channel", spec_.image_dims_per_channel},
               {"image_side", spec_.image_side},
               {"seed", spec_.seed}};
  json cols = json::array();
  for (const auto& c : tab_.columns_) {
    json codes = json::object();
    for (const auto& [k, v] : c.codes) codes[k] = v;
    cols.push_back({{"name", c.name}, {"kind", to_string(c.kind)}, {"median", c.median}, {"codes", codes}});
  }
  j["tabular"] = cols;
  j["text"] = {{"vocab", txt_.vocab_}, {"basis", projection_json(txt_.basis_)}};
  json channels = json::array();
  for (const auto& ch : img_.channel_) channels.push_back(projection_json(ch));
  j["image"] = {{"side", img_.side_}, {"dims_per_channel", img_.dims_per_channel_}, {"channels", channels}};

  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump() << '\n';
}

FeatureExtractor FeatureExtractor::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open extractor state " + path.string());
  json j;
  try {
    j = json::parse(in);
    ExtractorSpec spec;
    spec.text_dims = j.at("spec").at("text_dims").get<std::size_t>();
    spec.image_dims_per_channel = j.at("spec").at("image_dims_per_channel").get<std::size_t>();
    spec.image_side = j.at("spec").at("image_side").get<int>();
    spec.seed = j.at("spec").at("seed").get<std::uint64_t>();
    FeatureExtractor fx(spec);
    for (const auto& c : j.at("tabular")) {
      TabularEncoder::Column col;
      col.name = c.at("name").get<std::string>();
      col.kind = parse_field_kind(c.at("kind").get<std::string>());
      col.median = c.at("median").get<double>();
      for (const auto& [k, v] : c.at("codes").items()) col.codes[k] = v.get<std::size_t>();
      fx.tab_.columns_.push_back(std::move(col));
    }
    fx.tab_.fitted_ = true;
    fx.txt_.vocab_ = j.at("text").at("vocab").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < fx.txt_.vocab_.size(); ++i) fx.txt_.index_[fx.txt_.vocab_[i]] = i;
    fx.txt_.basis_ = projection_from_json(j.at("text").at("basis"));
    fx.img_.side_ = j.at("image").at("side").get<int>();
    fx.img_.dims_per_channel_ = j.at("image").at("dims_per_channel").get<std::size_t>();
    const auto& chans = j.at("image").at("channels");
    for (std::size_t c = 0; c < 3; ++c) fx.img_.channel_[c] = projection_from_json(chans.at(c));
    return fx;
  } catch (const json::exception& e) {
    throw ParseError("malformed extractor state " + path.string() + ": " + e.what());
  }
}

Tensor encode_tabular(const Dataset& ds) {
  TabularEncoder enc;
  enc.fit(ds);
  return enc.transform(ds);
}

Tensor extract_text_features(const Dataset& ds, const ExtractorSpec& spec) {
  TextExtractor ex;
  ex.fit(ds, spec);
  return ex.transform(ds);
}

Tensor extract_image_features(const Dataset& ds, const ExtractorSpec& spec) {
  ImageExtractor ex;
  ex.fit(ds, spec);
  return ex.transform(ds);
}

// ---------------------------------------------------------------------------
// Block files

void write_block(const std::filesystem::path& path, const Tensor& block,
                 const std::vector<std::string>& ids) {
  if (ids.size() != block.rows()) throw ContractError("write_block: id count differs from row count");
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out.write("MUGF", 4);
    binary::put_u32(out, kBlockVersion);
    binary::put_u64(out, block.rows());
    binary::put_u64(out, block.cols());
    for (double v : block.values()) binary::put_f64(out, v);
  }
  std::ofstream sidecar(path.string() + ".ids");
  if (!sidecar) throw Error("cannot write " + path.string() + ".ids");
  for (const auto& id : ids) sidecar << id << '\n';
}

Block read_block(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  char magic[4];
  binary::read_exact(in, magic, 4, "block magic");
  if (std::string_view(magic, 4) != "MUGF") throw ParseError(path.string() + " is not a MUGF block");
  const auto version = binary::get_u32(in, "block version");
  if (version != kBlockVersion) throw ParseError("unsupported MUGF version " + std::to_string(version));
  const auto n = binary::get_u64(in, "block rows");
  const auto d = binary::get_u64(in, "block cols");
  std::vector<double> values(n * d);
  for (auto& v : values) v = binary::get_f64(in, "block values");
  Block b{Tensor(n, d, std::move(values)), {}};

  std::ifstream sidecar(path.string() + ".ids");
  if (!sidecar) throw ParseError("missing id sidecar for " + path.string());
  std::string line;
  while (std::getline(sidecar, line)) b.ids.push_back(line);
  if (b.ids.size() != n) throw ParseError("id sidecar for " + path.string() + " has wrong length");
  return b;
}

void write_features(const std::filesystem::path& dir, const ModalityFeatures& f) {
  std::filesystem::create_directories(dir);
  write_block(dir / "tab.mugf", f.tab, f.row_ids);
  write_block(dir / "txt.mugf", f.txt, f.row_ids);
  write_block(dir / "img.mugf", f.img, f.row_ids);
}

ModalityFeatures read_features(const std::filesystem::path& dir) {
  auto tab = read_block(dir / "tab.mugf");
  auto txt = read_block(dir / "txt.mugf");
  auto img = read_block(dir / "img.mugf");
  if (tab.ids != txt.ids || tab.ids != img.ids) throw ParseError("feature blocks disagree on row ids");
  ModalityFeatures f{std::move(tab.values), std::move(txt.values), std::move(img.values), std::move(tab.ids)};
  f.check();
  return f;
}

}  // namespace mug::data
