#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "synthetic.hpp"

#include "mug/csv.hpp"
#include "mug/dataset.hpp"
#include "mug/error.hpp"
#include "mug/features.hpp"
#include "mug/image_io.hpp"
#include "mug/keyvalue.hpp"
#include "mug/linalg.hpp"

using namespace mug;
using namespace mug::data;
namespace fs = std::filesystem;

namespace {

FieldSchema basic_schema() {
  return {{"x", FieldKind::numerical, true},
          {"colour", FieldKind::categorical, true},
          {"note", FieldKind::text, true},
          {"y", FieldKind::label, false}};
}

Dataset load_text(const std::string& name, const std::string& csv, const FieldSchema& schema,
                  const LoadOptions& opts = {}) {
  const auto dir = mugtest::scratch_dir("dataset_" + name);
  mugtest::write_text(dir / "t.csv", csv);
  return load_dataset(dir / "t.csv", dir, schema, opts);
}

}  // namespace

TEST(Csv, QuotedFieldsRoundTrip) {
  std::stringstream ss;
  csv::write_row(ss, {"plain", "with,comma", "with \"quote\"", "multi\nline"});
  ss.seekg(0);
  std::stringstream full;
  full << "a,b,c,d\n" << ss.str();
  const auto t = csv::read(full);
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0].fields[1], "with,comma");
  EXPECT_EQ(t.rows[0].fields[2], "with \"quote\"");
  EXPECT_EQ(t.rows[0].fields[3], "multi\nline");
}

TEST(Csv, RaggedRowIsParseError) {
  std::stringstream ss("a,b\n1,2\n3\n");
  EXPECT_THROW(csv::read(ss), ParseError);
}

TEST(KeyValue, LaterAssignmentsWinAndCommentsIgnored) {
  std::stringstream ss("# comment\ngraph.k = 5\n\ngraph.k = 7  \nname = a b\n");
  const auto kv = KeyValueConfig::parse(ss);
  EXPECT_EQ(kv.get_int("graph.k"), 7);
  EXPECT_EQ(kv.get("name"), "a b");
  EXPECT_THROW(kv.get_double("name"), ConfigError);
}

TEST(Schema, RequiresExactlyOneLabel) {
  EXPECT_THROW(validate_schema({{"x", FieldKind::numerical, true}}), SchemaError);
  EXPECT_THROW(validate_schema({{"y", FieldKind::label, true}, {"z", FieldKind::label, true}}), SchemaError);
  EXPECT_NO_THROW(validate_schema(basic_schema()));
}

TEST(LoadDataset, EmptyCategoricalCellIsMissing) {
  const auto ds = load_text("missing", "x,colour,note,y\n1.5,,hello,A\n2,red,,B\n", basic_schema());
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_FALSE(ds.samples[0].tabular[1].has_value());
  EXPECT_EQ(std::get<double>(*ds.samples[0].tabular[0]), 1.5);
  EXPECT_EQ(ds.samples[1].texts[0], "");
}

TEST(LoadDataset, HeaderOnlyFileGivesEmptyDataset) {
  const auto ds = load_text("empty", "x,colour,note,y\n", basic_schema());
  EXPECT_EQ(ds.size(), 0u);
  EXPECT_EQ(ds.schema.size(), 4u);
}

TEST(LoadDataset, PreservesRowOrderAndIds) {
  LoadOptions opts;
  opts.id_column = "id";
  const auto ds = load_text("order", "id,x,colour,note,y\na,1,r,t,A\nb,2,g,t,B\nc,3,b,t,A\n", basic_schema(), opts);
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.samples[0].id, "a");
  EXPECT_EQ(ds.samples[1].id, "b");
  EXPECT_EQ(ds.samples[2].id, "c");
}

TEST(LoadDataset, MissingColumnIsSchemaError) {
  EXPECT_THROW(load_text("nocol", "x,colour,y\n1,r,A\n", basic_schema()), SchemaError);
}

TEST(LoadDataset, OptionalLabelColumnMayBeAbsent) {
  LoadOptions opts;
  opts.label_optional = true;
  const auto ds = load_text("nolabel", "x,colour,note\n1,r,t\n", basic_schema(), opts);
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_FALSE(ds.samples[0].label.has_value());
  EXPECT_TRUE(ds.label_vocab.empty());
}

TEST(Split, RemainderGoesToTrain) {
  Dataset ds;
  ds.schema = basic_schema();
  ds.samples.resize(897);
  ds.split.assign(897, Split::train);
  const auto s = split_dataset(ds, {0.80, 0.05, 0.15}, 1);
  const auto tr = s.indices_of(Split::train).size();
  const auto va = s.indices_of(Split::val).size();
  const auto te = s.indices_of(Split::test).size();
  EXPECT_EQ(tr + va + te, 897u);
  EXPECT_EQ(tr, 719u);
  EXPECT_NEAR(static_cast<double>(va), 45.0, 1.0);
  EXPECT_NEAR(static_cast<double>(te), 133.0, 1.0);
}

TEST(Split, AllTrainRatio) {
  Dataset ds;
  ds.samples.resize(10);
  const auto s = split_dataset(ds, {1.0, 0.0, 0.0}, 3);
  EXPECT_EQ(s.indices_of(Split::train).size(), 10u);
}

TEST(Split, SeedDeterminesPartition) {
  Dataset ds;
  ds.samples.resize(100);
  const auto a = split_dataset(ds, {}, 5), b = split_dataset(ds, {}, 5), c = split_dataset(ds, {}, 6);
  EXPECT_EQ(a.split, b.split);
  EXPECT_NE(a.split, c.split);
}

TEST(Split, BadRatiosRejected) {
  Dataset ds;
  ds.samples.resize(10);
  EXPECT_THROW(split_dataset(ds, {0.5, 0.5, 0.5}, 0), DomainError);
}

namespace {
Dataset labelled(const std::vector<std::pair<std::string, std::size_t>>& counts, std::size_t missing = 0) {
  Dataset ds;
  ds.schema = {{"y", FieldKind::label, true}};
  for (const auto& [name, n] : counts) {
    ds.label_vocab.push_back(name);
    for (std::size_t i = 0; i < n; ++i) {
      Sample s;
      s.label = ds.label_vocab.size() - 1;
      ds.samples.push_back(s);
    }
  }
  for (std::size_t i = 0; i < missing; ++i) ds.samples.push_back(Sample{});
  ds.split.assign(ds.samples.size(), Split::train);
  return ds;
}
}  // namespace

TEST(Regroup, SparseLabelsMergeIntoOther) {
  const auto out = regroup_sparse_labels(labelled({{"A", 50}, {"B", 3}, {"C", 2}}), 10);
  ASSERT_EQ(out.label_vocab, (std::vector<std::string>{"A", "Other"}));
  std::size_t other = 0;
  for (const auto& s : out.samples) other += *s.label == 1;
  EXPECT_EQ(other, 5u);
}

TEST(Regroup, ZeroMinCountLeavesDatasetUnchanged) {
  const auto in = labelled({{"A", 4}, {"B", 1}});
  const auto out = regroup_sparse_labels(in, 0);
  EXPECT_EQ(out.label_vocab, in.label_vocab);
  for (std::size_t i = 0; i < in.size(); ++i) EXPECT_EQ(out.samples[i].label, in.samples[i].label);
}

TEST(Regroup, MissingLabelsBecomeNoneType) {
  const auto out = regroup_sparse_labels(labelled({}, 4), 0);
  ASSERT_EQ(out.label_vocab, (std::vector<std::string>{std::string(kNoneTypeLabel)}));
  for (const auto& s : out.samples) EXPECT_EQ(s.label, 0u);
}

TEST(Tokenize, LowercasesAndSplitsOnPunctuation) {
  EXPECT_EQ(tokenize("Hello, World!  x2"), (std::vector<std::string>{"hello", "world", "x2"}));
  EXPECT_TRUE(tokenize("  ...  ").empty());
}

TEST(TabularEncoder, CategoricalCodesByFirstAppearance) {
  const auto ds = load_text("cats", "x,colour,note,y\n1,red,t,A\n2,blue,t,A\n3,red,t,B\n4,green,t,B\n",
                            basic_schema());
  TabularEncoder enc;
  enc.fit(ds);
  EXPECT_EQ(enc.transform_column(ds, "colour"), (std::vector<double>{0, 1, 0, 2}));
  EXPECT_EQ(enc.transform_column(ds, "x"), (std::vector<double>{1, 2, 3, 4}));
}

TEST(TabularEncoder, NumericalPassThroughAndMedianImputation) {
  const auto ds = load_text("median", "x,colour,note,y\n1,a,t,A\n3,a,t,A\n5,a,t,B\n,a,t,B\n1.5,a,t,B\n",
                            basic_schema());
  auto train_only = ds;
  train_only.split = {Split::train, Split::train, Split::train, Split::test, Split::test};
  TabularEncoder enc;
  enc.fit(train_only);
  const auto col = enc.transform_column(train_only, "x");
  EXPECT_EQ(col[3], 3.0);
  EXPECT_EQ(col[4], 1.5);
}

TEST(TabularEncoder, UnseenCategoryUsesReservedCode) {
  auto ds = load_text("unseen", "x,colour,note,y\n1,red,t,A\n2,blue,t,A\n3,teal,t,B\n4,,t,B\n", basic_schema());
  ds.split = {Split::train, Split::train, Split::test, Split::test};
  TabularEncoder enc;
  enc.fit(ds);
  const auto col = enc.transform_column(ds, "colour");
  EXPECT_EQ(col[2], 2.0);
  EXPECT_EQ(col[3], 2.0);
}

TEST(TextExtractor, AllEmptyTextsGiveZeroWidthBlock) {
  const auto ds = load_text("notext", "x,colour,note,y\n1,a,,A\n2,b,,B\n", basic_schema());
  TextExtractor tx;
  tx.fit(ds, {});
  const auto out = tx.transform(ds);
  EXPECT_EQ(out.rows(), 2u);
  EXPECT_EQ(out.cols(), 0u);
}

TEST(TextExtractor, MatchesExactSingularDecomposition) {
  const auto ds = load_text("svd", "x,colour,note,y\n1,a,a b,A\n2,b,a a,B\n", basic_schema());
  ExtractorSpec spec;
  spec.text_dims = 1;
  TextExtractor tx;
  tx.fit(ds, spec);
  const auto out = tx.transform(ds);
  ASSERT_EQ(out.cols(), 1u);
  Eigen::Matrix2d counts;
  counts << 1, 1, 2, 0;  // rows: documents, columns: vocabulary {a, b}
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(counts, Eigen::ComputeFullV);
  Eigen::Vector2d v = svd.matrixV().col(0);
  if (std::abs(v(1)) > std::abs(v(0)) ? v(1) < 0 : v(0) < 0) v = -v;
  const Eigen::Vector2d expected = counts * v;
  EXPECT_NEAR(out(0, 0), expected(0), 1e-9);
  EXPECT_NEAR(out(1, 0), expected(1), 1e-9);
}

TEST(TextExtractor, RowCountEqualsSampleCount) {
  const auto ds = load_text("rows", "x,colour,note,y\n1,a,one two,A\n2,b,three,B\n3,c,,A\n", basic_schema());
  TextExtractor tx;
  tx.fit(ds, {});
  EXPECT_EQ(tx.transform(ds).rows(), 3u);
}

namespace {
FieldSchema image_schema() {
  return {{"x", FieldKind::numerical, true}, {"pic", FieldKind::image_path, true}, {"y", FieldKind::label, true}};
}

void save_solid(const fs::path& p, int side, std::array<std::uint8_t, 3> rgb) {
  image::Image img;
  img.width = img.height = side;
  for (int i = 0; i < side * side; ++i) img.rgb.insert(img.rgb.end(), rgb.begin(), rgb.end());
  image::save_ppm(p, img);
}
}  // namespace

TEST(ImageExtractor, BlackImagesProjectToZero) {
  const auto dir = mugtest::scratch_dir("img_black");
  for (int i = 0; i < 3; ++i) save_solid(dir / ("b" + std::to_string(i) + ".ppm"), 4, {0, 0, 0});
  mugtest::write_text(dir / "t.csv", "x,pic,y\n1,b0.ppm,A\n2,b1.ppm,A\n3,b2.ppm,B\n");
  const auto ds = load_dataset(dir / "t.csv", dir, image_schema());
  ExtractorSpec spec;
  spec.image_side = 4;
  spec.image_dims_per_channel = 2;
  ImageExtractor ix;
  ix.fit(ds, spec);
  const auto out = ix.transform(ds);
  EXPECT_EQ(out.cols(), 6u);
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(ImageExtractor, WidthIsThreeTimesPerChannelDims) {
  const auto dir = mugtest::scratch_dir("img_width");
  save_solid(dir / "a.ppm", 3, {10, 20, 30});
  mugtest::write_text(dir / "t.csv", "x,pic,y\n1,a.ppm,A\n2,missing.ppm,B\n");
  const auto ds = load_dataset(dir / "t.csv", dir, image_schema());
  ExtractorSpec spec;
  spec.image_side = 3;
  spec.image_dims_per_channel = 5;
  ImageExtractor ix;
  ix.fit(ds, spec);
  const auto out = ix.transform(ds);
  EXPECT_EQ(out.cols(), 15u);
  for (std::size_t c = 0; c < out.cols(); ++c) EXPECT_EQ(out(1, c), 0.0);  // undecodable → zero row
}

TEST(Pca, LeadingComponentMatchesCovarianceEigenvector) {
  // Four 2x2 single-channel images flattened to 4-vectors.
  Tensor data{{0.1, 0.9, 0.3, 0.2}, {0.5, 0.4, 0.8, 0.1}, {0.9, 0.2, 0.1, 0.7}, {0.3, 0.6, 0.5, 0.4}};
  const auto proj = linalg::pca(data, 1, 4);
  Eigen::Matrix4d x;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) x(i, j) = data(i, j);
  const Eigen::Matrix4d centered = x.rowwise() - x.colwise().mean();
  const Eigen::Matrix4d cov = centered.transpose() * centered;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(cov);
  const Eigen::Vector4d top = es.eigenvectors().col(3);
  double dot = 0.0;
  for (int j = 0; j < 4; ++j) dot += top(j) * proj.components(0, j);
  EXPECT_NEAR(std::abs(dot), 1.0, 1e-9);
}

TEST(FeatureExtractor, SaveLoadReproducesTransform) {
  const auto dir = mugtest::scratch_dir("extractor_roundtrip");
  mugtest::SyntheticSpec spec;
  spec.samples = 30;
  spec.image_side = 8;
  const auto synth = mugtest::write_synthetic(dir, spec);
  const auto ds = load_dataset(synth.table, synth.image_dir, synth.schema, synth.options);
  ExtractorSpec xs;
  xs.image_side = 8;
  xs.text_dims = 4;
  xs.image_dims_per_channel = 3;
  FeatureExtractor fx(xs);
  fx.fit(ds);
  const auto a = fx.transform(ds);
  fx.save(dir / "fx.json");
  const auto b = FeatureExtractor::load(dir / "fx.json").transform(ds);
  EXPECT_EQ(a.tab, b.tab);
  EXPECT_EQ(a.txt, b.txt);
  EXPECT_EQ(a.img, b.img);
  EXPECT_EQ(a.row_ids, b.row_ids);
}

TEST(BlockFile, RoundTripIsExact) {
  const auto dir = mugtest::scratch_dir("block");
  Tensor t{{1.0 / 3.0, -2.5}, {1e-300, 7.0}};
  write_block(dir / "b.mugf", t, {"p", "q"});
  const auto back = read_block(dir / "b.mugf");
  EXPECT_EQ(back.values, t);
  EXPECT_EQ(back.ids, (std::vector<std::string>{"p", "q"}));
}

TEST(BlockFile, BadMagicIsParseError) {
  const auto dir = mugtest::scratch_dir("block_bad");
  mugtest::write_text(dir / "b.mugf", "NOPE and more bytes here");
  EXPECT_THROW(read_block(dir / "b.mugf"), ParseError);
}

TEST(ImageIo, PpmRoundTripIsExact) {
  const auto dir = mugtest::scratch_dir("ppm");
  image::Image img;
  img.width = 2;
  img.height = 1;
  img.rgb = {1, 2, 3, 250, 251, 252};
  image::save_ppm(dir / "a.ppm", img);
  const auto back = image::load(dir / "a.ppm");
  EXPECT_EQ(back.rgb, img.rgb);
  EXPECT_DOUBLE_EQ(image::mean_intensity(back), (1 + 2 + 3 + 250 + 251 + 252) / 6.0);
}
