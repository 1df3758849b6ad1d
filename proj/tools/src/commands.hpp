#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "manifest.hpp"
#include "pipeline.hpp"

namespace mugcli {

/// Flags shared by every subcommand.
struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string manifest;  ///< overrides the per-command default location
};

struct ProfileOptions {
  CommonOptions common;
  DataOptions data;
  std::string out = "profile.json";
  bool train_only = false;
};

struct BuildGraphsOptions {
  CommonOptions common;
  DataOptions data;
  std::string out_dir = "graphs_out";
};

struct TrainOptions {
  CommonOptions common;
  DataOptions data;
  std::string out_dir = "train_out";
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> patience;
  std::optional<double> lr;
  bool history_timing = false;
};

struct HpoOptions {
  TrainOptions train;
  bool per_modality = false;
  std::optional<std::size_t> budget;
};

struct PredictOptions {
  CommonOptions common;
  std::string model_dir;
  std::string data;
  std::string image_dir;
  std::string out = "predictions.csv";
};

struct EvaluateOptions {
  CommonOptions common;
  DataOptions data;
  std::string predictions;
  std::string model_dir;  ///< reuse the training schema instead of DataOptions
  std::string out = "metrics.csv";
  std::string append_results;
  std::string method = "MuGNet";
  std::string dataset_name;
};

struct RankOptions {
  CommonOptions common;
  std::string results;
  std::string orientation;
  std::string metric;
  double alpha = 0.05;
  std::string out_dir = "rank_out";
  std::string title;
};

struct ParetoOptions {
  CommonOptions common;
  std::string points;
  std::string results;
  std::string orientation;
  std::string metric;
  std::string durations;
  std::string name_column = "method";
  std::string cost_column = "cost";
  std::string quality_column = "quality";
  std::string out = "pareto.csv";
};

// Each command fills the manifest (inputs, config, seed, durations, output
// location) as it goes; the caller writes it whatever the outcome.
void run_profile(const ProfileOptions& o, RunManifest& m);
void run_build_graphs(const BuildGraphsOptions& o, RunManifest& m);
void run_train(const TrainOptions& o, RunManifest& m);
void run_hpo(const HpoOptions& o, RunManifest& m);
void run_predict(const PredictOptions& o, RunManifest& m);
void run_evaluate(const EvaluateOptions& o, RunManifest& m);
void run_rank(const RankOptions& o, RunManifest& m);
void run_pareto(const ParetoOptions& o, RunManifest& m);

}  // namespace mugcli
