// mugbench: profile datasets, build similarity graphs, train and tune the
// multiplex graph model, and run the ranking and Pareto analyses.
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "mug/error.hpp"

namespace {

using namespace mugcli;

void add_common(CLI::App* cmd, CommonOptions& c) {
  cmd->add_option("--config", c.config, "key = value config file (flags take precedence)");
  cmd->add_option("--seed", c.seed, "seed for every random choice in the run");
  cmd->add_option("--manifest", c.manifest, "run manifest path (default depends on the command)");
}

void add_data(CLI::App* cmd, DataOptions& d, bool required = true) {
  auto* data = cmd->add_option("--data", d.data, "CSV table of samples");
  if (required) data->required();
  cmd->add_option("--image-dir", d.image_dir, "base directory for image paths (default: the table's directory)");
  cmd->add_option("--schema", d.schema, "schema file with column.<name> = <kind> lines");
  cmd->add_option("--label", d.label, "label column when the schema is inferred");
  cmd->add_option("--text-columns", d.text_columns, "text columns when the schema is inferred")->delimiter(',');
  cmd->add_option("--image-columns", d.image_columns, "image path column when the schema is inferred")
      ->delimiter(',');
  cmd->add_option("--id-column", d.id_column, "sample id column");
  cmd->add_option("--split-column", d.split_column, "column tagging rows train/val/test");
}

void add_train(CLI::App* cmd, TrainOptions& t) {
  add_common(cmd, t.common);
  add_data(cmd, t.data);
  cmd->add_option("--out-dir", t.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--epochs", t.epochs, "maximum epochs (train.epochs)");
  cmd->add_option("--patience", t.patience, "early-stopping patience (train.patience)");
  cmd->add_option("--lr", t.lr, "peak learning rate (train.lr_max)");
  cmd->add_flag("--history-timing", t.history_timing, "fill the seconds column of history.csv");
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("mug"));
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"Multimodal graph benchmark toolkit", "mugbench"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")->capture_default_str();

  ProfileOptions profile;
  auto* c_profile = app.add_subcommand("profile", "class balance, missingness and modality statistics");
  add_common(c_profile, profile.common);
  add_data(c_profile, profile.data);
  c_profile->add_option("--out", profile.out, "JSON report")->capture_default_str();
  c_profile->add_flag("--train-only", profile.train_only, "profile split=train rows only");

  BuildGraphsOptions build;
  auto* c_build = app.add_subcommand("build-graphs", "extract features and write the similarity graphs");
  add_common(c_build, build.common);
  add_data(c_build, build.data);
  c_build->add_option("--out-dir", build.out_dir, "output directory")->capture_default_str();

  TrainOptions trainopt;
  auto* c_train = app.add_subcommand("train", "train one model and score the test split");
  add_train(c_train, trainopt);

  HpoOptions hpo;
  auto* c_hpo = app.add_subcommand("hpo", "grid search over graph construction settings");
  add_train(c_hpo, hpo.train);
  c_hpo->add_flag("--per-modality", hpo.per_modality, "search each modality's graph independently");
  c_hpo->add_option("--budget", hpo.budget, "maximum number of trials (0: whole grid)");

  PredictOptions predict;
  auto* c_predict = app.add_subcommand("predict", "score unseen rows with a trained model directory");
  add_common(c_predict, predict.common);
  c_predict->add_option("--model-dir", predict.model_dir, "output directory of train or hpo")->required();
  c_predict->add_option("--data", predict.data, "CSV table of unseen samples")->required();
  c_predict->add_option("--image-dir", predict.image_dir, "base directory for image paths");
  c_predict->add_option("--out", predict.out, "predictions CSV")->capture_default_str();

  EvaluateOptions evaluate;
  auto* c_eval = app.add_subcommand("evaluate", "log-loss and accuracy of a predictions file");
  add_common(c_eval, evaluate.common);
  add_data(c_eval, evaluate.data);
  c_eval->add_option("--predictions", evaluate.predictions, "predictions CSV")->required();
  c_eval->add_option("--model-dir", evaluate.model_dir, "reuse the schema saved with a model");
  c_eval->add_option("--out", evaluate.out, "metrics CSV")->capture_default_str();
  c_eval->add_option("--append-results", evaluate.append_results, "long-form results CSV to append to");
  c_eval->add_option("--method", evaluate.method, "method name for appended rows")->capture_default_str();
  c_eval->add_option("--dataset-name", evaluate.dataset_name, "dataset name for appended rows");

  RankOptions rank;
  auto* c_rank = app.add_subcommand("rank", "Friedman test, mean ranks and critical-difference groups");
  add_common(c_rank, rank.common);
  c_rank->add_option("--results", rank.results, "results CSV (long or wide form)")->required();
  c_rank->add_option("--orientation", rank.orientation, "lower or higher is better")->required();
  c_rank->add_option("--metric", rank.metric, "metric to select from a long-form file");
  c_rank->add_option("--alpha", rank.alpha, "significance level")->capture_default_str();
  c_rank->add_option("--out-dir", rank.out_dir, "output directory")->capture_default_str();
  c_rank->add_option("--title", rank.title, "diagram title");

  ParetoOptions pareto;
  auto* c_pareto = app.add_subcommand("pareto", "cost versus quality frontier");
  add_common(c_pareto, pareto.common);
  c_pareto->add_option("--points", pareto.points, "CSV of method, cost, quality");
  c_pareto->add_option("--results", pareto.results, "results CSV to normalise and average");
  c_pareto->add_option("--orientation", pareto.orientation, "orientation of --results");
  c_pareto->add_option("--metric", pareto.metric, "metric to select from --results");
  c_pareto->add_option("--durations", pareto.durations, "CSV of method and cost");
  c_pareto->add_option("--name-column", pareto.name_column)->capture_default_str();
  c_pareto->add_option("--cost-column", pareto.cost_column)->capture_default_str();
  c_pareto->add_option("--quality-column", pareto.quality_column)->capture_default_str();
  c_pareto->add_option("--out", pareto.out, "report CSV")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App* failing = &app;
    for (auto* sub : app.get_subcommands()) failing = sub;
    std::cerr << failing->help();
    return 1;
  }

  spdlog::set_level(spdlog::level::from_str(log_level));
  const std::string command = app.get_subcommands().front()->get_name();
  RunManifest manifest(command, std::vector<std::string>(argv + 1, argv + argc));

  int code = 0;
  std::string error;
  try {
    if (command == "profile") run_profile(profile, manifest);
    else if (command == "build-graphs") run_build_graphs(build, manifest);
    else if (command == "train") run_train(trainopt, manifest);
    else if (command == "hpo") run_hpo(hpo, manifest);
    else if (command == "predict") run_predict(predict, manifest);
    else if (command == "evaluate") run_evaluate(evaluate, manifest);
    else if (command == "rank") run_rank(rank, manifest);
    else if (command == "pareto") run_pareto(pareto, manifest);
  } catch (const mug::Error& e) {
    code = 1;
    error = e.what();
  } catch (const std::exception& e) {
    code = 2;
    error = std::string("internal error: ") + e.what();
  }
  if (code != 0) std::cerr << "error: " << error << '\n';
  try {
    manifest.write(code, error);
  } catch (const std::exception& e) {
    std::cerr << "error: cannot write manifest: " << e.what() << '\n';
    if (code == 0) code = 1;
  }
  return code;
}
