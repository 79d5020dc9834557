// mcdltv: synthetic data, training, Monte Carlo dropout prediction and evaluation.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include "mcdltv/io.hpp"
#include "mcdltv/pipeline.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <iostream>
#include <sstream>
#include <thread>

namespace {

using namespace mcdltv;

constexpr int kRuntimeError = 1;
constexpr int kUsageError = 2;

nlohmann::json read_json(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    const int v = std::stoi(item, &used);
    if (used != item.size()) throw CLI::ValidationError("--grid", "not an integer: " + item);
    out.push_back(v);
  }
  return out;
}

int default_threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo dropout uncertainty for zero-inflated LTV regression"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic zero-inflated spend dataset");
  std::string gen_config, gen_out;
  gen->add_option("--config", gen_config, "SynthConfig JSON (n, dim, zero_rate, sigma, seed)")->check(CLI::ExistingFile);
  gen->add_option("--out", gen_out, "Output CSV")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train an MLP or DCNv2 model");
  std::string tr_data, tr_model = "mlp", tr_loss = "log_mse", tr_config, tr_out, tr_test_out;
  double tr_frac = 0.8;
  tr->add_option("--data", tr_data, "Training CSV")->required()->check(CLI::ExistingFile);
  tr->add_option("--model", tr_model, "Architecture")->check(CLI::IsMember({"mlp", "dcnv2"}));
  tr->add_option("--loss", tr_loss, "Objective")->check(CLI::IsMember({"log_mse", "ziln"}));
  tr->add_option("--config", tr_config, "TrainConfig JSON, optional \"model\" section")->check(CLI::ExistingFile);
  tr->add_option("--train-fraction", tr_frac, "Share of rows used for training")->check(CLI::Range(0.0, 1.0));
  tr->add_option("--test-out", tr_test_out, "Where to write the held-out test split (default <out>.test.csv)");
  tr->add_option("--out", tr_out, "Checkpoint path")->required();

  // predict
  auto* pr = app.add_subcommand("predict", "Monte Carlo dropout prediction");
  std::string pr_model, pr_data, pr_out;
  McdConfig pr_cfg;
  pr_cfg.threads = default_threads();
  bool pr_keep = false;
  pr->add_option("--model", pr_model, "Checkpoint")->required()->check(CLI::ExistingFile);
  pr->add_option("--data", pr_data, "CSV to score")->required()->check(CLI::ExistingFile);
  pr->add_option("--trials", pr_cfg.trials, "Number of stochastic passes T")->check(CLI::PositiveNumber);
  pr->add_option("--seed", pr_cfg.seed, "Master seed for the dropout masks");
  pr->add_option("--batch-size", pr_cfg.batch_size, "Rows per inference batch")->check(CLI::PositiveNumber);
  pr->add_option("--threads", pr_cfg.threads, "Worker threads over trials")->check(CLI::PositiveNumber);
  pr->add_flag("--keep-trials", pr_keep, "Append per-trial columns t0..t{T-1}");
  pr->add_option("--out", pr_out, "Predictions CSV")->required();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score a predictions file against labels");
  std::string ev_preds, ev_data, ev_out, ev_grid = "0:1:0.05", ev_cohort = "label", ev_interval = "literal";
  double ev_k = 0.05;
  ev->add_option("--preds", ev_preds, "Predictions CSV")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", ev_data, "Labelled CSV with matching ids")->required()->check(CLI::ExistingFile);
  ev->add_option("--k", ev_k, "Top fraction for MAPE and hit-rate")->check(CLI::Range(0.0, 1.0));
  ev->add_option("--z-grid", ev_grid, "start:stop:step");
  ev->add_option("--mape-cohort", ev_cohort, "Select the MAPE cohort by true label or by prediction")
      ->check(CLI::IsMember({"label", "prediction"}));
  ev->add_option("--interval", ev_interval, "literal: z is the multiplier; quantile: z is a Gaussian coverage level")
      ->check(CLI::IsMember({"literal", "quantile"}));
  ev->add_option("--out", ev_out, "Report JSON")->required();

  // sweep-trials
  auto* sw = app.add_subcommand("sweep-trials", "Metric spread across seeds as a function of T");
  SweepOptions sw_opt;
  sw_opt.threads = default_threads();
  std::string sw_model, sw_data, sw_out, sw_grid = "1,4,16,64,256";
  sw->add_option("--model", sw_model, "Checkpoint")->required()->check(CLI::ExistingFile);
  sw->add_option("--data", sw_data, "Labelled CSV")->required()->check(CLI::ExistingFile);
  sw->add_option("--grid", sw_grid, "Comma-separated trial counts");
  sw->add_option("--reps", sw_opt.reps, "Independent seeds per T")->check(CLI::PositiveNumber);
  sw->add_option("--seed", sw_opt.seed, "First seed; rep r uses seed + r");
  sw->add_option("--k", sw_opt.k, "Top fraction for MAPE")->check(CLI::Range(0.0, 1.0));
  sw->add_option("--threads", sw_opt.threads, "Worker threads over trials")->check(CLI::PositiveNumber);
  sw->add_option("--out", sw_out, "Sweep CSV")->required();

  // compare
  auto* cmp = app.add_subcommand("compare", "Raw vs MCD MLP/DCNv2 and ZILN on one split");
  CompareOptions cmp_opt;
  cmp_opt.threads = default_threads();
  std::string cmp_data, cmp_config, cmp_out, cmp_backbone = "mlp";
  cmp->add_option("--data", cmp_data, "Labelled CSV")->required()->check(CLI::ExistingFile);
  cmp->add_option("--config", cmp_config, "TrainConfig JSON, optional \"model\" section")->check(CLI::ExistingFile);
  cmp->add_option("--trials", cmp_opt.trials, "MCD trials")->check(CLI::PositiveNumber);
  cmp->add_option("--seed", cmp_opt.mcd_seed, "MCD mask seed");
  cmp->add_option("--k", cmp_opt.k, "Top fraction")->check(CLI::Range(0.0, 1.0));
  cmp->add_option("--ziln-backbone", cmp_backbone, "Backbone for the ZILN baseline")
      ->check(CLI::IsMember({"mlp", "dcnv2"}));
  cmp->add_option("--ziln-dropout", cmp_opt.ziln_dropout, "Dropout rate of the ZILN baseline")
      ->check(CLI::Range(0.0, 0.99));
  cmp->add_option("--train-fraction", cmp_opt.train_fraction, "Share of rows used for training")
      ->check(CLI::Range(0.0, 1.0));
  cmp->add_option("--threads", cmp_opt.threads, "Worker threads over trials")->check(CLI::PositiveNumber);
  cmp->add_option("--out", cmp_out, "Report JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*gen) {
      GenDataOptions o;
      o.synth = synth_config_from_json(read_json(gen_config));
      o.synth.seed = seed_from_env(o.synth.seed);
      o.out = gen_out;
      run_gen_data(o);
    } else if (*tr) {
      const auto j = read_json(tr_config);
      TrainOptions o;
      o.data = tr_data;
      o.arch = parse_architecture(tr_model);
      o.loss = parse_loss(tr_loss);
      o.train = train_config_from_json(j);
      o.train.seed = seed_from_env(o.train.seed);
      if (j.contains("model")) o.model = model_config_from_json(j.at("model"));
      o.train_fraction = tr_frac;
      o.out = tr_out;
      if (!tr_test_out.empty()) o.test_out = tr_test_out;
      run_train(o);
    } else if (*pr) {
      PredictOptions o{pr_model, pr_data, pr_cfg, pr_out};
      o.mcd.keep_trials = pr_keep;
      o.mcd.seed = seed_from_env(o.mcd.seed);
      run_predict(o);
    } else if (*ev) {
      EvaluateOptions o;
      o.preds = ev_preds;
      o.data = ev_data;
      o.k = ev_k;
      o.z_grid = parse_z_grid(ev_grid);
      o.cohort = ev_cohort == "label" ? Cohort::by_label : Cohort::by_prediction;
      o.interval = ev_interval == "literal" ? IntervalMode::literal : IntervalMode::quantile;
      o.out = ev_out;
      run_evaluate(o);
    } else if (*sw) {
      sw_opt.model = sw_model;
      sw_opt.data = sw_data;
      sw_opt.grid = parse_int_list(sw_grid);
      sw_opt.seed = seed_from_env(sw_opt.seed);
      sw_opt.out = sw_out;
      run_sweep_trials(sw_opt);
    } else if (*cmp) {
      const auto j = read_json(cmp_config);
      cmp_opt.data = cmp_data;
      cmp_opt.train = train_config_from_json(j);
      cmp_opt.train.seed = seed_from_env(cmp_opt.train.seed);
      if (j.contains("model")) cmp_opt.model = model_config_from_json(j.at("model"));
      cmp_opt.ziln_backbone = parse_architecture(cmp_backbone);
      cmp_opt.out = cmp_out;
      run_compare(cmp_opt);
    }
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return 0;
}
