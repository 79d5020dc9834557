#pragma once

#include "mcdltv/checkpoint.hpp"
#include "mcdltv/data.hpp"
#include "mcdltv/mcd.hpp"
#include "mcdltv/metrics.hpp"
#include "mcdltv/trainer.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mcdltv {

inline constexpr const char* kToolVersion = "0.1.0";

/// Architecture hyperparameters; defaults are MLP [128, 64, 32] and DCNv2 with two
/// cross layers plus a [64, 32] deep branch, dropout 0.2 throughout.
struct ModelConfig {
  std::vector<Eigen::Index> hidden_dims{128, 64, 32};
  std::vector<Eigen::Index> deep_dims{64, 32};
  int n_cross = 2;
  double dropout = 0.2;
};

ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelConfig& m);

SynthConfig synth_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SynthConfig& c);

Network build_model(Architecture arch, const ModelConfig& m, Eigen::Index input_dim, LossKind loss,
                    std::uint64_t seed);

/// Written next to every command's primary output as "<out>.manifest.json".
struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::vector<std::string> artifacts;
  std::string tool_version = kToolVersion;
  double duration_seconds = 0.0;
};

nlohmann::json to_json(const RunManifest& m);
std::filesystem::path manifest_path(const std::filesystem::path& out);
void write_manifest(const RunManifest& m, const std::filesystem::path& out);

/// "<dir>/<stem><suffix>" for sibling artifacts of `out`.
std::filesystem::path sibling(const std::filesystem::path& out, const std::string& suffix);

/// Reads MCDLTV_SEED when set; otherwise returns `fallback`.
std::uint64_t seed_from_env(std::uint64_t fallback);

// Prediction dump: id,mean,std,trials[,mean_raw][,t0,...]. mean_raw (expm1 of mean) is
// present exactly when the model was trained with log-MSE, i.e. when mean/std are in
// log1p space.
struct PredictionTable {
  std::vector<PredictionSummary> rows;
  bool log_space = false;
  std::vector<double> mean_raw;
};

std::string predictions_csv(const std::vector<PredictionSummary>& rows, bool log_space,
                            bool with_trials);
PredictionTable load_predictions(const std::filesystem::path& path);

struct GenDataOptions {
  SynthConfig synth;
  std::filesystem::path out;
};
void run_gen_data(const GenDataOptions& o);

struct TrainOptions {
  std::filesystem::path data;
  Architecture arch = Architecture::mlp;
  LossKind loss = LossKind::log_mse;
  TrainConfig train;
  ModelConfig model;
  double train_fraction = 0.8;
  std::filesystem::path out;
  std::optional<std::filesystem::path> test_out;  // default: sibling "<stem>.test.csv"
};
void run_train(const TrainOptions& o);

struct PredictOptions {
  std::filesystem::path model;
  std::filesystem::path data;
  McdConfig mcd;
  std::filesystem::path out;
};
void run_predict(const PredictOptions& o);

struct EvaluateOptions {
  std::filesystem::path preds;
  std::filesystem::path data;
  double k = 0.05;
  std::vector<double> z_grid = default_z_grid();
  Cohort cohort = Cohort::by_label;
  IntervalMode interval = IntervalMode::literal;
  std::filesystem::path out;
};
/// Report JSON at `out`, confidence curve at sibling "<stem>.curve.csv".
MetricsReport run_evaluate(const EvaluateOptions& o);

struct SweepOptions {
  std::filesystem::path model;
  std::filesystem::path data;
  std::vector<int> grid{1, 4, 16, 64, 256};
  int reps = 10;
  std::uint64_t seed = 0;
  double k = 0.05;
  Eigen::Index batch_size = 4096;
  int threads = 1;
  std::filesystem::path out;
};

struct SweepRow {
  int trials;
  double gini_mean, gini_std, mape_mean, mape_std;
};

/// For every T in the grid, `reps` MCD runs with seeds seed, seed+1, ...; cross-run mean
/// and sample std of normalized Gini and top-k MAPE.
std::vector<SweepRow> sweep_trials(const Checkpoint& ckpt, const Dataset& data, const SweepOptions& o);
std::string sweep_csv(const std::vector<SweepRow>& rows);
std::vector<SweepRow> run_sweep_trials(const SweepOptions& o);

struct CompareOptions {
  std::filesystem::path data;
  TrainConfig train;
  ModelConfig model;
  Architecture ziln_backbone = Architecture::mlp;
  // The ZILN baseline is scored deterministically. Trained with dropout, its scale head
  // absorbs the dropout noise in mu and exp(sigma^2 / 2) then swamps the ranking.
  double ziln_dropout = 0.0;
  double train_fraction = 0.8;
  int trials = 64;
  std::uint64_t mcd_seed = 0;
  double k = 0.05;
  std::vector<double> z_grid = default_z_grid();
  int threads = 1;
  std::filesystem::path out;
};

struct CompareRow {
  std::string model;
  double normalized_gini, top_k_mape, top_k_hit_rate;
};

/// Trains MLP, DCNv2 (log-MSE) and a ZILN model on one split and scores raw vs MCD
/// predictions. Writes the table as JSON at `out` and CSV at "<stem>.csv", plus the
/// coverage curves of both MCD models at "<stem>.curve.csv".
std::vector<CompareRow> run_compare(const CompareOptions& o);

}  // namespace mcdltv
