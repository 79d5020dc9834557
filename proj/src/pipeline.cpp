#include "mcdltv/pipeline.hpp"

#include "mcdltv/io.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mcdltv {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& known, const std::string& what) {
  if (!j.is_object()) throw std::invalid_argument(what + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw std::invalid_argument(what + ": unknown key '" + key + "'");
  }
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

Dataset apply_scaler(const Checkpoint& ckpt, Dataset data) {
  if (data.dim() != ckpt.net.input_dim) {
    throw std::invalid_argument("data has " + std::to_string(data.dim()) + " features, model expects " +
                                std::to_string(ckpt.net.input_dim));
  }
  if (ckpt.scaler) data.features = ckpt.scaler->apply(data.features);
  return data;
}

std::vector<double> to_raw(LossKind loss, std::span<const double> model_space) {
  std::vector<double> out(model_space.begin(), model_space.end());
  if (loss == LossKind::log_mse) {
    for (double& v : out) v = std::expm1(v);
  }
  return out;
}

std::vector<double> means_of(const std::vector<PredictionSummary>& s) {
  std::vector<double> out;
  out.reserve(s.size());
  for (const auto& p : s) out.push_back(p.mean);
  return out;
}

std::vector<double> log1p_all(std::span<const double> labels) {
  std::vector<double> out(labels.begin(), labels.end());
  for (double& v : out) v = std::log1p(v);
  return out;
}

}  // namespace

ModelConfig model_config_from_json(const json& j) {
  reject_unknown_keys(j, {"hidden_dims", "deep_dims", "n_cross", "dropout"}, "model config");
  ModelConfig m;
  m.hidden_dims = j.value("hidden_dims", m.hidden_dims);
  m.deep_dims = j.value("deep_dims", m.deep_dims);
  m.n_cross = j.value("n_cross", m.n_cross);
  m.dropout = j.value("dropout", m.dropout);
  return m;
}

json to_json(const ModelConfig& m) {
  return {{"hidden_dims", m.hidden_dims}, {"deep_dims", m.deep_dims}, {"n_cross", m.n_cross}, {"dropout", m.dropout}};
}

SynthConfig synth_config_from_json(const json& j) {
  reject_unknown_keys(j, {"n", "dim", "zero_rate", "sigma", "seed"}, "synth config");
  SynthConfig c;
  c.n = j.value("n", c.n);
  c.dim = j.value("dim", c.dim);
  c.zero_rate = j.value("zero_rate", c.zero_rate);
  c.sigma = j.value("sigma", c.sigma);
  c.seed = j.value("seed", c.seed);
  validate(c);
  return c;
}

json to_json(const SynthConfig& c) {
  return {{"n", c.n}, {"dim", c.dim}, {"zero_rate", c.zero_rate}, {"sigma", c.sigma}, {"seed", c.seed}};
}

Network build_model(Architecture arch, const ModelConfig& m, Eigen::Index input_dim, LossKind loss,
                    std::uint64_t seed) {
  const Eigen::Index width = loss_output_width(loss);
  if (arch == Architecture::mlp) return build_mlp(input_dim, m.hidden_dims, m.dropout, seed, width);
  return build_dcnv2(input_dim, m.n_cross, m.deep_dims, m.dropout, seed, width);
}

json to_json(const RunManifest& m) {
  return {{"command", m.command},
          {"config", m.config},
          {"seed", m.seed},
          {"artifacts", m.artifacts},
          {"tool_version", m.tool_version},
          {"duration_seconds", m.duration_seconds}};
}

std::filesystem::path sibling(const std::filesystem::path& out, const std::string& suffix) {
  return out.parent_path() / (out.stem().string() + suffix);
}

std::filesystem::path manifest_path(const std::filesystem::path& out) {
  std::filesystem::path p = out;
  p += ".manifest.json";
  return p;
}

void write_manifest(const RunManifest& m, const std::filesystem::path& out) {
  write_file_atomic(manifest_path(out), to_json(m).dump(2) + "\n");
}

std::uint64_t seed_from_env(std::uint64_t fallback) {
  const char* v = std::getenv("MCDLTV_SEED");
  if (v == nullptr || *v == '\0') return fallback;
  std::size_t used = 0;
  const unsigned long long s = std::stoull(v, &used);
  if (v[used] != '\0') throw std::invalid_argument("MCDLTV_SEED is not an unsigned integer");
  return s;
}

std::string predictions_csv(const std::vector<PredictionSummary>& rows, bool log_space, bool with_trials) {
  std::ostringstream out;
  out << "id,mean,std,trials";
  if (log_space) out << ",mean_raw";
  const int t = rows.empty() ? 0 : rows.front().trial_count;
  if (with_trials) {
    for (int j = 0; j < t; ++j) out << ",t" << j;
  }
  out << '\n';
  for (const auto& r : rows) {
    out << r.id << ',' << format_double(r.mean) << ',' << format_double(r.std) << ',' << r.trial_count;
    if (log_space) out << ',' << format_double(std::expm1(r.mean));
    if (with_trials) {
      if (r.trials.size() != static_cast<std::size_t>(t)) {
        throw std::invalid_argument("predictions_csv: trial vectors were not retained");
      }
      for (double v : r.trials) out << ',' << format_double(v);
    }
    out << '\n';
  }
  return out.str();
}

PredictionTable load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty predictions file");
  const auto fields_of = [](const std::string& l) {
    std::vector<std::string> f;
    std::stringstream ss(l);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    if (!l.empty() && l.back() == ',') f.emplace_back();
    return f;
  };
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = fields_of(line);
  if (header.size() < 4 || header[0] != "id" || header[1] != "mean" || header[2] != "std" ||
      header[3] != "trials") {
    throw std::runtime_error(path.string() + ": header must start with id,mean,std,trials");
  }
  PredictionTable table;
  table.log_space = header.size() > 4 && header[4] == "mean_raw";
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = fields_of(line);
    if (f.size() != header.size()) {
      throw std::runtime_error(path.string() + ": line " + std::to_string(line_no) + " has " +
                               std::to_string(f.size()) + " fields, expected " + std::to_string(header.size()));
    }
    try {
      PredictionSummary s;
      s.id = f[0];
      s.mean = std::stod(f[1]);
      s.std = std::stod(f[2]);
      s.trial_count = std::stoi(f[3]);
      std::size_t next = 4;
      if (table.log_space) table.mean_raw.push_back(std::stod(f[next++]));
      for (; next < f.size(); ++next) s.trials.push_back(std::stod(f[next]));
      table.rows.push_back(std::move(s));
    } catch (const std::logic_error&) {
      throw std::runtime_error(path.string() + ": cannot parse line " + std::to_string(line_no));
    }
  }
  return table;
}

void run_gen_data(const GenDataOptions& o) {
  Stopwatch clock;
  const Dataset data = generate_synthetic(o.synth);
  save_csv(data, o.out);
  write_manifest({"gen-data", to_json(o.synth), o.synth.seed, {o.out.string()}, kToolVersion, clock.seconds()}, o.out);
}

void run_train(const TrainOptions& o) {
  Stopwatch clock;
  const Dataset all = load_csv(o.data);
  auto [train_raw, test_raw] = split(all, o.train_fraction, o.train.seed);
  const auto [train_std, test_std] = standardize(train_raw, test_raw);
  TrainConfig cfg = o.train;
  cfg.loss = o.loss;
  const Network net = build_model(o.arch, o.model, all.dim(), o.loss, cfg.seed);
  const TrainResult result = train(net, train_std, cfg);

  const auto test_path = o.test_out.value_or(sibling(o.out, ".test.csv"));
  const auto history_path = sibling(o.out, ".loss.csv");
  save_checkpoint({result.net, o.loss, train_std.scaler}, o.out);
  write_file_atomic(history_path, loss_history_csv(result.history));
  save_csv(test_raw, test_path);

  json config = {{"data", o.data.string()},
                 {"model", to_string(o.arch)},
                 {"loss", to_string(o.loss)},
                 {"train", to_json(cfg)},
                 {"architecture", to_json(o.model)},
                 {"train_fraction", o.train_fraction},
                 {"best_epoch", result.best_epoch},
                 {"stopped_early", result.stopped_early}};
  write_manifest({"train", config, cfg.seed, {o.out.string(), history_path.string(), test_path.string()},
                  kToolVersion, clock.seconds()},
                 o.out);
}

void run_predict(const PredictOptions& o) {
  Stopwatch clock;
  const Checkpoint ckpt = load_checkpoint(o.model);
  const Dataset data = apply_scaler(ckpt, load_csv(o.data));
  const auto summaries = mcd_predict(ckpt.net, data, ckpt.loss, o.mcd);
  write_file_atomic(o.out, predictions_csv(summaries, ckpt.loss == LossKind::log_mse, o.mcd.keep_trials));
  json config = {{"model", o.model.string()},
                 {"data", o.data.string()},
                 {"trials", o.mcd.trials},
                 {"batch_size", o.mcd.batch_size},
                 {"keep_trials", o.mcd.keep_trials},
                 {"loss", to_string(ckpt.loss)}};
  write_manifest({"predict", config, o.mcd.seed, {o.out.string()}, kToolVersion, clock.seconds()}, o.out);
}

MetricsReport run_evaluate(const EvaluateOptions& o) {
  Stopwatch clock;
  const PredictionTable preds = load_predictions(o.preds);
  const Dataset data = load_csv(o.data);
  if (preds.rows.size() != data.size()) {
    throw std::runtime_error("id mismatch: " + std::to_string(preds.rows.size()) + " predictions for " +
                             std::to_string(data.size()) + " data rows");
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (preds.rows[i].id != data.ids[i]) {
      throw std::runtime_error("id mismatch at row " + std::to_string(i) + ": predictions have '" +
                               preds.rows[i].id + "', data has '" + data.ids[i] + "'");
    }
  }
  const std::vector<double> raw = preds.log_space ? preds.mean_raw : means_of(preds.rows);
  const std::vector<double> labels_model = preds.log_space ? log1p_all(data.labels) : data.labels;

  MetricsReport r;
  r.k = o.k;
  r.sample_count = data.size();
  r.normalized_gini = normalized_gini(raw, data.labels);
  r.top_k_mape = top_k_mape(raw, data.labels, o.k, o.cohort);
  r.top_k_hit_rate = top_k_hit_rate(raw, data.labels, o.k);
  r.confidence_curve = confidence_curve(preds.rows, labels_model, o.z_grid, o.interval);

  const auto curve_path = sibling(o.out, ".curve.csv");
  write_file_atomic(o.out, to_json(r).dump(2) + "\n");
  write_file_atomic(curve_path, curve_csv(r.confidence_curve));
  json config = {{"preds", o.preds.string()},
                 {"data", o.data.string()},
                 {"k", o.k},
                 {"z_grid", o.z_grid},
                 {"cohort", o.cohort == Cohort::by_label ? "label" : "prediction"},
                 {"interval", o.interval == IntervalMode::literal ? "literal" : "quantile"},
                 {"label_space", preds.log_space ? "log1p" : "raw"}};
  write_manifest({"evaluate", config, 0, {o.out.string(), curve_path.string()}, kToolVersion, clock.seconds()}, o.out);
  return r;
}

std::vector<SweepRow> sweep_trials(const Checkpoint& ckpt, const Dataset& raw_data, const SweepOptions& o) {
  if (o.grid.empty()) throw std::invalid_argument("sweep: empty trial grid");
  if (o.reps < 1) throw std::invalid_argument("sweep: reps must be >= 1");
  for (int t : o.grid) {
    if (t < 1) throw std::invalid_argument("sweep: trial counts must be >= 1");
  }
  const Dataset data = apply_scaler(ckpt, raw_data);
  const int max_t = *std::max_element(o.grid.begin(), o.grid.end());
  const auto n = static_cast<Eigen::Index>(data.size());

  // Trial j of a run depends only on (seed, j), so a run with T trials is the first T rows
  // of a run with max(grid) trials under the same seed.
  std::vector<std::vector<double>> gini(o.grid.size()), mape(o.grid.size());
  for (int r = 0; r < o.reps; ++r) {
    McdConfig cfg{max_t, o.seed + static_cast<std::uint64_t>(r), o.batch_size, false, o.threads};
    const Matrix trials = mcd_trial_outputs(ckpt.net, data.features, ckpt.loss, cfg);
    for (std::size_t g = 0; g < o.grid.size(); ++g) {
      const int t = o.grid[g];
      std::vector<double> means(data.size());
      std::vector<double> column(static_cast<std::size_t>(t));
      for (Eigen::Index i = 0; i < n; ++i) {
        for (int j = 0; j < t; ++j) column[static_cast<std::size_t>(j)] = trials(j, i);
        double sd = 0.0;
        summarize_trials(column, means[static_cast<std::size_t>(i)], sd);
      }
      const auto raw = to_raw(ckpt.loss, means);
      gini[g].push_back(normalized_gini(raw, data.labels));
      mape[g].push_back(top_k_mape(raw, data.labels, o.k));
    }
  }
  std::vector<SweepRow> rows;
  for (std::size_t g = 0; g < o.grid.size(); ++g) {
    SweepRow row{o.grid[g], 0, 0, 0, 0};
    summarize_trials(gini[g], row.gini_mean, row.gini_std);
    summarize_trials(mape[g], row.mape_mean, row.mape_std);
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "T,gini_mean,gini_std,mape_mean,mape_std\n";
  for (const auto& r : rows) {
    out << r.trials << ',' << format_double(r.gini_mean) << ',' << format_double(r.gini_std) << ','
        << format_double(r.mape_mean) << ',' << format_double(r.mape_std) << '\n';
  }
  return out.str();
}

std::vector<SweepRow> run_sweep_trials(const SweepOptions& o) {
  Stopwatch clock;
  const Checkpoint ckpt = load_checkpoint(o.model);
  const auto rows = sweep_trials(ckpt, load_csv(o.data), o);
  write_file_atomic(o.out, sweep_csv(rows));
  json config = {{"model", o.model.string()}, {"data", o.data.string()}, {"grid", o.grid},
                 {"reps", o.reps},             {"k", o.k},                  {"batch_size", o.batch_size}};
  write_manifest({"sweep-trials", config, o.seed, {o.out.string()}, kToolVersion, clock.seconds()}, o.out);
  return rows;
}

std::vector<CompareRow> run_compare(const CompareOptions& o) {
  Stopwatch clock;
  const Dataset all = load_csv(o.data);
  auto [train_raw, test_raw] = split(all, o.train_fraction, o.train.seed);
  const auto [train_std, test_std] = standardize(train_raw, test_raw);
  const std::vector<double>& labels = test_std.labels;
  const auto log_labels = log1p_all(labels);
  McdConfig mcd{o.trials, o.mcd_seed, 4096, false, o.threads};

  std::vector<CompareRow> rows;
  const auto score = [&](const std::string& name, const std::vector<double>& raw) {
    rows.push_back({name, normalized_gini(raw, labels), top_k_mape(raw, labels, o.k),
                    top_k_hit_rate(raw, labels, o.k)});
  };

  json curves = json::object();
  json train_info = json::object();
  for (Architecture arch : {Architecture::mlp, Architecture::dcnv2}) {
    TrainConfig cfg = o.train;
    cfg.loss = LossKind::log_mse;
    const auto fit = train(build_model(arch, o.model, all.dim(), cfg.loss, cfg.seed), train_std, cfg);
    train_info[to_string(arch)] = {{"best_epoch", fit.best_epoch}, {"epochs_run", fit.history.size()}};
    const std::string name = arch == Architecture::mlp ? "MLP" : "DCNv2";

    const Vector eval = predict_eval(fit.net, test_std.features).col(0);
    score(name, to_raw(cfg.loss, std::vector<double>(eval.data(), eval.data() + eval.size())));
    const auto summaries = mcd_predict(fit.net, test_std, cfg.loss, mcd);
    score("MCD-" + name, to_raw(cfg.loss, means_of(summaries)));
    json curve = json::array();
    for (const auto& p : confidence_curve(summaries, log_labels, o.z_grid)) curve.push_back(p.accuracy);
    curves["MCD-" + name] = curve;
  }

  TrainConfig zcfg = o.train;
  zcfg.loss = LossKind::ziln;
  ModelConfig zmodel = o.model;
  zmodel.dropout = o.ziln_dropout;
  const auto zfit = train(build_model(o.ziln_backbone, zmodel, all.dim(), zcfg.loss, zcfg.seed), train_std, zcfg);
  train_info["ziln"] = {{"best_epoch", zfit.best_epoch}, {"epochs_run", zfit.history.size()}};
  const Vector zpred = ziln_predict(predict_eval(zfit.net, test_std.features));
  score("ZILN", std::vector<double>(zpred.data(), zpred.data() + zpred.size()));

  json table = json::array();
  std::ostringstream csv;
  csv << "model,normalized_gini,top_k_mape,top_k_hit_rate\n";
  for (const auto& r : rows) {
    table.push_back({{"model", r.model},
                     {"normalized_gini", r.normalized_gini},
                     {"top_k_mape", r.top_k_mape},
                     {"top_k_hit_rate", r.top_k_hit_rate}});
    csv << r.model << ',' << format_double(r.normalized_gini) << ',' << format_double(r.top_k_mape) << ','
        << format_double(r.top_k_hit_rate) << '\n';
  }
  std::ostringstream curve_csv_out;
  curve_csv_out << "z,MCD-MLP,MCD-DCNv2\n";
  for (std::size_t g = 0; g < o.z_grid.size(); ++g) {
    curve_csv_out << format_double(o.z_grid[g]) << ',' << format_double(curves["MCD-MLP"][g].get<double>()) << ','
                  << format_double(curves["MCD-DCNv2"][g].get<double>()) << '\n';
  }

  const auto csv_path = sibling(o.out, ".csv");
  const auto curve_path = sibling(o.out, ".curve.csv");
  json report = {{"k", o.k},         {"trials", o.trials},         {"test_rows", labels.size()},
                 {"rows", table},    {"z_grid", o.z_grid},         {"confidence_curves", curves},
                 {"training", train_info}};
  write_file_atomic(o.out, report.dump(2) + "\n");
  write_file_atomic(csv_path, csv.str());
  write_file_atomic(curve_path, curve_csv_out.str());
  json config = {{"data", o.data.string()},
                 {"train", to_json(o.train)},
                 {"architecture", to_json(o.model)},
                 {"ziln_backbone", to_string(o.ziln_backbone)},
                 {"ziln_dropout", o.ziln_dropout},
                 {"train_fraction", o.train_fraction},
                 {"trials", o.trials},
                 {"k", o.k}};
  write_manifest({"compare", config, o.train.seed, {o.out.string(), csv_path.string(), curve_path.string()},
                  kToolVersion, clock.seconds()},
                 o.out);
  return rows;
}

}  // namespace mcdltv
