#include "mcdltv/trainer.hpp"

#include "mcdltv/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace mcdltv {

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
  if (cfg.batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (!(cfg.validation_fraction > 0.0 && cfg.validation_fraction < 1.0)) {
    throw std::invalid_argument("train config: validation_fraction must lie in (0, 1)");
  }
  if (cfg.patience < 0) throw std::invalid_argument("train config: patience must be >= 0");
  if (!(cfg.adam.learning_rate >= 0.0)) throw std::invalid_argument("train config: learning_rate must be >= 0");
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {"epochs",  "batch_size", "learning_rate",
                                              "beta1",   "beta2",      "epsilon",
                                              "seed",    "loss",       "patience",
                                              "validation_fraction",   "model"};
  if (!j.is_object()) throw std::invalid_argument("train config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw std::invalid_argument("train config: unknown key '" + key + "'");
  }
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.adam.learning_rate = j.value("learning_rate", c.adam.learning_rate);
  c.adam.beta1 = j.value("beta1", c.adam.beta1);
  c.adam.beta2 = j.value("beta2", c.adam.beta2);
  c.adam.epsilon = j.value("epsilon", c.adam.epsilon);
  c.seed = j.value("seed", c.seed);
  if (j.contains("loss")) c.loss = parse_loss(j.at("loss").get<std::string>());
  c.patience = j.value("patience", c.patience);
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
  validate(c);
  return c;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.adam.learning_rate},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"epsilon", c.adam.epsilon},
          {"seed", c.seed},
          {"loss", to_string(c.loss)},
          {"patience", c.patience},
          {"validation_fraction", c.validation_fraction}};
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> validation_split(
    std::size_t n, double validation_fraction, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("train: need at least 2 rows to hold out validation data");
  auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RngStream rng(seed, "trainer/validation");
  for (std::size_t i = n; i-- > 1;) std::swap(order[i], order[rng.below(i + 1)]);
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> fit(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val.begin(), val.end());
  std::sort(fit.begin(), fit.end());
  return {std::move(fit), std::move(val)};
}

namespace {

void copy_params(const Network& from, Network& to) {
  auto src = from.parameters();
  auto dst = to.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = *src[i];
}

}  // namespace

TrainResult train(Network net, const Dataset& data, const TrainConfig& cfg) {
  validate(cfg);
  validate(net);
  validate(data);
  if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
  if (data.dim() != net.input_dim) {
    throw std::invalid_argument("train: dataset has " + std::to_string(data.dim()) +
                                " features, network expects " + std::to_string(net.input_dim));
  }
  if (net.output_dim() != loss_output_width(cfg.loss)) {
    throw std::invalid_argument("train: " + to_string(cfg.loss) + " needs output width " +
                                std::to_string(loss_output_width(cfg.loss)));
  }

  const auto [fit_rows, val_rows] = validation_split(data.size(), cfg.validation_fraction, cfg.seed);
  const Dataset val = subset(data, val_rows);

  AdamState adam(cfg.adam);
  TrainResult result;
  Network best = net;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;

  std::vector<std::size_t> order = fit_rows;
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    RngStream shuffle(cfg.seed, "trainer/shuffle/" + std::to_string(epoch));
    for (std::size_t i = order.size(); i-- > 1;) std::swap(order[i], order[shuffle.below(i + 1)]);

    double weighted = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      const std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(end));
      const Dataset batch = subset(data, rows);
      RngStream dropout(cfg.seed, "trainer/dropout/" + std::to_string(epoch) + "/" +
                                      std::to_string(batch_index));
      const ForwardResult fr = forward(net, batch.features, Mode::train, dropout);
      LossValue lv;
      try {
        lv = evaluate_loss(cfg.loss, fr.output, batch.labels);
      } catch (const NonFiniteError& e) {
        throw NonFiniteError("train: epoch " + std::to_string(epoch) + " batch " +
                             std::to_string(batch_index) + ": " + e.what());
      }
      weighted += lv.loss * static_cast<double>(rows.size());
      const Gradients g = backward(net, fr.tape, lv.grad);
      std::vector<const Matrix*> grads;
      for (const Matrix& m : g.params) grads.push_back(&m);
      adam.step(net.parameters(), grads);
    }

    const double train_loss = weighted / static_cast<double>(order.size());
    const double val_loss = evaluate_loss(cfg.loss, predict_eval(net, val.features), val.labels).loss;
    result.history.push_back({epoch, train_loss, val_loss});
    if (val_loss < best_val) {
      best_val = val_loss;
      result.best_epoch = epoch;
      copy_params(net, best);
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      result.stopped_early = true;
      break;
    }
  }
  result.net = std::move(best);
  return result;
}

std::string loss_history_csv(const std::vector<EpochLoss>& history) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss\n";
  for (const EpochLoss& e : history) {
    out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_loss) << '\n';
  }
  return out.str();
}

GradCheckReport grad_check(const Network& net, LossKind loss, double tolerance, std::uint64_t seed,
                           Eigen::Index batch, double step) {
  RngStream xs(seed, "gradcheck/x");
  Matrix x(batch, net.input_dim);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = xs.normal();
  RngStream ys(seed, "gradcheck/y");
  std::vector<double> labels(static_cast<std::size_t>(batch));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    // Alternate zero and positive labels so both ZILN branches are exercised.
    labels[i] = i % 2 == 0 ? 0.0 : std::exp(ys.normal());
  }
  RngStream mask_rng(seed, "gradcheck/masks");
  const MaskSet masks = sample_masks(net, mask_rng);

  const auto objective = [&](const Network& n, const Matrix& input) {
    return evaluate_loss(loss, forward(n, input, &masks).output, labels).loss;
  };
  const ForwardResult fr = forward(net, x, &masks);
  const LossValue lv = evaluate_loss(loss, fr.output, labels);
  const Gradients g = backward(net, fr.tape, lv.grad);

  GradCheckReport report;
  const auto record = [&](double analytic, double numeric, const std::string& name) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-5});
    const double rel = std::abs(analytic - numeric) / denom;
    ++report.entries_checked;
    if (rel > report.max_rel_error || report.worst_parameter.empty()) {
      report.max_rel_error = rel;
      report.worst_parameter = name;
    }
  };

  const auto names = net.parameter_names();
  Network probe = net;
  auto params = probe.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    Matrix& m = *params[p];
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      const double saved = m.data()[k];
      m.data()[k] = saved + step;
      const double up = objective(probe, x);
      m.data()[k] = saved - step;
      const double down = objective(probe, x);
      m.data()[k] = saved;
      record(g.params[p].data()[k], (up - down) / (2.0 * step), names[p]);
    }
  }
  Matrix xp = x;
  for (Eigen::Index k = 0; k < xp.size(); ++k) {
    const double saved = xp.data()[k];
    xp.data()[k] = saved + step;
    const double up = objective(net, xp);
    xp.data()[k] = saved - step;
    const double down = objective(net, xp);
    xp.data()[k] = saved;
    record(g.input.data()[k], (up - down) / (2.0 * step), "input");
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace mcdltv
