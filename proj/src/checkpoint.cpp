#include "mcdltv/checkpoint.hpp"

#include "mcdltv/io.hpp"

#include <nlohmann/json.hpp>

#include <stdexcept>

namespace mcdltv {

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()},
          {"cols", m.cols()},
          {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size()) {
    throw std::invalid_argument("checkpoint: matrix data length does not match its shape");
  }
  return Eigen::Map<const Matrix>(data.data(), rows, cols);
}

json layer_to_json(const Layer& l) {
  json j = {{"kind", to_string(l.kind)}};
  if (l.has_parameters()) {
    j["weight"] = matrix_to_json(l.weight);
    j["bias"] = matrix_to_json(l.bias);
  } else {
    j["width"] = l.width;
  }
  if (l.kind == LayerKind::dropout) j["rate"] = l.rate;
  return j;
}

Layer layer_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "dense") return Layer::dense(matrix_from_json(j.at("weight")), matrix_from_json(j.at("bias")));
  if (kind == "cross") return Layer::cross(matrix_from_json(j.at("weight")), matrix_from_json(j.at("bias")));
  if (kind == "relu") return Layer::relu(j.at("width").get<Eigen::Index>());
  if (kind == "dropout") return Layer::dropout(j.at("width").get<Eigen::Index>(), j.at("rate").get<double>());
  throw std::invalid_argument("checkpoint: unknown layer kind '" + kind + "'");
}

json row_to_json(const RowVector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

RowVector row_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const RowVector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

json to_json(const Checkpoint& ckpt) {
  json j;
  j["format"] = "mcdltv-checkpoint";
  j["version"] = kCheckpointVersion;
  j["architecture"] = to_string(ckpt.net.arch);
  j["loss"] = to_string(ckpt.loss);
  j["input_dim"] = ckpt.net.input_dim;
  j["cross"] = json::array();
  for (const Layer& l : ckpt.net.cross) j["cross"].push_back(layer_to_json(l));
  j["deep"] = json::array();
  for (const Layer& l : ckpt.net.deep) j["deep"].push_back(layer_to_json(l));
  j["head"] = layer_to_json(ckpt.net.head);
  if (ckpt.scaler) {
    j["scaler"] = {{"mean", row_to_json(ckpt.scaler->mean)}, {"scale", row_to_json(ckpt.scaler->scale)}};
  } else {
    j["scaler"] = nullptr;
  }
  return j;
}

Checkpoint checkpoint_from_json(const json& j) {
  if (j.value("format", std::string()) != "mcdltv-checkpoint") {
    throw std::invalid_argument("checkpoint: not an mcdltv checkpoint");
  }
  if (j.at("version").get<int>() != kCheckpointVersion) {
    throw std::invalid_argument("checkpoint: unsupported version " + j.at("version").dump());
  }
  Checkpoint c;
  c.net.arch = parse_architecture(j.at("architecture").get<std::string>());
  c.loss = parse_loss(j.at("loss").get<std::string>());
  c.net.input_dim = j.at("input_dim").get<Eigen::Index>();
  for (const json& l : j.at("cross")) c.net.cross.push_back(layer_from_json(l));
  for (const json& l : j.at("deep")) c.net.deep.push_back(layer_from_json(l));
  c.net.head = layer_from_json(j.at("head"));
  if (!j.at("scaler").is_null()) {
    Standardization s;
    s.mean = row_from_json(j.at("scaler").at("mean"));
    s.scale = row_from_json(j.at("scaler").at("scale"));
    if (s.mean.size() != c.net.input_dim || s.scale.size() != c.net.input_dim) {
      throw std::invalid_argument("checkpoint: scaler width does not match input_dim");
    }
    c.scaler = std::move(s);
  }
  validate(c.net);
  if (c.net.output_dim() != loss_output_width(c.loss)) {
    throw std::invalid_argument("checkpoint: output width does not match the loss head");
  }
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, to_json(ckpt).dump() + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace mcdltv
