#include "mcdltv/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace mcdltv {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::relu: return "relu";
    case LayerKind::dropout: return "dropout";
    case LayerKind::cross: return "cross";
  }
  return "?";
}

std::string to_string(Architecture arch) { return arch == Architecture::mlp ? "mlp" : "dcnv2"; }

Architecture parse_architecture(const std::string& name) {
  if (name == "mlp") return Architecture::mlp;
  if (name == "dcnv2") return Architecture::dcnv2;
  throw std::invalid_argument("unknown architecture '" + name + "'");
}

Layer Layer::dense(Matrix weight, Matrix bias) {
  Layer l;
  l.kind = LayerKind::dense;
  l.width = weight.rows();
  l.weight = std::move(weight);
  l.bias = std::move(bias);
  return l;
}

Layer Layer::cross(Matrix weight, Matrix bias) {
  Layer l = dense(std::move(weight), std::move(bias));
  l.kind = LayerKind::cross;
  return l;
}

Layer Layer::relu(Eigen::Index width) {
  Layer l;
  l.kind = LayerKind::relu;
  l.width = width;
  return l;
}

Layer Layer::dropout(Eigen::Index width, double rate) {
  Layer l;
  l.kind = LayerKind::dropout;
  l.width = width;
  l.rate = rate;
  return l;
}

Eigen::Index Layer::in_dim() const { return has_parameters() ? weight.cols() : width; }
Eigen::Index Layer::out_dim() const { return has_parameters() ? weight.rows() : width; }

std::vector<Matrix*> Network::parameters() {
  std::vector<Matrix*> out;
  for (auto* stack : {&cross, &deep}) {
    for (Layer& l : *stack) {
      if (l.has_parameters()) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
      }
    }
  }
  out.push_back(&head.weight);
  out.push_back(&head.bias);
  return out;
}

std::vector<const Matrix*> Network::parameters() const {
  std::vector<const Matrix*> out;
  for (Matrix* p : const_cast<Network*>(this)->parameters()) out.push_back(p);
  return out;
}

std::vector<std::string> Network::parameter_names() const {
  std::vector<std::string> out;
  const auto add = [&](const std::string& prefix, std::size_t i) {
    out.push_back(prefix + std::to_string(i) + ".weight");
    out.push_back(prefix + std::to_string(i) + ".bias");
  };
  for (std::size_t i = 0; i < cross.size(); ++i) add("cross", i);
  for (std::size_t i = 0; i < deep.size(); ++i) {
    if (deep[i].has_parameters()) add("deep", i);
  }
  out.push_back("head.weight");
  out.push_back("head.bias");
  return out;
}

std::int64_t Network::parameter_count() const {
  std::int64_t n = 0;
  for (const Matrix* p : parameters()) n += p->size();
  return n;
}

std::size_t Network::dropout_layer_count() const {
  std::size_t n = 0;
  for (const Layer& l : deep) n += l.kind == LayerKind::dropout;
  return n;
}

namespace {

void check_layer(const Layer& l, Eigen::Index in, const std::string& where) {
  if (l.in_dim() != in) {
    throw std::invalid_argument(where + ": expects width " + std::to_string(l.in_dim()) +
                                ", got " + std::to_string(in));
  }
  if (l.has_parameters() && (l.bias.rows() != 1 || l.bias.cols() != l.weight.rows())) {
    throw std::invalid_argument(where + ": bias must be 1x" + std::to_string(l.weight.rows()));
  }
  if (l.kind == LayerKind::dropout && !(l.rate >= 0.0 && l.rate < 1.0)) {
    throw std::invalid_argument(where + ": dropout rate must lie in [0, 1)");
  }
}

}  // namespace

void validate(const Network& net) {
  if (net.input_dim <= 0) throw std::invalid_argument("network: input_dim must be positive");
  if (net.arch == Architecture::mlp && !net.cross.empty()) {
    throw std::invalid_argument("network: an MLP has no cross layers");
  }
  for (std::size_t i = 0; i < net.cross.size(); ++i) {
    const Layer& l = net.cross[i];
    if (l.kind != LayerKind::cross) throw std::invalid_argument("network: cross stack holds a non-cross layer");
    check_layer(l, net.input_dim, "cross" + std::to_string(i));
    if (l.weight.rows() != l.weight.cols()) throw std::invalid_argument("cross weight must be square");
  }
  Eigen::Index width = net.input_dim;
  for (std::size_t i = 0; i < net.deep.size(); ++i) {
    const Layer& l = net.deep[i];
    if (l.kind == LayerKind::cross) throw std::invalid_argument("network: cross layer in deep stack");
    check_layer(l, width, "deep" + std::to_string(i));
    width = l.out_dim();
  }
  if (net.arch == Architecture::dcnv2) width += net.input_dim;
  if (net.head.kind != LayerKind::dense) throw std::invalid_argument("network: head must be dense");
  check_layer(net.head, width, "head");
}

MaskSet sample_masks(const Network& net, RngStream& rng, std::int64_t trial) {
  MaskSet masks(net.deep.size());
  for (std::size_t i = 0; i < net.deep.size(); ++i) {
    const Layer& l = net.deep[i];
    if (l.kind != LayerKind::dropout) continue;
    masks[i].trial = trial;
    masks[i].multipliers = RowVector::Ones(l.width);
    if (l.rate == 0.0) continue;
    const double keep_scale = 1.0 / (1.0 - l.rate);
    for (Eigen::Index u = 0; u < l.width; ++u) {
      masks[i].multipliers(u) = rng.uniform() < l.rate ? 0.0 : keep_scale;
    }
  }
  return masks;
}

Matrix cross_layer_forward(const Matrix& x0, const Matrix& xl, const Matrix& weight,
                           const Matrix& bias) {
  require_same_shape(x0, xl, "cross layer x0/xl");
  if (weight.rows() != xl.cols() || weight.cols() != xl.cols()) {
    throw std::invalid_argument("cross layer: weight must be " + shape_string(xl.cols(), xl.cols()));
  }
  if (bias.size() != xl.cols()) throw std::invalid_argument("cross layer: bias width mismatch");
  Matrix z = matmul(xl, weight.transpose());
  z.rowwise() += bias.row(0);
  return (x0.array() * z.array()).matrix() + xl;
}

CrossLayerGrads cross_layer_backward(const Matrix& x0, const Matrix& xl, const Matrix& weight,
                                     const Matrix& bias, const Matrix& upstream) {
  require_same_shape(x0, upstream, "cross layer upstream");
  Matrix z = matmul(xl, weight.transpose());
  z.rowwise() += bias.row(0);
  const Matrix gz = (upstream.array() * x0.array()).matrix();
  CrossLayerGrads g;
  g.weight = matmul(gz.transpose(), xl);
  g.bias = column_sums(gz);
  g.xl = matmul(gz, weight) + upstream;
  g.x0 = (upstream.array() * z.array()).matrix();
  return g;
}

namespace {

Matrix dense_forward(const Layer& l, const Matrix& x) {
  Matrix y = matmul(x, l.weight.transpose());
  y.rowwise() += l.bias.row(0);
  return y;
}

// Shared forward pass; `tape` may be null when only the output is needed.
Matrix run_forward(const Network& net, const Matrix& batch, const MaskSet* masks, Tape* tape) {
  if (batch.cols() != net.input_dim) {
    throw std::invalid_argument("forward: batch width " + std::to_string(batch.cols()) +
                                " != network input width " + std::to_string(net.input_dim));
  }
  if (masks != nullptr && masks->size() != net.deep.size()) {
    throw std::invalid_argument("forward: mask set does not match the deep stack");
  }
  if (tape != nullptr) {
    tape->input = batch;
    if (masks != nullptr) tape->masks = *masks;
  }

  Matrix xc = batch;
  for (const Layer& l : net.cross) {
    Matrix z = dense_forward(l, xc);
    Matrix next = (batch.array() * z.array()).matrix() + xc;
    if (tape != nullptr) {
      tape->cross_inputs.push_back(std::move(xc));
      tape->cross_affine.push_back(std::move(z));
    }
    xc = std::move(next);
  }

  Matrix x = batch;
  for (std::size_t i = 0; i < net.deep.size(); ++i) {
    const Layer& l = net.deep[i];
    if (tape != nullptr) tape->deep_inputs.push_back(x);
    switch (l.kind) {
      case LayerKind::dense: x = dense_forward(l, x); break;
      case LayerKind::relu: x = x.cwiseMax(0.0); break;
      case LayerKind::dropout:
        if (masks != nullptr) {
          const RowVector& m = (*masks)[i].multipliers;
          if (m.size() != x.cols()) throw std::invalid_argument("forward: mask width mismatch");
          x = (x.array().rowwise() * m.array()).matrix();
        }
        break;
      case LayerKind::cross: throw std::invalid_argument("forward: cross layer in deep stack");
    }
  }

  Matrix head_input;
  if (net.arch == Architecture::dcnv2) {
    head_input.resize(batch.rows(), xc.cols() + x.cols());
    head_input << xc, x;
  } else {
    head_input = std::move(x);
  }
  Matrix out = dense_forward(net.head, head_input);
  require_finite(out, "forward output");
  if (tape != nullptr) tape->head_input = std::move(head_input);
  return out;
}

}  // namespace

ForwardResult forward(const Network& net, const Matrix& batch, const MaskSet* masks) {
  ForwardResult r;
  r.output = run_forward(net, batch, masks, &r.tape);
  return r;
}

Matrix infer(const Network& net, const Matrix& batch, const MaskSet* masks) {
  return run_forward(net, batch, masks, nullptr);
}

ForwardResult forward(const Network& net, const Matrix& batch, Mode mode, RngStream& rng) {
  if (mode == Mode::eval) return forward(net, batch, nullptr);
  const MaskSet masks = sample_masks(net, rng);
  return forward(net, batch, &masks);
}

Matrix predict_eval(const Network& net, const Matrix& batch) { return infer(net, batch, nullptr); }

Gradients backward(const Network& net, const Tape& tape, const Matrix& upstream) {
  const Eigen::Index rows = tape.input.rows();
  if (upstream.rows() != rows || upstream.cols() != net.output_dim()) {
    throw std::invalid_argument("backward: upstream gradient is " +
                                shape_string(upstream.rows(), upstream.cols()) + ", expected " +
                                shape_string(rows, net.output_dim()));
  }
  if (tape.deep_inputs.size() != net.deep.size() || tape.cross_inputs.size() != net.cross.size()) {
    throw std::invalid_argument("backward: tape does not match the network");
  }

  // Parameter gradients are collected per stack, then laid out in parameters() order.
  std::vector<std::pair<Matrix, Matrix>> cross_grads(net.cross.size());
  std::vector<std::pair<Matrix, Matrix>> deep_grads(net.deep.size());

  const Matrix head_w_grad = matmul(upstream.transpose(), tape.head_input);
  const Matrix head_b_grad = column_sums(upstream);
  const Matrix g_head_in = matmul(upstream, net.head.weight);

  Matrix g_x0 = Matrix::Zero(rows, net.input_dim);
  Matrix g = net.arch == Architecture::dcnv2
                 ? Matrix(g_head_in.rightCols(g_head_in.cols() - net.input_dim))
                 : g_head_in;

  for (std::size_t ii = net.deep.size(); ii-- > 0;) {
    const Layer& l = net.deep[ii];
    const Matrix& x = tape.deep_inputs[ii];
    switch (l.kind) {
      case LayerKind::dense:
        deep_grads[ii] = {matmul(g.transpose(), x), column_sums(g)};
        g = matmul(g, l.weight);
        break;
      case LayerKind::relu:
        g = (g.array() * (x.array() > 0.0).cast<double>()).matrix();
        break;
      case LayerKind::dropout:
        if (!tape.masks.empty()) {
          g = (g.array().rowwise() * tape.masks[ii].multipliers.array()).matrix();
        }
        break;
      case LayerKind::cross: break;
    }
  }
  g_x0 += g;

  if (net.arch == Architecture::dcnv2) {
    Matrix g_xl = g_head_in.leftCols(net.input_dim);
    for (std::size_t ii = net.cross.size(); ii-- > 0;) {
      const Layer& l = net.cross[ii];
      const Matrix& xl = tape.cross_inputs[ii];
      const Matrix gz = (g_xl.array() * tape.input.array()).matrix();
      g_x0 += (g_xl.array() * tape.cross_affine[ii].array()).matrix();
      cross_grads[ii] = {matmul(gz.transpose(), xl), column_sums(gz)};
      g_xl = matmul(gz, l.weight) + g_xl;
    }
    g_x0 += g_xl;
  }

  Gradients out;
  for (auto& [w, b] : cross_grads) {
    out.params.push_back(std::move(w));
    out.params.push_back(std::move(b));
  }
  for (std::size_t i = 0; i < net.deep.size(); ++i) {
    if (!net.deep[i].has_parameters()) continue;
    out.params.push_back(std::move(deep_grads[i].first));
    out.params.push_back(std::move(deep_grads[i].second));
  }
  out.params.push_back(head_w_grad);
  out.params.push_back(head_b_grad);
  out.input = std::move(g_x0);
  return out;
}

namespace {

Layer he_uniform_dense(Eigen::Index in, Eigen::Index out, RngStream rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in));
  Matrix w(out, in);
  for (Eigen::Index r = 0; r < out; ++r) {
    for (Eigen::Index c = 0; c < in; ++c) w(r, c) = (2.0 * rng.uniform() - 1.0) * limit;
  }
  return Layer::dense(std::move(w), Matrix::Zero(1, out));
}

void check_dims(Eigen::Index input_dim, const std::vector<Eigen::Index>& dims, double p,
                Eigen::Index output_dim) {
  if (input_dim <= 0 || output_dim <= 0) throw std::invalid_argument("dimensions must be positive");
  for (Eigen::Index d : dims) {
    if (d <= 0) throw std::invalid_argument("hidden dimensions must be positive");
  }
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout rate must lie in [0, 1)");
}

std::vector<Layer> deep_stack(Eigen::Index input_dim, const std::vector<Eigen::Index>& dims,
                              double p, const RngStream& init) {
  std::vector<Layer> layers;
  Eigen::Index width = input_dim;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    layers.push_back(he_uniform_dense(width, dims[i], init.derive("deep" + std::to_string(i))));
    layers.push_back(Layer::relu(dims[i]));
    layers.push_back(Layer::dropout(dims[i], p));
    width = dims[i];
  }
  return layers;
}

}  // namespace

Network build_mlp(Eigen::Index input_dim, const std::vector<Eigen::Index>& hidden_dims,
                  double dropout_p, std::uint64_t seed, Eigen::Index output_dim) {
  check_dims(input_dim, hidden_dims, dropout_p, output_dim);
  const RngStream init(seed, "init/mlp");
  Network net;
  net.arch = Architecture::mlp;
  net.input_dim = input_dim;
  net.deep = deep_stack(input_dim, hidden_dims, dropout_p, init);
  const Eigen::Index last = hidden_dims.empty() ? input_dim : hidden_dims.back();
  net.head = he_uniform_dense(last, output_dim, init.derive("head"));
  validate(net);
  return net;
}

Network build_dcnv2(Eigen::Index input_dim, int n_cross, const std::vector<Eigen::Index>& deep_dims,
                    double dropout_p, std::uint64_t seed, Eigen::Index output_dim) {
  check_dims(input_dim, deep_dims, dropout_p, output_dim);
  if (n_cross < 0) throw std::invalid_argument("cross layer count must be non-negative");
  const RngStream init(seed, "init/dcnv2");
  Network net;
  net.arch = Architecture::dcnv2;
  net.input_dim = input_dim;
  for (int i = 0; i < n_cross; ++i) {
    Layer l = he_uniform_dense(input_dim, input_dim, init.derive("cross" + std::to_string(i)));
    net.cross.push_back(Layer::cross(std::move(l.weight), std::move(l.bias)));
  }
  net.deep = deep_stack(input_dim, deep_dims, dropout_p, init);
  const Eigen::Index deep_out = deep_dims.empty() ? input_dim : deep_dims.back();
  net.head = he_uniform_dense(input_dim + deep_out, output_dim, init.derive("head"));
  validate(net);
  return net;
}

}  // namespace mcdltv
