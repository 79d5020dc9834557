#pragma once

#include "mcdltv/matrix.hpp"
#include "mcdltv/rng.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mcdltv {

enum class LayerKind { dense, relu, dropout, cross };
enum class Architecture { mlp, dcnv2 };

/// train and mc_sample both draw dropout masks; eval makes dropout the identity.
enum class Mode { train, mc_sample, eval };

std::string to_string(LayerKind kind);
std::string to_string(Architecture arch);
Architecture parse_architecture(const std::string& name);

/// One layer of the stack. Weights follow the (out x in) convention; biases are 1 x out.
/// Activation layers (relu, dropout) carry only their width.
struct Layer {
  LayerKind kind = LayerKind::dense;
  Matrix weight;
  Matrix bias;
  double rate = 0.0;
  Eigen::Index width = 0;

  static Layer dense(Matrix weight, Matrix bias);
  static Layer cross(Matrix weight, Matrix bias);
  static Layer relu(Eigen::Index width);
  static Layer dropout(Eigen::Index width, double rate);

  Eigen::Index in_dim() const;
  Eigen::Index out_dim() const;
  bool has_parameters() const { return kind == LayerKind::dense || kind == LayerKind::cross; }
};

/// Either a plain stack (MLP) or a DCNv2 two-branch topology:
///   x0 -> cross stack -> xc,  x0 -> deep stack -> xd,  [xc | xd] -> head.
/// For an MLP the cross stack is empty and the head follows the deep stack directly.
struct Network {
  Architecture arch = Architecture::mlp;
  Eigen::Index input_dim = 0;
  std::vector<Layer> cross;
  std::vector<Layer> deep;
  Layer head;

  /// Trainable matrices in a fixed order: cross (W, b)..., deep dense (W, b)..., head (W, b).
  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;
  std::vector<std::string> parameter_names() const;
  std::int64_t parameter_count() const;
  Eigen::Index output_dim() const { return head.out_dim(); }
  std::size_t dropout_layer_count() const;
};

/// Throws std::invalid_argument when adjacent widths disagree or a rate is outside [0, 1).
void validate(const Network& net);

/// d_j: per-unit multipliers in {0, 1/(1-p)} for one dropout layer, shared by every row.
struct DropoutMask {
  RowVector multipliers;
  std::int64_t trial = -1;
};

/// One mask per deep-stack layer position; non-dropout positions hold an empty mask.
using MaskSet = std::vector<DropoutMask>;

MaskSet sample_masks(const Network& net, RngStream& rng, std::int64_t trial = -1);

struct Tape {
  Matrix input;
  std::vector<Matrix> cross_inputs;
  std::vector<Matrix> cross_affine;
  std::vector<Matrix> deep_inputs;
  MaskSet masks;
  Matrix head_input;
};

struct ForwardResult {
  Matrix output;
  Tape tape;
};

/// Forward pass with explicit masks (nullptr means dropout is the identity).
ForwardResult forward(const Network& net, const Matrix& batch, const MaskSet* masks);

/// Forward pass in `mode`. train/mc_sample draw one mask set from `rng` for the whole
/// batch; eval touches neither the masks nor the stream.
ForwardResult forward(const Network& net, const Matrix& batch, Mode mode, RngStream& rng);

/// Output only, no tape. Rows are computed independently, so any batching of the same
/// rows under the same masks yields bit-identical results.
Matrix infer(const Network& net, const Matrix& batch, const MaskSet* masks);

/// Eval-mode output only.
Matrix predict_eval(const Network& net, const Matrix& batch);

struct Gradients {
  std::vector<Matrix> params;  // same order as Network::parameters()
  Matrix input;
};

Gradients backward(const Network& net, const Tape& tape, const Matrix& upstream);

/// x0 ⊙ (xl Wᵀ + b) + xl, row-wise.
Matrix cross_layer_forward(const Matrix& x0, const Matrix& xl, const Matrix& weight,
                           const Matrix& bias);

struct CrossLayerGrads {
  Matrix x0, xl, weight, bias;
};
CrossLayerGrads cross_layer_backward(const Matrix& x0, const Matrix& xl, const Matrix& weight,
                                     const Matrix& bias, const Matrix& upstream);

Network build_mlp(Eigen::Index input_dim, const std::vector<Eigen::Index>& hidden_dims,
                  double dropout_p, std::uint64_t seed = 0, Eigen::Index output_dim = 1);

Network build_dcnv2(Eigen::Index input_dim, int n_cross, const std::vector<Eigen::Index>& deep_dims,
                    double dropout_p, std::uint64_t seed = 0, Eigen::Index output_dim = 1);

}  // namespace mcdltv
