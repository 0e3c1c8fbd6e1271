#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "deepofdm/common.hpp"
#include "deepofdm/tensorkit/tensor.hpp"

namespace deepofdm::tk {

struct ConvSpec {
  int cin = 1;
  int cout = 1;
  int kh = 1;  // along height (frequency)
  int kw = 1;  // along width (time)
  int dh = 1;
  int dw = 1;
};

template <typename T>
struct Conv2D {
  ConvSpec spec;
  Var<T> kernel;  // (kh, kw, cin, cout)
  Var<T> bias;    // (1, 1, 1, cout)
};

template <typename T>
struct SeparableConv2D {
  ConvSpec spec;
  Var<T> depthwise;  // (kh, kw, 1, cin)
  Var<T> pointwise;  // (1, 1, cin, cout)
  Var<T> bias;       // (1, 1, 1, cout)
};

template <typename T>
struct BatchNorm {
  int channels = 0;
  Var<T> gamma;
  Var<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;
  T momentum = T(0.99);
  T eps = T(1e-6);
};

struct Relu {};

/// Pre-activation block: (bn -> relu -> separable conv) twice plus a skip path.
/// The skip path is a 1x1 projection when the channel count changes.
template <typename T>
struct ResidualBlock {
  BatchNorm<T> bn1;
  SeparableConv2D<T> sep1;
  BatchNorm<T> bn2;
  SeparableConv2D<T> sep2;
  std::optional<Conv2D<T>> projection;
  bool linear = false;  // drop both ReLUs
};

enum class LayerKind { conv2d, separable_conv2d, batch_norm, relu, residual_block };

template <typename T>
using LayerParams = std::variant<Conv2D<T>, SeparableConv2D<T>, BatchNorm<T>, Relu, ResidualBlock<T>>;

template <typename T>
LayerKind kind_of(const LayerParams<T>& layer) {
  return static_cast<LayerKind>(layer.index());
}

const char* to_string(LayerKind kind);

// Builders. Kernels are drawn uniformly in +-sqrt(3 / fan_in).
template <typename T>
Conv2D<T> make_conv2d(const ConvSpec& spec, const std::string& name, Rng& rng);
template <typename T>
SeparableConv2D<T> make_separable(const ConvSpec& spec, const std::string& name, Rng& rng);
template <typename T>
BatchNorm<T> make_batch_norm(int channels, const std::string& name);
template <typename T>
ResidualBlock<T> make_residual_block(const ConvSpec& spec, const std::string& name, Rng& rng, bool linear = false);

/// Applies one layer. Throws ConfigError naming the layer on a channel
/// mismatch and NumericError on non-finite input.
template <typename T>
Var<T> forward_layer(const Var<T>& input, LayerParams<T>& layer, LayerKind kind, bool training,
                     const std::string& name = "");


/// An ordered stack of named layers.
template <typename T>
class Network {
 public:
  void add(std::string name, LayerParams<T> layer) {
    names_.push_back(std::move(name));
    layers_.push_back(std::move(layer));
  }
  Var<T> forward(const Var<T>& x, bool training);

  /// Trainable tensors in a stable order.
  std::vector<Var<T>> parameters() const;
  /// Trainable tensors plus batch-norm running statistics, by name.
  std::map<std::string, Tensor<T>*> state();
  std::map<std::string, const Tensor<T>*> state() const;
  std::size_t parameter_count() const;

  std::size_t size() const { return layers_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  std::vector<LayerParams<T>>& layers() { return layers_; }
  const std::vector<LayerParams<T>>& layers() const { return layers_; }

 private:
  std::vector<std::string> names_;
  std::vector<LayerParams<T>> layers_;
};

/// Copies every state tensor between networks of identical structure,
/// converting the scalar type.
template <typename To, typename From>
void copy_state(const Network<From>& src, Network<To>& dst);

}  // namespace deepofdm::tk
