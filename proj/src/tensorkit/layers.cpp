#include "deepofdm/tensorkit/layers.hpp"

#include <cmath>

namespace deepofdm::tk {

namespace {

template <typename T>
Tensor<T> uniform_tensor(Shape s, double limit, Rng& rng) {
  Tensor<T> t(s);
  for (auto& v : t.data) v = static_cast<T>(uniform(rng, -limit, limit));
  return t;
}

void check_finite_input(const auto& values, const std::string& name) {
  for (const auto v : values) {
    if (!std::isfinite(static_cast<double>(v))) throw NumericError("layer " + name + ": non-finite input");
  }
}

template <typename T>
Var<T> apply_conv(const Var<T>& x, const Conv2D<T>& layer, const std::string& name) {
  if (x.shape().c != layer.spec.cin) {
    throw ConfigError("layer " + name + ": expects " + std::to_string(layer.spec.cin) + " input channels, got " +
                      std::to_string(x.shape().c));
  }
  return bias_add(conv2d(x, layer.kernel, layer.spec.dh, layer.spec.dw), layer.bias);
}

template <typename T>
Var<T> apply_separable(const Var<T>& x, const SeparableConv2D<T>& layer, const std::string& name) {
  if (x.shape().c != layer.spec.cin) {
    throw ConfigError("layer " + name + ": expects " + std::to_string(layer.spec.cin) + " input channels, got " +
                      std::to_string(x.shape().c));
  }
  auto dw = depthwise_conv2d(x, layer.depthwise, layer.spec.dh, layer.spec.dw);
  return bias_add(conv2d(dw, layer.pointwise, 1, 1), layer.bias);
}

template <typename T>
Var<T> apply_bn(const Var<T>& x, BatchNorm<T>& layer, bool training, const std::string& name) {
  if (x.shape().c != layer.channels) {
    throw ConfigError("layer " + name + ": expects " + std::to_string(layer.channels) + " channels, got " +
                      std::to_string(x.shape().c));
  }
  return batch_norm(x, layer.gamma, layer.beta, layer.running_mean, layer.running_var, training, layer.momentum,
                    layer.eps);
}

template <typename T>
Var<T> apply_block(const Var<T>& x, ResidualBlock<T>& block, bool training, const std::string& name) {
  auto h = apply_bn(x, block.bn1, training, name + ".bn1");
  if (!block.linear) h = relu(h);
  h = apply_separable(h, block.sep1, name + ".sep1");
  h = apply_bn(h, block.bn2, training, name + ".bn2");
  if (!block.linear) h = relu(h);
  h = apply_separable(h, block.sep2, name + ".sep2");
  auto skip = block.projection ? apply_conv(x, *block.projection, name + ".proj") : x;
  if (skip.shape().c != h.shape().c) {
    throw ConfigError("layer " + name + ": skip path has " + std::to_string(skip.shape().c) + " channels, body " +
                      std::to_string(h.shape().c));
  }
  return add(h, skip);
}

template <typename T, typename F>
void visit_state(const std::string& prefix, const Conv2D<T>& l, F&& f) {
  f(prefix + ".kernel", l.kernel, true);
  f(prefix + ".bias", l.bias, true);
}
template <typename T, typename F>
void visit_state(const std::string& prefix, const SeparableConv2D<T>& l, F&& f) {
  f(prefix + ".depthwise", l.depthwise, true);
  f(prefix + ".pointwise", l.pointwise, true);
  f(prefix + ".bias", l.bias, true);
}
template <typename T, typename F>
void visit_state(const std::string& prefix, const BatchNorm<T>& l, F&& f) {
  f(prefix + ".gamma", l.gamma, true);
  f(prefix + ".beta", l.beta, true);
}
template <typename T, typename F>
void visit_state(const std::string&, const Relu&, F&&) {}
template <typename T, typename F>
void visit_state(const std::string& prefix, const ResidualBlock<T>& b, F&& f) {
  visit_state<T>(prefix + ".bn1", b.bn1, f);
  visit_state<T>(prefix + ".sep1", b.sep1, f);
  visit_state<T>(prefix + ".bn2", b.bn2, f);
  visit_state<T>(prefix + ".sep2", b.sep2, f);
  if (b.projection) visit_state<T>(prefix + ".proj", *b.projection, f);
}

template <typename T, typename F>
void visit_running(const std::string& prefix, BatchNorm<T>& l, F&& f) {
  f(prefix + ".running_mean", l.running_mean);
  f(prefix + ".running_var", l.running_var);
}

template <typename T, typename F>
void visit_all_running(const std::string& name, LayerParams<T>& layer, F&& f) {
  if (auto* bn = std::get_if<BatchNorm<T>>(&layer)) visit_running(name, *bn, f);
  if (auto* b = std::get_if<ResidualBlock<T>>(&layer)) {
    visit_running(name + ".bn1", b->bn1, f);
    visit_running(name + ".bn2", b->bn2, f);
  }
}

}  // namespace

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::separable_conv2d: return "separable_conv2d";
    case LayerKind::batch_norm: return "batch_norm";
    case LayerKind::relu: return "relu";
    case LayerKind::residual_block: return "residual_block";
  }
  return "?";
}

template <typename T>
Conv2D<T> make_conv2d(const ConvSpec& spec, const std::string& name, Rng& rng) {
  const double limit = std::sqrt(3.0 / (spec.kh * spec.kw * spec.cin));
  Conv2D<T> l;
  l.spec = spec;
  l.kernel = Var<T>::parameter(uniform_tensor<T>(Shape{spec.kh, spec.kw, spec.cin, spec.cout}, limit, rng),
                               name + ".kernel");
  l.bias = Var<T>::parameter(Tensor<T>(Shape{1, 1, 1, spec.cout}), name + ".bias");
  return l;
}

template <typename T>
SeparableConv2D<T> make_separable(const ConvSpec& spec, const std::string& name, Rng& rng) {
  SeparableConv2D<T> l;
  l.spec = spec;
  const double dw_limit = std::sqrt(3.0 / (spec.kh * spec.kw));
  const double pw_limit = std::sqrt(3.0 / spec.cin);
  l.depthwise = Var<T>::parameter(uniform_tensor<T>(Shape{spec.kh, spec.kw, 1, spec.cin}, dw_limit, rng),
                                  name + ".depthwise");
  l.pointwise = Var<T>::parameter(uniform_tensor<T>(Shape{1, 1, spec.cin, spec.cout}, pw_limit, rng),
                                  name + ".pointwise");
  l.bias = Var<T>::parameter(Tensor<T>(Shape{1, 1, 1, spec.cout}), name + ".bias");
  return l;
}

template <typename T>
BatchNorm<T> make_batch_norm(int channels, const std::string& name) {
  BatchNorm<T> l;
  l.channels = channels;
  l.gamma = Var<T>::parameter(Tensor<T>(Shape{1, 1, 1, channels}, T(1)), name + ".gamma");
  l.beta = Var<T>::parameter(Tensor<T>(Shape{1, 1, 1, channels}, T(0)), name + ".beta");
  l.running_mean = Tensor<T>(Shape{1, 1, 1, channels}, T(0));
  l.running_var = Tensor<T>(Shape{1, 1, 1, channels}, T(1));
  return l;
}

template <typename T>
ResidualBlock<T> make_residual_block(const ConvSpec& spec, const std::string& name, Rng& rng, bool linear) {
  ResidualBlock<T> b;
  b.linear = linear;
  b.bn1 = make_batch_norm<T>(spec.cin, name + ".bn1");
  b.sep1 = make_separable<T>(spec, name + ".sep1", rng);
  b.bn2 = make_batch_norm<T>(spec.cout, name + ".bn2");
  ConvSpec second = spec;
  second.cin = spec.cout;
  b.sep2 = make_separable<T>(second, name + ".sep2", rng);
  if (spec.cin != spec.cout) {
    b.projection = make_conv2d<T>(ConvSpec{spec.cin, spec.cout, 1, 1, 1, 1}, name + ".proj", rng);
  }
  return b;
}

template <typename T>
Var<T> forward_layer(const Var<T>& input, LayerParams<T>& layer, LayerKind kind, bool training,
                     const std::string& name) {
  const std::string label = name.empty() ? to_string(kind) : name;
  if (kind_of(layer) != kind) {
    throw ConfigError("layer " + label + ": declared kind " + to_string(kind) + " but holds " +
                      to_string(kind_of(layer)));
  }
  check_finite_input(input.value().data, label);
  switch (kind) {
    case LayerKind::conv2d: return apply_conv(input, std::get<Conv2D<T>>(layer), label);
    case LayerKind::separable_conv2d: return apply_separable(input, std::get<SeparableConv2D<T>>(layer), label);
    case LayerKind::batch_norm: return apply_bn(input, std::get<BatchNorm<T>>(layer), training, label);
    case LayerKind::relu: return relu(input);
    case LayerKind::residual_block: return apply_block(input, std::get<ResidualBlock<T>>(layer), training, label);
  }
  throw ConfigError("layer " + label + ": unknown kind");
}

template <typename T>
Var<T> Network<T>::forward(const Var<T>& x, bool training) {
  Var<T> h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = forward_layer(h, layers_[i], kind_of(layers_[i]), training, names_[i]);
  }
  return h;
}

template <typename T>
std::vector<Var<T>> Network<T>::parameters() const {
  std::vector<Var<T>> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    std::visit([&](const auto& l) {
      visit_state<T>(names_[i], l, [&](const std::string&, const Var<T>& v, bool) { out.push_back(v); });
    }, layers_[i]);
  }
  return out;
}

template <typename T>
std::map<std::string, Tensor<T>*> Network<T>::state() {
  std::map<std::string, Tensor<T>*> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    std::visit([&](auto& l) {
      visit_state<T>(names_[i], l, [&](const std::string& key, const Var<T>& v, bool) {
        out[key] = &const_cast<Var<T>&>(v).value();
      });
    }, layers_[i]);
    visit_all_running<T>(names_[i], layers_[i], [&](const std::string& key, Tensor<T>& t) { out[key] = &t; });
  }
  return out;
}

template <typename T>
std::map<std::string, const Tensor<T>*> Network<T>::state() const {
  std::map<std::string, const Tensor<T>*> out;
  for (auto& [k, v] : const_cast<Network<T>*>(this)->state()) out[k] = v;
  return out;
}

template <typename T>
std::size_t Network<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.value().size();
  return n;
}

template <typename To, typename From>
void copy_state(const Network<From>& src, Network<To>& dst) {
  auto s = src.state();
  auto d = dst.state();
  if (s.size() != d.size()) throw ConfigError("copy_state: networks differ in structure");
  for (auto& [key, tensor] : d) {
    auto it = s.find(key);
    if (it == s.end() || !(it->second->shape == tensor->shape)) {
      throw ConfigError("copy_state: missing or mismatched tensor " + key);
    }
    for (std::size_t i = 0; i < tensor->size(); ++i) tensor->data[i] = static_cast<To>(it->second->data[i]);
  }
}

#define DEEPOFDM_LAYERS_INSTANTIATE(T)                                                                  \
  template Conv2D<T> make_conv2d<T>(const ConvSpec&, const std::string&, Rng&);                         \
  template SeparableConv2D<T> make_separable<T>(const ConvSpec&, const std::string&, Rng&);             \
  template BatchNorm<T> make_batch_norm<T>(int, const std::string&);                                    \
  template ResidualBlock<T> make_residual_block<T>(const ConvSpec&, const std::string&, Rng&, bool);    \
  template Var<T> forward_layer<T>(const Var<T>&, LayerParams<T>&, LayerKind, bool, const std::string&); \
  template class Network<T>;

DEEPOFDM_LAYERS_INSTANTIATE(float)
DEEPOFDM_LAYERS_INSTANTIATE(double)

template void copy_state<float, double>(const Network<double>&, Network<float>&);
template void copy_state<double, float>(const Network<float>&, Network<double>&);
template void copy_state<double, double>(const Network<double>&, Network<double>&);
template void copy_state<float, float>(const Network<float>&, Network<float>&);

}  // namespace deepofdm::tk
