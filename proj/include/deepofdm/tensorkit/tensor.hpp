#pragma once

// Minimal reverse-mode automatic differentiation over NHWC tensors.
//
// Every value is a 4-d array (batch, height, width, channels). Grids use
// height = subcarriers and width = OFDM symbols; complex grids carry their
// real and imaginary parts as two channels.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace deepofdm::tk {

struct Shape {
  int n = 1;
  int h = 1;
  int w = 1;
  int c = 1;

  std::size_t size() const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(h) * static_cast<std::size_t>(w) *
           static_cast<std::size_t>(c);
  }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape(s), data(s.size(), fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t index(int n, int h, int w, int c) const {
    return ((static_cast<std::size_t>(n) * shape.h + h) * shape.w + w) * shape.c + c;
  }
  T& operator()(int n, int h, int w, int c) { return data[index(n, h, w, c)]; }
  const T& operator()(int n, int h, int w, int c) const { return data[index(n, h, w, c)]; }
  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }
  void fill(T v) { std::fill(data.begin(), data.end(), v); }
};

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // always shaped like value
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;
  bool requires_grad = false;
  bool leaf = true;
  std::string name;
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Var constant(Tensor<T> value);
  static Var parameter(Tensor<T> value, std::string name);

  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& value() { return node_->value; }
  const Tensor<T>& grad() const { return node_->grad; }
  Tensor<T>& grad() { return node_->grad; }
  const Shape& shape() const { return node_->value.shape; }
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  const std::string& name() const { return node_->name; }
  void zero_grad() { node_->grad.fill(T(0)); }

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& shared() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// While alive, operations on this thread record no graph edges.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Wraps a freshly computed value into a graph node. `backward` receives the
/// node and must accumulate into the grads of inputs that require them.
template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> inputs, std::function<void(Node<T>&)> backward,
                   const char* name = "");

/// Runs reverse-mode accumulation from a scalar loss. Returns the leaves that
/// received gradient. Interior nodes drop their edges afterwards.
template <typename T>
std::vector<Var<T>> backward(const Var<T>& loss);

// ---------------------------------------------------------------- operations

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> scale(const Var<T>& a, T s);
template <typename T>
Var<T> square(const Var<T>& a);
template <typename T>
Var<T> relu(const Var<T>& a);
template <typename T>
Var<T> sum(const Var<T>& a);
template <typename T>
Var<T> mean(const Var<T>& a);

/// "Same"-padded dilated convolution. kernel shape (kh, kw, cin, cout).
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& kernel, int dil_h, int dil_w);

/// Depthwise convolution, one filter per channel. kernel shape (kh, kw, 1, c).
template <typename T>
Var<T> depthwise_conv2d(const Var<T>& x, const Var<T>& kernel, int dil_h, int dil_w);

/// Adds a per-channel bias of shape (1, 1, 1, c).
template <typename T>
Var<T> bias_add(const Var<T>& x, const Var<T>& bias);

/// Batch normalization over (n, h, w) per channel. In training mode the batch
/// statistics are used and the running estimates updated in place.
template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, Tensor<T>& running_mean,
                  Tensor<T>& running_var, bool training, T momentum, T eps);

/// Concatenates along the channel axis.
template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& parts);

// Records ReLU activation patterns; used to exclude kinks in gradient checks.
struct ReluRecorder {
  static void start();
  static std::vector<std::vector<bool>> stop();
};

}  // namespace deepofdm::tk
