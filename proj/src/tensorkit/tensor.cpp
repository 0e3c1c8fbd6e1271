#include "deepofdm/tensorkit/tensor.hpp"

#include <Eigen/Core>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "deepofdm/common.hpp"

namespace deepofdm::tk {

namespace {

thread_local bool g_grad_enabled = true;
thread_local bool g_relu_recording = false;
thread_local std::vector<std::vector<bool>> g_relu_patterns;

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapRM = Eigen::Map<const MatRM<T>>;

void require_same(const Shape& a, const Shape& b, const char* op) {
  if (!(a == b)) {
    throw ConfigError(std::string(op) + ": shape mismatch " + a.str() + " vs " + b.str());
  }
}

// im2col for a "same"-padded dilated kernel. Returns a (n*h*w) x (kh*kw*c) matrix.
template <typename T>
std::vector<T> im2col(const Tensor<T>& x, int kh, int kw, int dh, int dw) {
  const auto& s = x.shape;
  const int ph = dh * (kh - 1) / 2;
  const int pw = dw * (kw - 1) / 2;
  const std::size_t cols = static_cast<std::size_t>(kh) * kw * s.c;
  std::vector<T> col(static_cast<std::size_t>(s.n) * s.h * s.w * cols, T(0));
  std::size_t row = 0;
  for (int n = 0; n < s.n; ++n) {
    for (int h = 0; h < s.h; ++h) {
      for (int w = 0; w < s.w; ++w, ++row) {
        T* dst = col.data() + row * cols;
        for (int i = 0; i < kh; ++i) {
          const int hh = h - ph + i * dh;
          if (hh < 0 || hh >= s.h) continue;
          for (int j = 0; j < kw; ++j) {
            const int ww = w - pw + j * dw;
            if (ww < 0 || ww >= s.w) continue;
            const T* src = x.ptr() + x.index(n, hh, ww, 0);
            std::copy(src, src + s.c, dst + (static_cast<std::size_t>(i) * kw + j) * s.c);
          }
        }
      }
    }
  }
  return col;
}

template <typename T>
void col2im_add(const std::vector<T>& col, Tensor<T>& dx, int kh, int kw, int dh, int dw) {
  const auto& s = dx.shape;
  const int ph = dh * (kh - 1) / 2;
  const int pw = dw * (kw - 1) / 2;
  const std::size_t cols = static_cast<std::size_t>(kh) * kw * s.c;
  std::size_t row = 0;
  for (int n = 0; n < s.n; ++n) {
    for (int h = 0; h < s.h; ++h) {
      for (int w = 0; w < s.w; ++w, ++row) {
        const T* src = col.data() + row * cols;
        for (int i = 0; i < kh; ++i) {
          const int hh = h - ph + i * dh;
          if (hh < 0 || hh >= s.h) continue;
          for (int j = 0; j < kw; ++j) {
            const int ww = w - pw + j * dw;
            if (ww < 0 || ww >= s.w) continue;
            T* dst = dx.ptr() + dx.index(n, hh, ww, 0);
            const T* part = src + (static_cast<std::size_t>(i) * kw + j) * s.c;
            for (int c = 0; c < s.c; ++c) dst[c] += part[c];
          }
        }
      }
    }
  }
}

template <typename T>
void ensure_grad(Node<T>& node) {
  if (node.grad.shape != node.value.shape || node.grad.size() != node.value.size()) {
    node.grad = Tensor<T>(node.value.shape, T(0));
  }
}

}  // namespace

std::string Shape::str() const {
  std::ostringstream os;
  os << "(" << n << ", " << h << ", " << w << ", " << c << ")";
  return os.str();
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

void ReluRecorder::start() {
  g_relu_recording = true;
  g_relu_patterns.clear();
}

std::vector<std::vector<bool>> ReluRecorder::stop() {
  g_relu_recording = false;
  return std::exchange(g_relu_patterns, {});
}

template <typename T>
Var<T> Var<T>::constant(Tensor<T> value) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->grad = Tensor<T>(node->value.shape, T(0));
  return Var<T>(std::move(node));
}

template <typename T>
Var<T> Var<T>::parameter(Tensor<T> value, std::string name) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->grad = Tensor<T>(node->value.shape, T(0));
  node->requires_grad = true;
  node->name = std::move(name);
  return Var<T>(std::move(node));
}

template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> inputs, std::function<void(Node<T>&)> backward,
                   const char* name) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->leaf = false;
  node->name = name;
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  }
  node->requires_grad = needs;
  node->grad.shape = node->value.shape;
  if (needs) {
    node->grad = Tensor<T>(node->value.shape, T(0));
    node->inputs.reserve(inputs.size());
    for (const auto& in : inputs) node->inputs.push_back(in.shared());
    node->backward = std::move(backward);
  }
  return Var<T>(std::move(node));
}

template <typename T>
std::vector<Var<T>> backward(const Var<T>& loss) {
  if (loss.value().size() != 1) {
    throw UsageError("backward: loss must be scalar, got shape " + loss.shape().str());
  }
  if (!loss.requires_grad()) return {};

  // Iterative post-order DFS gives a topological order.
  std::vector<Node<T>*> order;
  std::vector<Var<T>> leaves;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(loss.node(), 0);
  visited.insert(loss.node());
  if (loss.node()->leaf) leaves.push_back(loss);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      const auto& child = node->inputs[next++];
      if (child->requires_grad && visited.insert(child.get()).second) {
        if (child->leaf) leaves.emplace_back(child);
        stack.emplace_back(child.get(), 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  ensure_grad(*loss.node());
  loss.node()->grad.data[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward) node->backward(*node);
  }
  for (Node<T>* node : order) {
    if (node->leaf) continue;
    node->inputs.clear();
    node->backward = nullptr;
  }
  return leaves;
}

// ---------------------------------------------------------------- elementwise

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same(a.shape(), b.shape(), "add");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a.value().data[i] + b.value().data[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    for (auto& in : self.inputs) {
      if (!in->requires_grad) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) in->grad.data[i] += self.grad.data[i];
    }
  }, "add");
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same(a.shape(), b.shape(), "sub");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a.value().data[i] - b.value().data[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    auto& ga = self.inputs[0];
    auto& gb = self.inputs[1];
    if (ga->requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga->grad.data[i] += self.grad.data[i];
    if (gb->requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) gb->grad.data[i] -= self.grad.data[i];
  }, "sub");
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same(a.shape(), b.shape(), "mul");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a.value().data[i] * b.value().data[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    auto& na = self.inputs[0];
    auto& nb = self.inputs[1];
    if (na->requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) na->grad.data[i] += self.grad.data[i] * nb->value.data[i];
    if (nb->requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) nb->grad.data[i] += self.grad.data[i] * na->value.data[i];
  }, "mul");
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a.value().data[i] * s;
  return make_result<T>(std::move(out), {a}, [s](Node<T>& self) {
    auto& in = self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) in->grad.data[i] += self.grad.data[i] * s;
  }, "scale");
}

template <typename T>
Var<T> square(const Var<T>& a) {
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a.value().data[i] * a.value().data[i];
  return make_result<T>(std::move(out), {a}, [](Node<T>& self) {
    auto& in = self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) in->grad.data[i] += T(2) * self.grad.data[i] * in->value.data[i];
  }, "square");
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  Tensor<T> out(a.shape());
  const auto& x = a.value().data;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = x[i] > T(0) ? x[i] : T(0);
  if (g_relu_recording) {
    std::vector<bool> pattern(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) pattern[i] = x[i] > T(0);
    g_relu_patterns.push_back(std::move(pattern));
  }
  return make_result<T>(std::move(out), {a}, [](Node<T>& self) {
    auto& in = self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      in->grad.data[i] += in->value.data[i] > T(0) ? self.grad.data[i] : T(0);
  }, "relu");
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  Tensor<T> out(Shape{});
  double acc = 0.0;
  for (T v : a.value().data) acc += static_cast<double>(v);
  out.data[0] = static_cast<T>(acc);
  return make_result<T>(std::move(out), {a}, [](Node<T>& self) {
    auto& in = self.inputs[0];
    const T g = self.grad.data[0];
    for (auto& v : in->grad.data) v += g;
  }, "sum");
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  return scale(sum(a), T(1) / static_cast<T>(a.value().size()));
}

// ---------------------------------------------------------------- convolution

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& kernel, int dh, int dw) {
  const Shape& xs = x.shape();
  const Shape& ks = kernel.shape();
  if (ks.w != xs.c) {
    throw ConfigError("conv2d: kernel expects " + std::to_string(ks.w) + " input channels, input has " +
                      std::to_string(xs.c));
  }
  if (ks.n % 2 == 0 || ks.h % 2 == 0) throw ConfigError("conv2d: kernel size must be odd");
  const int kh = ks.n, kw = ks.h, cout = ks.c;
  const Eigen::Index rows = static_cast<Eigen::Index>(xs.n) * xs.h * xs.w;
  Tensor<T> out(Shape{xs.n, xs.h, xs.w, cout});
  CMapRM<T> kmat(kernel.value().ptr(), static_cast<Eigen::Index>(kh) * kw * xs.c, cout);
  MapRM<T> omat(out.ptr(), rows, cout);
  const bool pointwise = kh == 1 && kw == 1;
  if (pointwise) {
    CMapRM<T> xmat(x.value().ptr(), rows, xs.c);
    omat.noalias() = xmat * kmat;
  } else {
    auto col = im2col(x.value(), kh, kw, dh, dw);
    CMapRM<T> cmat(col.data(), rows, kmat.rows());
    omat.noalias() = cmat * kmat;
  }
  return make_result<T>(std::move(out), {x, kernel}, [kh, kw, dh, dw, pointwise](Node<T>& self) {
    auto& xn = *self.inputs[0];
    auto& kn = *self.inputs[1];
    const Shape& s = xn.value.shape;
    const Eigen::Index rows = static_cast<Eigen::Index>(s.n) * s.h * s.w;
    const Eigen::Index kr = static_cast<Eigen::Index>(kh) * kw * s.c;
    const Eigen::Index cout = kn.value.shape.c;
    CMapRM<T> gmat(self.grad.ptr(), rows, cout);
    CMapRM<T> kmat(kn.value.ptr(), kr, cout);
    if (pointwise) {
      CMapRM<T> xmat(xn.value.ptr(), rows, s.c);
      if (kn.requires_grad) {
        MapRM<T> dk(kn.grad.ptr(), kr, cout);
        dk.noalias() += xmat.transpose() * gmat;
      }
      if (xn.requires_grad) {
        MapRM<T> dx(xn.grad.ptr(), rows, s.c);
        dx.noalias() += gmat * kmat.transpose();
      }
      return;
    }
    auto col = im2col(xn.value, kh, kw, dh, dw);
    if (kn.requires_grad) {
      CMapRM<T> cmat(col.data(), rows, kr);
      MapRM<T> dk(kn.grad.ptr(), kr, cout);
      dk.noalias() += cmat.transpose() * gmat;
    }
    if (xn.requires_grad) {
      MapRM<T> dcol(col.data(), rows, kr);
      dcol.noalias() = gmat * kmat.transpose();
      col2im_add(col, xn.grad, kh, kw, dh, dw);
    }
  }, "conv2d");
}

// Visits every (output row, input row, kernel tap) triple of a "same" padded
// dilated depthwise convolution with the valid output column range, so the
// inner loops run over contiguous (w, c) spans.
template <typename F>
void for_each_depthwise_span(const Shape& s, int kh, int kw, int dh, int dw, F&& f) {
  const int ph = dh * (kh - 1) / 2, pw = dw * (kw - 1) / 2;
  for (int n = 0; n < s.n; ++n)
    for (int h = 0; h < s.h; ++h)
      for (int i = 0; i < kh; ++i) {
        const int hh = h - ph + i * dh;
        if (hh < 0 || hh >= s.h) continue;
        for (int j = 0; j < kw; ++j) {
          const int off = j * dw - pw;
          const int w0 = std::max(0, -off), w1 = std::min(s.w, s.w - off);
          if (w0 >= w1) continue;
          const std::size_t out_row = (static_cast<std::size_t>(n) * s.h + h) * s.w;
          const std::size_t in_row = (static_cast<std::size_t>(n) * s.h + hh) * s.w;
          f(out_row + w0, in_row + w0 + off, w1 - w0, static_cast<std::size_t>(i) * kw + j);
        }
      }
}

template <typename T>
Var<T> depthwise_conv2d(const Var<T>& x, const Var<T>& kernel, int dh, int dw) {
  const Shape& xs = x.shape();
  const Shape& ks = kernel.shape();
  if (ks.c != xs.c || ks.w != 1) {
    throw ConfigError("depthwise_conv2d: kernel " + ks.str() + " does not match input " + xs.str());
  }
  if (ks.n % 2 == 0 || ks.h % 2 == 0) throw ConfigError("depthwise_conv2d: kernel size must be odd");
  const int kh = ks.n, kw = ks.h, C = xs.c;
  Tensor<T> out(xs);
  const T* xp = x.value().ptr();
  const T* kp = kernel.value().ptr();
  T* op = out.ptr();
  for_each_depthwise_span(xs, kh, kw, dh, dw, [&](std::size_t o, std::size_t in, int len, std::size_t tap) {
    const T* ki = kp + tap * C;
    for (int w = 0; w < len; ++w) {
      T* ow = op + (o + w) * C;
      const T* xw = xp + (in + w) * C;
      for (int c = 0; c < C; ++c) ow[c] += xw[c] * ki[c];
    }
  });
  return make_result<T>(std::move(out), {x, kernel}, [kh, kw, dh, dw](Node<T>& self) {
    auto& xn = *self.inputs[0];
    auto& kn = *self.inputs[1];
    const Shape& s = xn.value.shape;
    const int C = s.c;
    const T* g = self.grad.ptr();
    for_each_depthwise_span(s, kh, kw, dh, dw, [&](std::size_t o, std::size_t in, int len, std::size_t tap) {
      if (kn.requires_grad) {
        const T* xi = xn.value.ptr();
        T* dk = kn.grad.ptr() + tap * C;
        for (int w = 0; w < len; ++w) {
          const T* gw = g + (o + w) * C;
          const T* xw = xi + (in + w) * C;
          for (int c = 0; c < C; ++c) dk[c] += gw[c] * xw[c];
        }
      }
      if (xn.requires_grad) {
        const T* ki = kn.value.ptr() + tap * C;
        T* dx = xn.grad.ptr();
        for (int w = 0; w < len; ++w) {
          const T* gw = g + (o + w) * C;
          T* dxw = dx + (in + w) * C;
          for (int c = 0; c < C; ++c) dxw[c] += gw[c] * ki[c];
        }
      }
    });
  }, "depthwise_conv2d");
}

template <typename T>
Var<T> bias_add(const Var<T>& x, const Var<T>& bias) {
  const int C = x.shape().c;
  if (bias.shape().c != C || bias.value().size() != static_cast<std::size_t>(C)) {
    throw ConfigError("bias_add: bias " + bias.shape().str() + " does not match input " + x.shape().str());
  }
  Tensor<T> out = x.value();
  const std::size_t positions = out.size() / C;
  for (std::size_t p = 0; p < positions; ++p)
    for (int c = 0; c < C; ++c) out.data[p * C + c] += bias.value().data[c];
  return make_result<T>(std::move(out), {x, bias}, [C](Node<T>& self) {
    auto& xn = *self.inputs[0];
    auto& bn = *self.inputs[1];
    const std::size_t positions = self.grad.size() / C;
    if (xn.requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) xn.grad.data[i] += self.grad.data[i];
    if (bn.requires_grad)
      for (std::size_t p = 0; p < positions; ++p)
        for (int c = 0; c < C; ++c) bn.grad.data[c] += self.grad.data[p * C + c];
  }, "bias_add");
}

template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, Tensor<T>& running_mean,
                  Tensor<T>& running_var, bool training, T momentum, T eps) {
  const int C = x.shape().c;
  if (gamma.value().size() != static_cast<std::size_t>(C) || beta.value().size() != static_cast<std::size_t>(C)) {
    throw ConfigError("batch_norm: parameters do not match " + std::to_string(C) + " channels");
  }
  const std::size_t M = x.value().size() / C;
  std::vector<T> mu(C), inv_std(C);
  if (training) {
    std::vector<double> s1(C, 0.0), s2(C, 0.0);
    for (std::size_t p = 0; p < M; ++p)
      for (int c = 0; c < C; ++c) s1[c] += x.value().data[p * C + c];
    for (int c = 0; c < C; ++c) s1[c] /= static_cast<double>(M);
    for (std::size_t p = 0; p < M; ++p)
      for (int c = 0; c < C; ++c) {
        const double d = x.value().data[p * C + c] - s1[c];
        s2[c] += d * d;
      }
    for (int c = 0; c < C; ++c) {
      const double var = s2[c] / static_cast<double>(M);
      mu[c] = static_cast<T>(s1[c]);
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
      const double unbiased = M > 1 ? var * static_cast<double>(M) / static_cast<double>(M - 1) : var;
      running_mean.data[c] = momentum * running_mean.data[c] + (T(1) - momentum) * static_cast<T>(s1[c]);
      running_var.data[c] = momentum * running_var.data[c] + (T(1) - momentum) * static_cast<T>(unbiased);
    }
  } else {
    for (int c = 0; c < C; ++c) {
      mu[c] = running_mean.data[c];
      inv_std[c] = T(1) / std::sqrt(running_var.data[c] + eps);
    }
  }
  Tensor<T> out(x.shape());
  Tensor<T> xhat(x.shape());
  for (std::size_t p = 0; p < M; ++p)
    for (int c = 0; c < C; ++c) {
      const std::size_t i = p * C + c;
      xhat.data[i] = (x.value().data[i] - mu[c]) * inv_std[c];
      out.data[i] = gamma.value().data[c] * xhat.data[i] + beta.value().data[c];
    }
  return make_result<T>(std::move(out), {x, gamma, beta},
                        [C, M, training, inv_std, xhat = std::move(xhat)](Node<T>& self) {
    auto& xn = *self.inputs[0];
    auto& gn = *self.inputs[1];
    auto& bn = *self.inputs[2];
    std::vector<double> sum_g(C, 0.0), sum_gx(C, 0.0);
    for (std::size_t p = 0; p < M; ++p)
      for (int c = 0; c < C; ++c) {
        const std::size_t i = p * C + c;
        sum_g[c] += self.grad.data[i];
        sum_gx[c] += static_cast<double>(self.grad.data[i]) * xhat.data[i];
      }
    if (gn.requires_grad)
      for (int c = 0; c < C; ++c) gn.grad.data[c] += static_cast<T>(sum_gx[c]);
    if (bn.requires_grad)
      for (int c = 0; c < C; ++c) bn.grad.data[c] += static_cast<T>(sum_g[c]);
    if (!xn.requires_grad) return;
    std::vector<T> k(C), mg(C, T(0)), mgx(C, T(0));
    for (int c = 0; c < C; ++c) {
      k[c] = gn.value.data[c] * inv_std[c];
      if (training) {
        mg[c] = static_cast<T>(sum_g[c] / static_cast<double>(M));
        mgx[c] = static_cast<T>(sum_gx[c] / static_cast<double>(M));
      }
    }
    const T* g = self.grad.ptr();
    const T* xh = xhat.ptr();
    T* dx = xn.grad.ptr();
    for (std::size_t p = 0; p < M; ++p)
      for (int c = 0; c < C; ++c) {
        const std::size_t i = p * C + c;
        dx[i] += k[c] * (g[i] - mg[c] - xh[i] * mgx[c]);
      }
  }, "batch_norm");
}

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ConfigError("concat_channels: no inputs");
  Shape s = parts[0].shape();
  int total = 0;
  for (const auto& p : parts) {
    const Shape& ps = p.shape();
    if (ps.n != s.n || ps.h != s.h || ps.w != s.w) {
      throw ConfigError("concat_channels: spatial mismatch " + ps.str() + " vs " + s.str());
    }
    total += ps.c;
  }
  Shape os{s.n, s.h, s.w, total};
  Tensor<T> out(os);
  const std::size_t positions = os.size() / total;
  std::vector<int> offsets;
  int off = 0;
  for (const auto& p : parts) {
    const int c = p.shape().c;
    offsets.push_back(off);
    for (std::size_t q = 0; q < positions; ++q)
      std::copy_n(p.value().ptr() + q * c, c, out.ptr() + q * total + off);
    off += c;
  }
  return make_result<T>(std::move(out), parts, [offsets, total, positions](Node<T>& self) {
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      auto& in = *self.inputs[k];
      if (!in.requires_grad) continue;
      const int c = in.value.shape.c;
      for (std::size_t q = 0; q < positions; ++q)
        for (int j = 0; j < c; ++j) in.grad.data[q * c + j] += self.grad.data[q * total + offsets[k] + j];
    }
  }, "concat");
}

#define DEEPOFDM_TK_INSTANTIATE(T)                                                                        \
  template class Var<T>;                                                                                  \
  template Var<T> make_result<T>(Tensor<T>, std::vector<Var<T>>, std::function<void(Node<T>&)>,          \
                                 const char*);                                                            \
  template std::vector<Var<T>> backward<T>(const Var<T>&);                                                \
  template Var<T> add<T>(const Var<T>&, const Var<T>&);                                                   \
  template Var<T> sub<T>(const Var<T>&, const Var<T>&);                                                   \
  template Var<T> mul<T>(const Var<T>&, const Var<T>&);                                                   \
  template Var<T> scale<T>(const Var<T>&, T);                                                             \
  template Var<T> square<T>(const Var<T>&);                                                               \
  template Var<T> relu<T>(const Var<T>&);                                                                 \
  template Var<T> sum<T>(const Var<T>&);                                                                  \
  template Var<T> mean<T>(const Var<T>&);                                                                 \
  template Var<T> conv2d<T>(const Var<T>&, const Var<T>&, int, int);                                      \
  template Var<T> depthwise_conv2d<T>(const Var<T>&, const Var<T>&, int, int);                            \
  template Var<T> bias_add<T>(const Var<T>&, const Var<T>&);                                              \
  template Var<T> batch_norm<T>(const Var<T>&, const Var<T>&, const Var<T>&, Tensor<T>&, Tensor<T>&, bool, \
                                T, T);                                                                    \
  template Var<T> concat_channels<T>(const std::vector<Var<T>>&);

DEEPOFDM_TK_INSTANTIATE(float)
DEEPOFDM_TK_INSTANTIATE(double)

}  // namespace deepofdm::tk
