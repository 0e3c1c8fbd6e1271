#include "deepofdm/link_ops.hpp"

#include <cmath>

#include "deepofdm/waveform.hpp"

namespace deepofdm::ops {

using tk::Node;
using tk::Shape;
using tk::Tensor;
using tk::Var;

namespace {

constexpr double kClip = 30.0;

template <typename T>
cplx load(const Tensor<T>& t, std::size_t pair) {
  return cplx(t.data[2 * pair], t.data[2 * pair + 1]);
}

template <typename T>
void store(Tensor<T>& t, std::size_t pair, cplx v) {
  t.data[2 * pair] = static_cast<T>(v.real());
  t.data[2 * pair + 1] = static_cast<T>(v.imag());
}

template <typename T>
void accumulate(Tensor<T>& t, std::size_t pair, cplx v) {
  t.data[2 * pair] += static_cast<T>(v.real());
  t.data[2 * pair + 1] += static_cast<T>(v.imag());
}

// Tensor offset of RE (k, t) in frame b for a (B, n_s, n_t, 2) grid, in pairs.
std::size_t re_pair(int b, int k, int t, int n_s, int n_t) {
  return (static_cast<std::size_t>(b) * n_s + k) * n_t + t;
}

// Storage index of the grid types (k + t n_s) to (k, t).
std::pair<int, int> split(int idx, int n_s) { return {idx % n_s, idx / n_s}; }

void check_complex(const Shape& s, const char* what) {
  if (s.c != 2) throw ConfigError(std::string(what) + ": expected 2 channels (Re, Im), got " + std::to_string(s.c));
}

}  // namespace

template <typename T>
Var<T> normalize_points(const Var<T>& points) {
  const Shape s = points.shape();
  check_complex(s, "normalize_points");
  const std::size_t n = s.size() / 2;
  cplx mu = 0.0;
  for (std::size_t i = 0; i < n; ++i) mu += load(points.value(), i);
  mu /= static_cast<double>(n);
  double power = 0.0;
  for (std::size_t i = 0; i < n; ++i) power += std::norm(load(points.value(), i) - mu);
  power /= static_cast<double>(n);
  if (!(power > 0.0)) throw NumericError("constellation collapsed to a single point");
  const double g = 1.0 / std::sqrt(power);
  Tensor<T> out(s);
  for (std::size_t i = 0; i < n; ++i) store(out, i, (load(points.value(), i) - mu) * g);
  return tk::make_result<T>(std::move(out), {points}, [n, g](Node<T>& self) {
    // y = g (x - mu), g = P^{-1/2}: dx = g (dy - mean dy) - g y Re<y, dy> / n.
    cplx mean_dy = 0.0;
    double proj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const cplx dy = load(self.grad, i);
      mean_dy += dy;
      const cplx y = load(self.value, i);
      proj += y.real() * dy.real() + y.imag() * dy.imag();
    }
    mean_dy /= static_cast<double>(n);
    proj /= static_cast<double>(n);
    auto& in = *self.inputs[0];
    for (std::size_t i = 0; i < n; ++i) {
      accumulate(in.grad, i, g * (load(self.grad, i) - mean_dy) - g * proj * load(self.value, i));
    }
  }, "normalize_points");
}

template <typename T>
Var<T> embed(const Var<T>& points, const std::vector<int>& labels, const PilotPattern& pattern, int batch) {
  check_complex(points.shape(), "embed");
  const int count = static_cast<int>(points.shape().size() / 2);
  const int nd = pattern.data_count();
  if (labels.size() != static_cast<std::size_t>(nd) * batch) throw FramingError("embed: label count mismatch");
  const int n_s = pattern.n_s, n_t = pattern.n_t;
  Tensor<T> out(Shape{batch, n_s, n_t, 2});
  for (int b = 0; b < batch; ++b) {
    for (int idx : pattern.pilot_indices) {
      auto [k, t] = split(idx, n_s);
      store(out, re_pair(b, k, t, n_s, n_t), pattern.values[idx]);
    }
    for (int i = 0; i < nd; ++i) {
      const int label = labels[static_cast<std::size_t>(b) * nd + i];
      if (label < 0 || label >= count) throw ConfigError("embed: label outside the constellation");
      auto [k, t] = split(pattern.data_indices[i], n_s);
      store(out, re_pair(b, k, t, n_s, n_t), load(points.value(), label));
    }
  }
  const std::vector<int> data(pattern.data_indices.begin(), pattern.data_indices.end());
  return tk::make_result<T>(std::move(out), {points}, [labels, data, batch, n_s, n_t](Node<T>& self) {
    auto& in = *self.inputs[0];
    const std::size_t nd = data.size();
    for (int b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < nd; ++i) {
        auto [k, t] = split(data[i], n_s);
        accumulate(in.grad, labels[b * nd + i], load(self.grad, re_pair(b, k, t, n_s, n_t)));
      }
  }, "embed");
}

template <typename T>
Var<T> stamp_and_normalize(const Var<T>& grid, const PilotPattern& pattern) {
  const Shape s = grid.shape();
  check_complex(s, "stamp_and_normalize");
  if (s.h != pattern.n_s || s.w != pattern.n_t) throw ConfigError("stamp_and_normalize: grid and pattern differ");
  const int n_s = s.h, n_t = s.w, batch = s.n;
  const int nd = pattern.data_count();
  std::vector<double> gains(static_cast<std::size_t>(batch), 1.0);
  Tensor<T> out(s);
  std::vector<std::size_t> data_pairs(static_cast<std::size_t>(nd));
  for (int b = 0; b < batch; ++b) {
    double power = 0.0;
    for (int i = 0; i < nd; ++i) {
      auto [k, t] = split(pattern.data_indices[i], n_s);
      power += std::norm(load(grid.value(), re_pair(b, k, t, n_s, n_t)));
    }
    if (nd > 0) {
      if (!(power > 0.0)) throw NumericError("modulator produced an all-zero data grid");
      gains[b] = std::sqrt(nd / power);
    }
    for (int i = 0; i < nd; ++i) {
      auto [k, t] = split(pattern.data_indices[i], n_s);
      const std::size_t p = re_pair(b, k, t, n_s, n_t);
      store(out, p, load(grid.value(), p) * gains[b]);
    }
    for (int idx : pattern.pilot_indices) {
      auto [k, t] = split(idx, n_s);
      store(out, re_pair(b, k, t, n_s, n_t), pattern.values[idx]);
    }
  }
  const std::vector<int> data(pattern.data_indices.begin(), pattern.data_indices.end());
  return tk::make_result<T>(std::move(out), {grid}, [gains, data, n_s, n_t, batch](Node<T>& self) {
    // Per frame y = g x on data REs with g = sqrt(nd / sum |x|^2):
    // dx = g (dy - y Re<y, dy> / nd).
    auto& in = *self.inputs[0];
    const double nd = static_cast<double>(data.size());
    for (int b = 0; b < batch; ++b) {
      double proj = 0.0;
      for (int idx : data) {
        auto [k, t] = split(idx, n_s);
        const std::size_t p = re_pair(b, k, t, n_s, n_t);
        const cplx y = load(self.value, p), dy = load(self.grad, p);
        proj += y.real() * dy.real() + y.imag() * dy.imag();
      }
      proj /= nd;
      for (int idx : data) {
        auto [k, t] = split(idx, n_s);
        const std::size_t p = re_pair(b, k, t, n_s, n_t);
        accumulate(in.grad, p, gains[b] * (load(self.grad, p) - load(self.value, p) * proj));
      }
    }
  }, "stamp_and_normalize");
}

template <typename T>
Var<T> superimpose(const Var<T>& grid, const Var<T>& logits, const ResourceGrid& pilots) {
  const Shape s = grid.shape();
  check_complex(s, "superimpose");
  const int n_s = s.h, n_t = s.w;
  if (pilots.n_s != n_s || pilots.n_t != n_t || logits.shape() != Shape{1, n_s, n_t, 1}) {
    throw ConfigError("superimpose: pilot grid, fractions and data grid differ in size");
  }
  Tensor<T> out(s);
  std::vector<double> a(static_cast<std::size_t>(n_s) * n_t);
  for (int k = 0; k < n_s; ++k)
    for (int t = 0; t < n_t; ++t) a[k * n_t + t] = 1.0 / (1.0 + std::exp(-double(logits.value()(0, k, t, 0))));
  for (int b = 0; b < s.n; ++b)
    for (int k = 0; k < n_s; ++k)
      for (int t = 0; t < n_t; ++t) {
        const std::size_t p = re_pair(b, k, t, n_s, n_t);
        const double ai = a[k * n_t + t];
        store(out, p, std::sqrt(1.0 - ai) * load(grid.value(), p) + std::sqrt(ai) * pilots.at(k, t));
      }
  return tk::make_result<T>(std::move(out), {grid, logits}, [a, pilots, n_s, n_t](Node<T>& self) {
    auto& x = *self.inputs[0];
    auto& l = *self.inputs[1];
    const int batch = self.value.shape.n;
    for (int b = 0; b < batch; ++b)
      for (int k = 0; k < n_s; ++k)
        for (int t = 0; t < n_t; ++t) {
          const std::size_t p = re_pair(b, k, t, n_s, n_t);
          const double ai = a[k * n_t + t];
          const cplx dy = load(self.grad, p);
          if (x.requires_grad) accumulate(x.grad, p, std::sqrt(1.0 - ai) * dy);
          if (l.requires_grad) {
            // dy/dA = -X / (2 sqrt(1-A)) + P / (2 sqrt(A)), dA/dl = A (1 - A).
            const cplx xv = load(x.value, p);
            const cplx dyda = -xv / (2.0 * std::sqrt(std::max(1.0 - ai, 1e-300))) +
                              pilots.at(k, t) / (2.0 * std::sqrt(std::max(ai, 1e-300)));
            const double d = dy.real() * dyda.real() + dy.imag() * dyda.imag();
            l.grad(0, k, t, 0) += static_cast<T>(d * ai * (1.0 - ai));
          }
        }
  }, "superimpose");
}

template <typename T>
Var<T> ofdm_modulate(const Var<T>& grid, int n_cp) {
  const Shape s = grid.shape();
  check_complex(s, "ofdm_modulate");
  const int n_s = s.h, n_t = s.w, batch = s.n;
  if (n_cp < 0 || n_cp >= n_s) throw ConfigError("cyclic prefix must be shorter than the symbol");
  const int sym = n_s + n_cp, len = sym * n_t;
  Tensor<T> out(Shape{batch, len, 1, 2});
  CVec col(static_cast<std::size_t>(n_s));
  for (int b = 0; b < batch; ++b)
    for (int t = 0; t < n_t; ++t) {
      for (int k = 0; k < n_s; ++k) col[k] = load(grid.value(), re_pair(b, k, t, n_s, n_t));
      unitary_dft(col.data(), n_s, true);
      const std::size_t base = static_cast<std::size_t>(b) * len + static_cast<std::size_t>(t) * sym;
      for (int i = 0; i < n_cp; ++i) store(out, base + i, col[n_s - n_cp + i]);
      for (int i = 0; i < n_s; ++i) store(out, base + n_cp + i, col[i]);
    }
  return tk::make_result<T>(std::move(out), {grid}, [n_s, n_t, n_cp](Node<T>& self) {
    const int sym = n_s + n_cp, len = sym * n_t, batch = self.value.shape.n;
    auto& in = *self.inputs[0];
    CVec col(static_cast<std::size_t>(n_s));
    for (int b = 0; b < batch; ++b)
      for (int t = 0; t < n_t; ++t) {
        const std::size_t base = static_cast<std::size_t>(b) * len + static_cast<std::size_t>(t) * sym;
        for (int i = 0; i < n_s; ++i) col[i] = load(self.grad, base + n_cp + i);
        for (int i = 0; i < n_cp; ++i) col[n_s - n_cp + i] += load(self.grad, base + i);
        unitary_dft(col.data(), n_s, false);
        for (int k = 0; k < n_s; ++k) accumulate(in.grad, re_pair(b, k, t, n_s, n_t), col[k]);
      }
  }, "ofdm_modulate");
}

template <typename T>
Var<T> ofdm_demodulate(const Var<T>& time, int n_s, int n_cp, int n_t) {
  const Shape s = time.shape();
  check_complex(s, "ofdm_demodulate");
  const int sym = n_s + n_cp, len = sym * n_t, batch = s.n;
  if (s.h != len || s.w != 1) throw FramingError("ofdm_demodulate: frame length does not match the grid");
  Tensor<T> out(Shape{batch, n_s, n_t, 2});
  CVec col(static_cast<std::size_t>(n_s));
  for (int b = 0; b < batch; ++b)
    for (int t = 0; t < n_t; ++t) {
      const std::size_t base = static_cast<std::size_t>(b) * len + static_cast<std::size_t>(t) * sym + n_cp;
      for (int i = 0; i < n_s; ++i) col[i] = load(time.value(), base + i);
      unitary_dft(col.data(), n_s, false);
      for (int k = 0; k < n_s; ++k) store(out, re_pair(b, k, t, n_s, n_t), col[k]);
    }
  return tk::make_result<T>(std::move(out), {time}, [n_s, n_t, n_cp](Node<T>& self) {
    const int sym = n_s + n_cp, len = sym * n_t, batch = self.value.shape.n;
    auto& in = *self.inputs[0];
    CVec col(static_cast<std::size_t>(n_s));
    for (int b = 0; b < batch; ++b)
      for (int t = 0; t < n_t; ++t) {
        for (int k = 0; k < n_s; ++k) col[k] = load(self.grad, re_pair(b, k, t, n_s, n_t));
        unitary_dft(col.data(), n_s, true);
        const std::size_t base = static_cast<std::size_t>(b) * len + static_cast<std::size_t>(t) * sym + n_cp;
        for (int i = 0; i < n_s; ++i) accumulate(in.grad, base + i, col[i]);
      }
  }, "ofdm_demodulate");
}

template <typename T>
Var<T> smooth_papr(const Var<T>& time, double temperature) {
  const Shape s = time.shape();
  check_complex(s, "smooth_papr");
  const int batch = s.n;
  const std::size_t len = static_cast<std::size_t>(s.h) * s.w;
  // Per frame: weights w_i (softmax of T p_i), mean power mu and sum_i w_i p_i.
  std::vector<std::vector<double>> weights(static_cast<std::size_t>(batch));
  std::vector<double> mus(static_cast<std::size_t>(batch)), wp(static_cast<std::size_t>(batch));
  double total = 0.0;
  for (int b = 0; b < batch; ++b) {
    std::vector<double> q(len);
    double mu = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      q[i] = std::norm(load(time.value(), b * len + i));
      mu += q[i];
    }
    mu /= static_cast<double>(len);
    if (!(mu > 0.0)) throw NumericError("smooth_papr: zero-energy frame");
    double peak = 0.0;
    for (double v : q) peak = std::max(peak, v / mu);
    auto& w = weights[b];
    w.resize(len);
    double z = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      w[i] = std::exp(temperature * (q[i] / mu - peak));
      z += w[i];
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      w[i] /= z;
      acc += w[i] * q[i] / mu;
    }
    mus[b] = mu;
    wp[b] = acc;
    total += peak + std::log(z / static_cast<double>(len)) / temperature;
  }
  Tensor<T> out(Shape{1, 1, 1, 1});
  out.data[0] = static_cast<T>(total / batch);
  return tk::make_result<T>(std::move(out), {time}, [weights, mus, wp, len, batch](Node<T>& self) {
    auto& in = *self.inputs[0];
    const double g = self.grad.data[0] / batch;
    for (int b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < len; ++i) {
        const double dq = g * (weights[b][i] - wp[b] / static_cast<double>(len)) / mus[b];
        accumulate(in.grad, b * len + i, 2.0 * dq * load(in.value, b * len + i));
      }
  }, "smooth_papr");
}

template <typename T>
Var<T> channel(const Var<T>& time, const std::vector<ChannelRealization>& ch, const std::vector<CVec>& noise) {
  const Shape s = time.shape();
  check_complex(s, "channel");
  const int batch = s.n;
  const std::size_t len = static_cast<std::size_t>(s.h) * s.w;
  if (ch.size() != static_cast<std::size_t>(batch) || noise.size() != ch.size()) {
    throw ConfigError("channel: need one realization and one noise vector per frame");
  }
  Tensor<T> out(s);
  for (int b = 0; b < batch; ++b) {
    TimeDomainFrame f;
    f.samples.resize(len);
    for (std::size_t i = 0; i < len; ++i) f.samples[i] = load(time.value(), b * len + i);
    const auto y = apply_channel(f, ch[b], 0.0, 0);
    if (noise[b].size() != len) throw ConfigError("channel: noise vector has the wrong length");
    for (std::size_t i = 0; i < len; ++i) store(out, b * len + i, y.samples[i] + noise[b][i]);
  }
  return tk::make_result<T>(std::move(out), {time}, [ch, len, batch](Node<T>& self) {
    auto& in = *self.inputs[0];
    CVec g(len);
    for (int b = 0; b < batch; ++b) {
      for (std::size_t i = 0; i < len; ++i) g[i] = load(self.grad, b * len + i);
      const auto back = apply_channel_adjoint(g, ch[b]);
      for (std::size_t i = 0; i < len; ++i) accumulate(in.grad, b * len + i, back[i]);
    }
  }, "channel");
}

template <typename T>
Var<T> rate_loss(const Var<T>& llr, const std::vector<std::uint8_t>& bits, const std::vector<std::uint8_t>& mask) {
  const std::size_t n = llr.shape().size();
  if (bits.size() != n || mask.size() != n) throw FramingError("rate_loss: LLR, bit and mask counts differ");
  std::size_t count = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const double z = std::clamp(static_cast<double>(llr.value().data[i]), -kClip, kClip);
    // -log sigmoid(+-z) = softplus(-+z)
    const double x = bits[i] ? -z : z;
    total += std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
    ++count;
  }
  if (count == 0) throw FramingError("rate_loss: no bits selected");
  Tensor<T> out(Shape{1, 1, 1, 1});
  out.data[0] = static_cast<T>(total / count / std::log(2.0) - 1.0);
  return tk::make_result<T>(std::move(out), {llr}, [bits, mask, count](Node<T>& self) {
    auto& in = *self.inputs[0];
    const double g = self.grad.data[0] / (count * std::log(2.0));
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (!mask[i]) continue;
      const double v = in.value.data[i];
      if (v < -kClip || v > kClip) continue;
      const double p = 1.0 / (1.0 + std::exp(-v));
      in.grad.data[i] += static_cast<T>(g * (p - bits[i]));
    }
  }, "rate_loss");
}

double rate_loss_value(const std::vector<double>& llr, const std::vector<std::uint8_t>& bits) {
  double total = 0.0;
  for (std::size_t i = 0; i < llr.size(); ++i) {
    const double p1 = 1.0 / (1.0 + std::exp(-std::clamp(llr[i], -kClip, kClip)));
    total -= bits[i] ? std::log(p1) : std::log(1.0 - p1);
  }
  return total / llr.size() / std::log(2.0) - 1.0;
}

#define DEEPOFDM_OPS_INSTANTIATE(T)                                                                              \
  template Var<T> normalize_points<T>(const Var<T>&);                                                            \
  template Var<T> embed<T>(const Var<T>&, const std::vector<int>&, const PilotPattern&, int);                    \
  template Var<T> stamp_and_normalize<T>(const Var<T>&, const PilotPattern&);                                    \
  template Var<T> superimpose<T>(const Var<T>&, const Var<T>&, const ResourceGrid&);                             \
  template Var<T> ofdm_modulate<T>(const Var<T>&, int);                                                          \
  template Var<T> ofdm_demodulate<T>(const Var<T>&, int, int, int);                                              \
  template Var<T> smooth_papr<T>(const Var<T>&, double);                                                         \
  template Var<T> channel<T>(const Var<T>&, const std::vector<ChannelRealization>&, const std::vector<CVec>&);   \
  template Var<T> rate_loss<T>(const Var<T>&, const std::vector<std::uint8_t>&, const std::vector<std::uint8_t>&);

DEEPOFDM_OPS_INSTANTIATE(float)
DEEPOFDM_OPS_INSTANTIATE(double)

}  // namespace deepofdm::ops
