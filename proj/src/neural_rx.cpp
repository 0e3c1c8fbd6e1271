#include "deepofdm/neural_rx.hpp"

#include "arch.hpp"

namespace deepofdm {

namespace {

std::vector<detail::ArchLayer> receiver_arch(const ReceiverConfig& cfg) {
  if (cfg.width < 2 || cfg.width % 2 != 0) throw ConfigError("receiver width must be an even number >= 2");
  if (cfg.m < 1) throw ConfigError("receiver needs at least one bit per symbol");
  const int w = cfg.width, half = cfg.width / 2;
  using tk::LayerKind;
  // Kernel and dilation pairs are (frequency, time).
  return {
      {LayerKind::conv2d, {input_channels(cfg.input), half, 3, 3, 1, 1}, "input_conv"},
      {LayerKind::residual_block, {half, w, 7, 5, 7, 2}, "block1"},
      {LayerKind::residual_block, {w, w, 7, 5, 7, 1}, "block2"},
      {LayerKind::residual_block, {w, w, 5, 3, 1, 2}, "block3"},
      {LayerKind::residual_block, {w, w, 5, 3, 1, 2}, "block4"},
      {LayerKind::residual_block, {w, w, 3, 3, 1, 1}, "block5"},
      {LayerKind::conv2d, {w, cfg.m, 1, 1, 1, 1}, "output_conv"},
  };
}

}  // namespace

RxInput parse_rx_input(const std::string& s) {
  if (s == "none") return RxInput::none;
  if (s == "pilots") return RxInput::pilots;
  if (s == "pilots+csi") return RxInput::pilots_csi;
  throw ConfigError("unknown receiver input layout '" + s + "' (expected none, pilots or pilots+csi)");
}

std::string to_string(RxInput r) {
  switch (r) {
    case RxInput::none: return "none";
    case RxInput::pilots: return "pilots";
    case RxInput::pilots_csi: return "pilots+csi";
  }
  return "?";
}

int input_channels(RxInput r) {
  switch (r) {
    case RxInput::none: return 2;
    case RxInput::pilots: return 4;
    case RxInput::pilots_csi: return 6;
  }
  return 0;
}

template <typename T>
tk::Network<T> build_receiver(const ReceiverConfig& cfg, Rng& rng) {
  return detail::build_network<T>(receiver_arch(cfg), rng, false);
}

Complexity count_receiver(const ReceiverConfig& cfg, int n_s, int n_t) {
  return detail::count_network(receiver_arch(cfg), n_s, n_t);
}

template <typename T>
tk::Tensor<T> receiver_input(const std::vector<ResourceGrid>& y, const PilotPattern& pattern,
                             const std::vector<ResourceGrid>* csi, RxInput layout) {
  if (y.empty()) throw UsageError("receiver_input: empty batch");
  const int ns = pattern.n_s, nt = pattern.n_t, ch = input_channels(layout);
  if (layout == RxInput::pilots_csi && (!csi || csi->size() != y.size())) {
    throw ConfigError("receiver input layout pilots+csi needs one CSI grid per frame");
  }
  tk::Tensor<T> t(tk::Shape{static_cast<int>(y.size()), ns, nt, ch});
  for (std::size_t b = 0; b < y.size(); ++b) {
    if (y[b].n_s != ns || y[b].n_t != nt) throw ConfigError("receiver input: grid and pilot pattern differ in size");
    const int bi = static_cast<int>(b);
    for (int k = 0; k < ns; ++k)
      for (int s = 0; s < nt; ++s) {
        const cplx v = y[b].at(k, s);
        t(bi, k, s, 0) = static_cast<T>(v.real());
        t(bi, k, s, 1) = static_cast<T>(v.imag());
        if (ch >= 4) {
          const cplx p = pattern.values[static_cast<std::size_t>(k) + static_cast<std::size_t>(s) * ns];
          t(bi, k, s, 2) = static_cast<T>(p.real());
          t(bi, k, s, 3) = static_cast<T>(p.imag());
        }
        if (ch >= 6) {
          const cplx h = (*csi)[b].at(k, s);
          t(bi, k, s, 4) = static_cast<T>(h.real());
          t(bi, k, s, 5) = static_cast<T>(h.imag());
        }
      }
  }
  return t;
}

std::vector<LlrGrid> neural_receive(const std::vector<ResourceGrid>& y, const PilotPattern& pattern,
                                    const std::vector<ResourceGrid>* csi, tk::Network<float>& net,
                                    const ReceiverConfig& cfg) {
  tk::NoGradGuard guard;
  const auto out = net.forward(tk::Var<float>::constant(receiver_input<float>(y, pattern, csi, cfg.input)), false);
  if (out.shape().c != cfg.m) throw ConfigError("receiver output has the wrong number of channels");
  std::vector<LlrGrid> res(y.size());
  const auto& v = out.value();
  for (std::size_t b = 0; b < y.size(); ++b) {
    auto& g = res[b];
    g.n_s = pattern.n_s;
    g.n_t = pattern.n_t;
    g.m = cfg.m;
    g.values.resize(static_cast<std::size_t>(g.n_s) * g.n_t * g.m);
    for (int k = 0; k < g.n_s; ++k)
      for (int s = 0; s < g.n_t; ++s)
        for (int j = 0; j < g.m; ++j)
          g.values[(static_cast<std::size_t>(k) + static_cast<std::size_t>(s) * g.n_s) * g.m + j] =
              v(static_cast<int>(b), k, s, j);
  }
  return res;
}

std::vector<double> data_llrs(const LlrGrid& llr, const PilotPattern& pattern) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(pattern.data_count()) * llr.m);
  for (int idx : pattern.data_indices)
    for (int j = 0; j < llr.m; ++j) out.push_back(llr.values[static_cast<std::size_t>(idx) * llr.m + j]);
  return out;
}

template tk::Network<float> build_receiver<float>(const ReceiverConfig&, Rng&);
template tk::Network<double> build_receiver<double>(const ReceiverConfig&, Rng&);
template tk::Tensor<float> receiver_input<float>(const std::vector<ResourceGrid>&, const PilotPattern&,
                                                 const std::vector<ResourceGrid>*, RxInput);
template tk::Tensor<double> receiver_input<double>(const std::vector<ResourceGrid>&, const PilotPattern&,
                                                   const std::vector<ResourceGrid>*, RxInput);

}  // namespace deepofdm
