#include "deepofdm/neural_mod.hpp"

#include "arch.hpp"

namespace deepofdm {

namespace detail {

std::vector<ArchLayer> modulator_arch(const ModulatorConfig& cfg) {
  if (cfg.width < 2 || cfg.width % 2 != 0) throw ConfigError("modulator width must be an even number >= 2");
  const int w = cfg.width, half = cfg.width / 2;
  using tk::LayerKind;
  return {
      {LayerKind::conv2d, {2, half, 3, 3, 1, 1}, "input_conv"},
      {LayerKind::residual_block, {half, w, 5, 5, 1, 1}, "block1"},
      {LayerKind::conv2d, {w, w, 1, 1, 1, 1}, "projection"},
      {LayerKind::residual_block, {w, w, 5, 5, 1, 1}, "block2"},
      {LayerKind::conv2d, {w, 2, 1, 1, 1, 1}, "output_conv"},
  };
}

}  // namespace detail

ModulationMode parse_modulation_mode(const std::string& s) {
  if (s == "qam") return ModulationMode::qam;
  if (s == "gs") return ModulationMode::gs;
  if (s == "deepofdm") return ModulationMode::deepofdm;
  if (s == "deepofdm-linear") return ModulationMode::deepofdm_linear;
  if (s == "deepofdm-gs") return ModulationMode::deepofdm_gs;
  if (s == "sip") return ModulationMode::sip;
  throw ConfigError("unknown modulation mode '" + s + "'");
}

std::string to_string(ModulationMode m) {
  switch (m) {
    case ModulationMode::qam: return "qam";
    case ModulationMode::gs: return "gs";
    case ModulationMode::deepofdm: return "deepofdm";
    case ModulationMode::deepofdm_linear: return "deepofdm-linear";
    case ModulationMode::deepofdm_gs: return "deepofdm-gs";
    case ModulationMode::sip: return "sip";
  }
  return "?";
}

bool uses_modulator(ModulationMode m) {
  return m == ModulationMode::deepofdm || m == ModulationMode::deepofdm_linear;
}

bool trains_constellation(ModulationMode m) {
  return m == ModulationMode::gs || m == ModulationMode::deepofdm || m == ModulationMode::deepofdm_linear;
}

template <typename T>
tk::Network<T> build_modulator(const ModulatorConfig& cfg, Rng& rng) {
  return detail::build_network<T>(detail::modulator_arch(cfg), rng, cfg.linear);
}

Complexity count_modulator(const ModulatorConfig& cfg, int n_s, int n_t) {
  return detail::count_network(detail::modulator_arch(cfg), n_s, n_t);
}

template <typename T>
tk::Tensor<T> grids_to_tensor(const std::vector<ResourceGrid>& grids) {
  if (grids.empty()) throw UsageError("grids_to_tensor: empty batch");
  const int ns = grids[0].n_s, nt = grids[0].n_t;
  tk::Tensor<T> t(tk::Shape{static_cast<int>(grids.size()), ns, nt, 2});
  for (std::size_t b = 0; b < grids.size(); ++b) {
    if (grids[b].n_s != ns || grids[b].n_t != nt) throw ConfigError("grids_to_tensor: grids differ in size");
    for (int k = 0; k < ns; ++k)
      for (int s = 0; s < nt; ++s) {
        const cplx v = grids[b].at(k, s);
        t(static_cast<int>(b), k, s, 0) = static_cast<T>(v.real());
        t(static_cast<int>(b), k, s, 1) = static_cast<T>(v.imag());
      }
  }
  return t;
}

template <typename T>
ResourceGrid tensor_to_grid(const tk::Tensor<T>& t, int batch_index, int channel_offset) {
  ResourceGrid g(t.shape.h, t.shape.w, GridRole::tx_modulated);
  for (int k = 0; k < t.shape.h; ++k)
    for (int s = 0; s < t.shape.w; ++s)
      g.at(k, s) = cplx(t(batch_index, k, s, channel_offset), t(batch_index, k, s, channel_offset + 1));
  return g;
}

void stamp_and_normalize(ResourceGrid& grid, const PilotPattern& pattern) {
  double power = 0.0;
  for (int idx : pattern.data_indices) power += std::norm(grid.data[idx]);
  if (pattern.data_count() > 0) {
    if (!(power > 0.0)) throw NumericError("modulator produced an all-zero data grid");
    const double s = std::sqrt(pattern.data_count() / power);
    for (int idx : pattern.data_indices) grid.data[idx] *= s;
  }
  for (int idx : pattern.pilot_indices) grid.data[idx] = pattern.values[idx];
}

std::vector<ResourceGrid> neural_modulate(const std::vector<ResourceGrid>& x, tk::Network<float>& net,
                                          const PilotPattern& pattern) {
  for (const auto& g : x) {
    if (g.n_s != pattern.n_s || g.n_t != pattern.n_t) throw ConfigError("neural_modulate: grid and pattern differ");
  }
  tk::NoGradGuard guard;
  const auto out = net.forward(tk::Var<float>::constant(grids_to_tensor<float>(x)), false);
  if (out.shape().c != 2) throw ConfigError("neural_modulate: network must output 2 channels");
  std::vector<ResourceGrid> res;
  res.reserve(x.size());
  for (std::size_t b = 0; b < x.size(); ++b) {
    res.push_back(tensor_to_grid(out.value(), static_cast<int>(b)));
    stamp_and_normalize(res.back(), pattern);
  }
  return res;
}

ResourceGrid neural_modulate(const ResourceGrid& x, tk::Network<float>& net, const PilotPattern& pattern) {
  return neural_modulate(std::vector<ResourceGrid>{x}, net, pattern)[0];
}

ResourceGrid sip_modulate(const ResourceGrid& data, const ResourceGrid& pilots, const std::vector<double>& a) {
  if (data.size() != pilots.size() || a.size() != data.size()) throw ConfigError("sip_modulate: size mismatch");
  ResourceGrid out(data.n_s, data.n_t, GridRole::tx_modulated);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!(a[i] >= 0.0 && a[i] <= 1.0)) throw ConfigError("sip_modulate: pilot fraction outside [0, 1]");
    out.data[i] = std::sqrt(1.0 - a[i]) * data.data[i] + std::sqrt(a[i]) * pilots.data[i];
  }
  return out;
}

ResourceGrid sip_modulate(const ResourceGrid& data, const ResourceGrid& pilots, double a) {
  return sip_modulate(data, pilots, std::vector<double>(data.size(), a));
}

Constellation collapse_to_gs(tk::Network<float>& net, const Constellation& c, const PilotPattern& pattern, int grids,
                             std::uint64_t seed) {
  Rng rng(seed);
  CVec sum(static_cast<std::size_t>(c.size()));
  std::vector<long> count(static_cast<std::size_t>(c.size()), 0);
  const int batch = 8;
  for (int done = 0; done < grids; done += batch) {
    const int n = std::min(batch, grids - done);
    std::vector<ResourceGrid> x;
    std::vector<std::vector<int>> labels(static_cast<std::size_t>(n));
    for (int b = 0; b < n; ++b) {
      ResourceGrid g(pattern.n_s, pattern.n_t);
      g.data = pattern.values;
      for (int idx : pattern.data_indices) {
        const int label = static_cast<int>(rng() % static_cast<std::uint64_t>(c.size()));
        labels[b].push_back(label);
        g.data[idx] = c.points[label];
      }
      x.push_back(std::move(g));
    }
    tk::NoGradGuard guard;
    const auto out = net.forward(tk::Var<float>::constant(grids_to_tensor<float>(x)), false).value();
    for (int b = 0; b < n; ++b) {
      const auto g = tensor_to_grid(out, b);
      for (int i = 0; i < pattern.data_count(); ++i) {
        sum[labels[b][i]] += g.data[pattern.data_indices[i]];
        ++count[labels[b][i]];
      }
    }
  }
  CVec centroids(sum.size());
  for (std::size_t i = 0; i < sum.size(); ++i) {
    if (count[i] == 0) throw NumericError("collapse_to_gs: a constellation point was never sampled");
    centroids[i] = sum[i] / static_cast<double>(count[i]);
  }
  auto out = normalize_constellation(centroids, c.m);
  out.trainable = false;
  return out;
}

template tk::Network<float> build_modulator<float>(const ModulatorConfig&, Rng&);
template tk::Network<double> build_modulator<double>(const ModulatorConfig&, Rng&);
template tk::Tensor<float> grids_to_tensor<float>(const std::vector<ResourceGrid>&);
template tk::Tensor<double> grids_to_tensor<double>(const std::vector<ResourceGrid>&);
template ResourceGrid tensor_to_grid<float>(const tk::Tensor<float>&, int, int);
template ResourceGrid tensor_to_grid<double>(const tk::Tensor<double>&, int, int);

}  // namespace deepofdm
