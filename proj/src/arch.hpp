#pragma once

// Layer tables shared by network builders and complexity counters.

#include <string>
#include <vector>

#include "deepofdm/neural_mod.hpp"

namespace deepofdm::detail {

struct ArchLayer {
  tk::LayerKind kind;
  tk::ConvSpec spec;
  std::string name;
};

template <typename T>
tk::Network<T> build_network(const std::vector<ArchLayer>& arch, Rng& rng, bool linear) {
  tk::Network<T> net;
  for (const auto& l : arch) {
    switch (l.kind) {
      case tk::LayerKind::conv2d: net.add(l.name, tk::make_conv2d<T>(l.spec, l.name, rng)); break;
      case tk::LayerKind::residual_block:
        net.add(l.name, tk::make_residual_block<T>(l.spec, l.name, rng, linear));
        break;
      default: throw ConfigError("unsupported layer in architecture table: " + l.name);
    }
  }
  return net;
}

inline Complexity count_network(const std::vector<ArchLayer>& arch, int n_s, int n_t) {
  const long long hw = static_cast<long long>(n_s) * n_t;
  Complexity c;
  auto conv = [&](const tk::ConvSpec& s) {
    c.params += static_cast<long long>(s.kh) * s.kw * s.cin * s.cout + s.cout;
    c.macs += hw * s.kh * s.kw * s.cin * s.cout;
  };
  auto sep = [&](const tk::ConvSpec& s) {
    c.params += static_cast<long long>(s.kh) * s.kw * s.cin + static_cast<long long>(s.cin) * s.cout + s.cout;
    c.macs += hw * (static_cast<long long>(s.kh) * s.kw * s.cin + static_cast<long long>(s.cin) * s.cout);
  };
  auto bn = [&](int ch) {
    c.params += 2LL * ch;
    c.bn_state += 2LL * ch;
    c.macs += hw * ch;
  };
  for (const auto& l : arch) {
    if (l.kind == tk::LayerKind::conv2d) {
      conv(l.spec);
      continue;
    }
    const auto& s = l.spec;
    bn(s.cin);
    sep(s);
    bn(s.cout);
    tk::ConvSpec second = s;
    second.cin = s.cout;
    sep(second);
    if (s.cin != s.cout) conv(tk::ConvSpec{s.cin, s.cout, 1, 1, 1, 1});
  }
  return c;
}

std::vector<ArchLayer> modulator_arch(const ModulatorConfig& cfg);

}  // namespace deepofdm::detail
