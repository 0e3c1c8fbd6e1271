#include <doctest.h>

#include <cmath>

#include "deepofdm/neural_mod.hpp"
#include "deepofdm/neural_rx.hpp"

using namespace deepofdm;

namespace {

ResourceGrid random_grid(int n_s, int n_t, Rng& rng) {
  ResourceGrid g(n_s, n_t);
  for (auto& v : g.data) v = complex_gaussian(rng, 1.0);
  return g;
}

ResourceGrid random_qam_grid(const Constellation& c, const PilotPattern& p, Rng& rng) {
  Bits bits(static_cast<std::size_t>(p.data_count()) * c.m);
  for (auto& b : bits) b = random_bit(rng);
  return map_bits_to_grid(bits, c, p);
}

// Turns the modulator into an identity map: every plain conv passes the first
// two channels through and every residual branch is zeroed.
template <typename T>
void make_identity(tk::Network<T>& net) {
  for (auto& [name, t] : net.state()) {
    const bool kernel = name.size() > 7 && name.compare(name.size() - 7, 7, ".kernel") == 0;
    const bool pointwise = name.find(".pointwise") != std::string::npos;
    const bool bias = name.find(".bias") != std::string::npos;
    if (kernel) {
      std::fill(t->data.begin(), t->data.end(), T(0));
      for (int c = 0; c < 2; ++c) (*t)(t->shape.n / 2, t->shape.h / 2, c, c) = T(1);
    } else if (pointwise || bias) {
      std::fill(t->data.begin(), t->data.end(), T(0));
    }
  }
}

}  // namespace

TEST_CASE("modulator and receiver complexity counts match the built networks") {
  Rng rng(3);
  for (int w : {8, 24, 48}) {
    ModulatorConfig mc{w, false};
    auto net = build_modulator<double>(mc, rng);
    CHECK(count_modulator(mc).params == static_cast<long long>(net.parameter_count()));
    mc.linear = true;
    CHECK(count_modulator(mc).params == count_modulator({w, false}).params);
    CHECK(count_modulator(mc).macs == count_modulator({w, false}).macs);
  }
  for (auto in : {RxInput::none, RxInput::pilots, RxInput::pilots_csi}) {
    ReceiverConfig rc{16, 4, in};
    auto net = build_receiver<double>(rc, rng);
    CHECK(count_receiver(rc).params == static_cast<long long>(net.parameter_count()));
  }
  // 1x1 conv with 2 inputs and 24 outputs plus bias has 72 parameters.
  tk::Network<double> single;
  single.add("c", tk::make_conv2d<double>({2, 24, 1, 1, 1, 1}, "c", rng));
  CHECK(single.parameter_count() == 72);
}

TEST_CASE("default modulator is roughly a tenth of the receiver") {
  const double ratio = static_cast<double>(count_modulator({}).params) / count_receiver({}).params;
  CHECK(ratio > 0.08);
  CHECK(ratio < 0.12);
}

TEST_CASE("mode parsing") {
  for (auto m : {ModulationMode::qam, ModulationMode::gs, ModulationMode::deepofdm, ModulationMode::deepofdm_linear,
                 ModulationMode::deepofdm_gs, ModulationMode::sip})
    CHECK(parse_modulation_mode(to_string(m)) == m);
  CHECK_THROWS_AS(parse_modulation_mode("psk"), ConfigError);
  for (auto r : {RxInput::none, RxInput::pilots, RxInput::pilots_csi}) CHECK(parse_rx_input(to_string(r)) == r);
  CHECK_THROWS_AS(parse_rx_input("mask"), ConfigError);
  CHECK(uses_modulator(ModulationMode::deepofdm_linear));
  CHECK_FALSE(uses_modulator(ModulationMode::deepofdm_gs));
  CHECK_FALSE(trains_constellation(ModulationMode::qam));
}

TEST_CASE("neural modulation keeps shape, pilots and unit power") {
  Rng rng(5);
  auto net = build_modulator<float>({16, false}, rng);
  const auto c = make_qam(4);
  for (auto [ns, nt] : {std::pair{24, 14}, std::pair{37, 12}}) {
    for (auto pc : {PilotConfig::p2, PilotConfig::p1, PilotConfig::p0}) {
      const auto p = make_pilot_pattern(pc, ns, nt);
      const auto x = random_qam_grid(c, p, rng);
      const auto y = neural_modulate(x, net, p);
      CHECK(y.n_s == ns);
      CHECK(y.n_t == nt);
      CHECK(std::abs(y.mean_power() - 1.0) < 1e-6);
      for (int idx : p.pilot_indices) CHECK(y.data[idx] == p.values[idx]);
    }
  }
  const auto p = make_pilot_pattern(PilotConfig::p2, 24, 14);
  CHECK_THROWS_AS(neural_modulate(random_grid(20, 14, rng), net, p), ConfigError);
}

TEST_CASE("translation equivariance away from the grid edges") {
  Rng rng(8);
  auto net = build_modulator<double>({8, false}, rng);
  const int ns = 48, nt = 14, radius = 9;
  const auto a = random_grid(ns, nt, rng);
  ResourceGrid b(ns, nt);
  for (int k = 0; k < ns; ++k)
    for (int t = 0; t < nt; ++t) b.at(k, t) = a.at((k + ns - 1) % ns, t);
  tk::NoGradGuard guard;
  const auto ya = net.forward(tk::Var<double>::constant(grids_to_tensor<double>({a})), false).value();
  const auto yb = net.forward(tk::Var<double>::constant(grids_to_tensor<double>({b})), false).value();
  double worst = 0.0;
  for (int k = radius + 1; k < ns - radius - 1; ++k)
    for (int t = 0; t < nt; ++t)
      for (int ch = 0; ch < 2; ++ch) worst = std::max(worst, std::abs(yb(0, k, t, ch) - ya(0, k - 1, t, ch)));
  CHECK(worst < 1e-12);
}

TEST_CASE("linear modulator satisfies superposition in inference mode") {
  Rng rng(9);
  auto net = build_modulator<double>({8, true}, rng);
  for (auto& [name, t] : net.state()) {
    if (name.find("running_var") != std::string::npos) {
      for (auto& v : t->data) v = uniform(rng, 0.5, 2.0);
    } else if (name.find("running_mean") != std::string::npos || name.find(".bias") != std::string::npos ||
               name.find(".beta") != std::string::npos) {
      for (auto& v : t->data) v = uniform(rng, -0.5, 0.5);
    }
  }
  const int ns = 16, nt = 14;
  const auto a = random_grid(ns, nt, rng), b = random_grid(ns, nt, rng);
  ResourceGrid s(ns, nt), z(ns, nt);
  for (std::size_t i = 0; i < s.size(); ++i) s.data[i] = a.data[i] + b.data[i];
  tk::NoGradGuard guard;
  auto run = [&](const ResourceGrid& g) {
    return net.forward(tk::Var<double>::constant(grids_to_tensor<double>({g})), false).value();
  };
  const auto fa = run(a), fb = run(b), fs = run(s), f0 = run(z);
  double worst = 0.0;
  for (std::size_t i = 0; i < fs.data.size(); ++i)
    worst = std::max(worst, std::abs((fs.data[i] - f0.data[i]) - (fa.data[i] - f0.data[i]) - (fb.data[i] - f0.data[i])));
  CHECK(worst < 1e-6);
}

TEST_CASE("superimposed pilots") {
  Rng rng(11);
  const auto d = random_grid(8, 14, rng), p = random_grid(8, 14, rng);
  CHECK(sip_modulate(d, p, 0.0).data == d.data);
  const auto all = sip_modulate(d, p, 1.0);
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(std::abs(all.data[i] - p.data[i]) < 1e-15);
  CHECK_THROWS_AS(sip_modulate(d, p, 1.5), ConfigError);
  CHECK_THROWS_AS(sip_modulate(d, p, -0.1), ConfigError);

  double power = 0.0;
  const int trials = 400;
  for (int i = 0; i < trials; ++i) {
    const auto dd = random_grid(16, 14, rng), pp = random_grid(16, 14, rng);
    power += sip_modulate(dd, pp, 0.3).mean_power();
  }
  CHECK(std::abs(power / trials - 1.0) < 0.02);
}

TEST_CASE("identity modulator collapses to its input constellation") {
  Rng rng(12);
  auto net = build_modulator<float>({8, false}, rng);
  make_identity(net);
  const auto c = make_qam(4);
  const auto p = make_pilot_pattern(PilotConfig::p0, 16, 14);
  const auto gs = collapse_to_gs(net, c, p, 16, 77);
  REQUIRE(gs.size() == c.size());
  cplx mean = 0.0;
  double power = 0.0;
  for (int i = 0; i < c.size(); ++i) {
    CHECK(std::abs(gs.points[i] - c.points[i]) < 1e-6);
    mean += gs.points[i];
    power += std::norm(gs.points[i]);
  }
  CHECK(std::abs(mean) < 1e-9);
  CHECK(std::abs(power / c.size() - 1.0) < 1e-9);
  CHECK_FALSE(gs.trainable);
}

TEST_CASE("receiver output shape and input layouts") {
  Rng rng(13);
  ReceiverConfig cfg{8, 2, RxInput::pilots};
  auto net = build_receiver<float>(cfg, rng);
  for (int ns : {64, 80}) {
    for (auto pc : {PilotConfig::p1, PilotConfig::p0}) {
      const auto p = make_pilot_pattern(pc, ns, 14);
      std::vector<ResourceGrid> y{random_grid(ns, 14, rng), random_grid(ns, 14, rng)};
      const auto in = receiver_input<float>(y, p, nullptr, cfg.input);
      CHECK(in.shape.c == 4);
      if (pc == PilotConfig::p0) {
        for (int k = 0; k < ns; ++k)
          for (int t = 0; t < 14; ++t) CHECK(in(0, k, t, 2) == 0.0f);
      }
      const auto llr = neural_receive(y, p, nullptr, net, cfg);
      REQUIRE(llr.size() == 2);
      CHECK(llr[0].n_s == ns);
      CHECK(llr[0].m == 2);
      CHECK(llr[0].values.size() == static_cast<std::size_t>(ns) * 14 * 2);
      for (float v : llr[1].values) CHECK(std::isfinite(v));
      CHECK(data_llrs(llr[0], p).size() == static_cast<std::size_t>(p.data_count()) * 2);
    }
  }
  const auto p = make_pilot_pattern(PilotConfig::p1, 32, 14);
  std::vector<ResourceGrid> y{random_grid(32, 14, rng)};
  CHECK_THROWS_AS(neural_receive(y, p, nullptr, net, {8, 2, RxInput::pilots_csi}), ConfigError);
  CHECK_THROWS_AS(neural_receive(y, p, nullptr, net, {8, 2, RxInput::none}), ConfigError);
  CHECK_THROWS_AS(neural_receive(y, p, nullptr, net, {8, 3, RxInput::pilots}), ConfigError);
}

TEST_CASE("receiver inference is deterministic") {
  Rng rng(14);
  ReceiverConfig cfg{8, 2, RxInput::pilots};
  auto net = build_receiver<float>(cfg, rng);
  const auto p = make_pilot_pattern(PilotConfig::p2, 32, 14);
  std::vector<ResourceGrid> y{random_grid(32, 14, rng)};
  CHECK(neural_receive(y, p, nullptr, net, cfg)[0].values == neural_receive(y, p, nullptr, net, cfg)[0].values);
}
