#include "deepofdm/trainer.hpp"

#include <cmath>

#include "deepofdm/link_ops.hpp"
#include "deepofdm/tensorkit/adam.hpp"

namespace deepofdm {

using tk::Shape;
using tk::Tensor;
using tk::Var;

namespace {

constexpr std::uint64_t kSipPilotSeed = 0x51F0A11CE;

bool has_sip(const Model& m) { return m.config.mode == ModulationMode::sip; }

float logit(double a) { return static_cast<float>(std::log(a / (1.0 - a))); }

// Mutable training state around a model.
struct Session {
  Model& model;
  PilotPattern pattern;
  ResourceGrid sip_pilots;
  TdlProfile profile;
  Var<float> points;      // raw trainable constellation, (1, 1, M, 2)
  Var<float> sip_logits;  // (1, n_s, n_t, 1)
  bool train_points = false;
  bool use_modulator = false;

  explicit Session(Model& m) : model(m) {
    const auto& cfg = m.config;
    pattern = model_pattern(m, cfg.grid.n_s, cfg.grid.n_t);
    if (has_sip(m)) sip_pilots = sip_pilot_grid(cfg.grid.n_s, cfg.grid.n_t);
    profile = make_profile(cfg.channel, cfg.grid.n_s);
    Tensor<float> c(Shape{1, 1, m.constellation.size(), 2});
    for (int i = 0; i < m.constellation.size(); ++i) {
      c.data[2 * i] = static_cast<float>(m.constellation.points[i].real());
      c.data[2 * i + 1] = static_cast<float>(m.constellation.points[i].imag());
    }
    points = Var<float>::parameter(std::move(c), "constellation");
    if (has_sip(m)) {
      Tensor<float> l(Shape{1, cfg.grid.n_s, cfg.grid.n_t, 1});
      for (int k = 0; k < cfg.grid.n_s; ++k)
        for (int t = 0; t < cfg.grid.n_t; ++t) l(0, k, t, 0) = m.sip_logits[k + t * cfg.grid.n_s];
      sip_logits = Var<float>::parameter(std::move(l), "sip_logits");
    }
    train_points = trains_constellation(cfg.mode);
    use_modulator = uses_modulator(cfg.mode);
  }

  std::vector<Var<float>> trainables(bool receiver_only) {
    auto out = model.receiver.parameters();
    if (receiver_only) return out;
    if (use_modulator) {
      auto mp = model.modulator.parameters();
      out.insert(out.end(), mp.begin(), mp.end());
    }
    if (train_points) out.push_back(points);
    if (sip_logits) out.push_back(sip_logits);
    return out;
  }

  // Writes trainables back into the model, renormalizing the constellation.
  void sync() {
    if (train_points) sync_points();
    if (sip_logits) {
      const int n_s = model.config.grid.n_s;
      for (int k = 0; k < n_s; ++k)
        for (int t = 0; t < model.config.grid.n_t; ++t) model.sip_logits[k + t * n_s] = sip_logits.value()(0, k, t, 0);
    }
  }

  void sync_points() {
    CVec pts(static_cast<std::size_t>(model.constellation.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = cplx(points.value().data[2 * i], points.value().data[2 * i + 1]);
    const bool trainable = model.constellation.trainable;
    model.constellation = normalize_constellation(pts, model.config.m);
    model.constellation.trainable = trainable;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      points.value().data[2 * i] = static_cast<float>(model.constellation.points[i].real());
      points.value().data[2 * i + 1] = static_cast<float>(model.constellation.points[i].imag());
    }
  }

  // Forward pass of one batch; returns (rate loss, smoothed PAPR) and fills the record.
  std::pair<Var<float>, Var<float>> forward(int step, std::uint64_t phase, TrainRecord& rec) {
    const auto& cfg = model.config;
    const int batch = cfg.batch, n_s = cfg.grid.n_s, n_t = cfg.grid.n_t, m = cfg.m;
    const int nd = pattern.data_count();
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(step), phase));

    std::vector<int> labels(static_cast<std::size_t>(batch) * nd);
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(batch) * n_s * n_t * m, 0);
    std::vector<std::uint8_t> mask(bits.size(), 0);
    for (int b = 0; b < batch; ++b)
      for (int i = 0; i < nd; ++i) {
        const int idx = pattern.data_indices[i];
        const int k = idx % n_s, t = idx / n_s;
        int label = 0;
        for (int j = 0; j < m; ++j) {
          const std::uint8_t bit = random_bit(rng);
          label = (label << 1) | bit;
          const std::size_t pos = ((static_cast<std::size_t>(b) * n_s + k) * n_t + t) * m + j;
          bits[pos] = bit;
          mask[pos] = 1;
        }
        labels[static_cast<std::size_t>(b) * nd + i] = label;
      }

    Var<float> pts = train_points ? ops::normalize_points(points) : Var<float>::constant(points.value());
    Var<float> x = ops::embed(pts, labels, pattern, batch);
    if (use_modulator) x = ops::stamp_and_normalize(model.modulator.forward(x, true), pattern);
    if (sip_logits) x = ops::superimpose(x, sip_logits, sip_pilots);
    Var<float> time = ops::ofdm_modulate(x, cfg.channel.n_cp);
    Var<float> papr = ops::smooth_papr(time, cfg.papr_temperature);

    const int len = (n_s + cfg.channel.n_cp) * n_t;
    const double ts = cfg.channel.sample_period(n_s);
    std::vector<ChannelRealization> ch;
    std::vector<CVec> noise;
    std::vector<ResourceGrid> csi;
    rec.mean_speed = rec.mean_snr_db = 0.0;
    for (int b = 0; b < batch; ++b) {
      const double speed = uniform(rng, cfg.speed_min, cfg.speed_max);
      const double snr_db = uniform(rng, cfg.snr_min_db, cfg.snr_max_db);
      const double n0 = db_to_linear(-snr_db);
      ch.push_back(generate_tdl(profile, speed, cfg.channel.carrier, ts, len + profile.max_delay(), rng(),
                                cfg.channel.sinusoids));
      CVec w(static_cast<std::size_t>(len));
      for (auto& v : w) v = complex_gaussian(rng, n0);
      noise.push_back(std::move(w));
      if (cfg.receiver.input == RxInput::pilots_csi) csi.push_back(freq_csi(ch.back(), n_s, cfg.channel.n_cp, n_t));
      rec.mean_speed += speed / batch;
      rec.mean_snr_db += snr_db / batch;
    }
    Var<float> y = ops::ofdm_demodulate(ops::channel(time, ch, noise), n_s, cfg.channel.n_cp, n_t);

    Var<float> rx_in = y;
    if (cfg.receiver.input != RxInput::none) {
      // Side channels are constants; reuse the inference layout builder for them.
      std::vector<ResourceGrid> dummy(static_cast<std::size_t>(batch), ResourceGrid(n_s, n_t));
      const auto full = receiver_input<float>(dummy, pattern, csi.empty() ? nullptr : &csi, cfg.receiver.input);
      const int extra = full.shape.c - 2;
      Tensor<float> side(Shape{batch, n_s, n_t, extra});
      for (std::size_t p = 0; p < side.size() / extra; ++p)
        for (int c = 0; c < extra; ++c) side.data[p * extra + c] = full.data[p * full.shape.c + 2 + c];
      rx_in = tk::concat_channels<float>({y, Var<float>::constant(std::move(side))});
    }
    Var<float> llr = model.receiver.forward(rx_in, true);
    return {ops::rate_loss(llr, bits, mask), papr};
  }
};

void run_phase(Session& s, int steps, std::uint64_t phase, bool receiver_only, double lambda_max,
               TrainHistory& history, const TrainCallbacks& cb, TrainResult& result, int step_offset) {
  const auto& cfg = s.model.config;
  tk::Adam<float> adam(s.trainables(receiver_only), cfg.learning_rate);
  for (int step = 0; step < steps; ++step) {
    TrainRecord rec;
    rec.step = step_offset + step;
    rec.lambda = papr_weight(step, steps, lambda_max, cfg.lambda_start);
    adam.zero_grad();
    s.points.zero_grad();
    try {
      auto [rate, papr] = s.forward(rec.step, phase, rec);
      Var<float> total = rec.lambda > 0.0 ? tk::add(rate, tk::scale(papr, static_cast<float>(rec.lambda))) : rate;
      rec.rate_loss = rate.value().data[0];
      rec.papr = papr.value().data[0];
      rec.total = total.value().data[0];
      if (!std::isfinite(rec.total)) throw NumericError("loss is not finite");
      tk::backward(total);
    } catch (const NumericError& e) {
      result.diverged = true;
      result.message = "training diverged at step " + std::to_string(rec.step) + ": " + e.what();
      return;
    }
    adam.step();
    s.sync();
    ++s.model.steps_done;
    history.records.push_back(rec);
    if (cb.on_step) cb.on_step(rec);
    if (cfg.checkpoint_every > 0 && cb.on_checkpoint && (rec.step + 1) % cfg.checkpoint_every == 0) {
      cb.on_checkpoint(s.model, history);
    }
  }
}

tk::Network<float> build_modulator_for(const TrainConfig& cfg, Rng& rng) {
  ModulatorConfig mc = cfg.modulator;
  if (cfg.mode == ModulationMode::deepofdm_linear) mc.linear = true;
  return build_modulator<float>(mc, rng);
}

bool needs_modulator_net(ModulationMode mode) {
  return uses_modulator(mode) || mode == ModulationMode::deepofdm_gs;
}

}  // namespace

TdlProfile make_profile(const ChannelConfig& cfg, int n_s) {
  if (cfg.profile == "flat") return flat_profile();
  auto p = make_tdl_profile(cfg.profile, cfg.delay_spread, cfg.sample_period(n_s));
  if (p.max_delay() > cfg.n_cp) {
    throw ConfigError("channel delay spread of " + std::to_string(p.max_delay()) +
                      " samples exceeds the cyclic prefix");
  }
  return p;
}

void TrainConfig::validate() const {
  if (batch < 1) throw ConfigError("batch size must be at least 1");
  if (steps < 0) throw ConfigError("step count must be non-negative");
  if (speed_min < 0.0 || speed_max < speed_min) throw ConfigError("speed range must satisfy 0 <= min <= max");
  if (snr_max_db < snr_min_db) throw ConfigError("SNR range is empty");
  if (lambda_max < 0.0) throw ConfigError("lambda_max must be non-negative");
  if (lambda_start < 0.0 || lambda_start > 1.0) throw ConfigError("lambda_start must lie in [0, 1]");
  if (m < 1) throw ConfigError("bits per symbol must be positive");
  if (receiver.m != m) throw ConfigError("receiver output width must equal bits per symbol");
  if (mode == ModulationMode::sip && (sip_fraction <= 0.0 || sip_fraction >= 1.0)) {
    throw ConfigError("sip_fraction must lie in (0, 1)");
  }
  if (mode == ModulationMode::sip && grid.pilots != PilotConfig::p0) {
    throw ConfigError("the superimposed-pilot transmitter carries no dedicated pilots; use 0P");
  }
  if ((mode == ModulationMode::qam) && m % 2 != 0 && m != 1) throw ConfigError("square QAM needs even m");
}

double papr_weight(int step, int steps, double lambda_max, double start_fraction) {
  if (steps <= 0 || lambda_max <= 0.0) return 0.0;
  const int start = static_cast<int>(std::floor(start_fraction * steps));
  if (step < start) return 0.0;
  const int last = steps - 1;
  if (last <= start) return lambda_max;
  return lambda_max * static_cast<double>(step - start) / static_cast<double>(last - start);
}

Model init_model(const TrainConfig& cfg) {
  cfg.validate();
  Model model;
  model.config = cfg;
  Rng rng(derive_seed(cfg.seed, 0xA11, 0));
  model.constellation = make_qam(cfg.m);
  model.constellation.trainable = trains_constellation(cfg.mode) || cfg.mode == ModulationMode::deepofdm_gs;
  if (needs_modulator_net(cfg.mode)) model.modulator = build_modulator_for(cfg, rng);
  model.receiver = build_receiver<float>(cfg.receiver, rng);
  if (cfg.mode == ModulationMode::sip) {
    model.sip_logits.assign(static_cast<std::size_t>(cfg.grid.n_s) * cfg.grid.n_t, logit(cfg.sip_fraction));
  }
  return model;
}

Model clone(const Model& model) {
  Model out;
  out.config = model.config;
  out.constellation = model.constellation;
  out.sip_logits = model.sip_logits;
  out.steps_done = model.steps_done;
  Rng rng(0);
  if (!model.modulator.layers().empty()) {
    out.modulator = build_modulator_for(model.config, rng);
    tk::copy_state(model.modulator, out.modulator);
  }
  out.receiver = build_receiver<float>(model.config.receiver, rng);
  tk::copy_state(model.receiver, out.receiver);
  return out;
}

ResourceGrid sip_pilot_grid(int n_s, int n_t) {
  ResourceGrid g(n_s, n_t);
  Rng rng(kSipPilotSeed);
  const double a = 1.0 / std::sqrt(2.0);
  for (auto& v : g.data) {
    const double re = random_bit(rng) ? -a : a;
    const double im = random_bit(rng) ? -a : a;
    v = cplx(re, im);
  }
  return g;
}

PilotPattern model_pattern(const Model& model, int n_s, int n_t) {
  if (!has_sip(model)) return make_pilot_pattern(model.config.grid.pilots, n_s, n_t);
  if (n_s != model.config.grid.n_s || n_t != model.config.grid.n_t) {
    throw ConfigError("superimposed-pilot weights are tied to the training grid size");
  }
  auto p = make_pilot_pattern(PilotConfig::p0, n_s, n_t);
  p.values = sip_pilot_grid(n_s, n_t).data;
  return p;
}

std::vector<double> sip_fractions(const Model& model) {
  std::vector<double> a(model.sip_logits.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = 1.0 / (1.0 + std::exp(-static_cast<double>(model.sip_logits[i])));
  return a;
}

std::vector<ResourceGrid> transmit(const Model& model, const std::vector<Bits>& bits, const PilotPattern& pattern,
                                   int zero_res) {
  if (zero_res < 0 || zero_res > pattern.data_count()) throw ConfigError("padding exceeds the data REs");
  std::vector<ResourceGrid> grids;
  grids.reserve(bits.size());
  for (const auto& b : bits) {
    grids.push_back(map_bits_to_grid(b, model.constellation, pattern));
    for (int i = pattern.data_count() - zero_res; i < pattern.data_count(); ++i) grids.back().data[pattern.data_indices[i]] = 0.0;
  }
  if (uses_modulator(model.config.mode)) {
    auto& net = const_cast<tk::Network<float>&>(model.modulator);
    return neural_modulate(grids, net, pattern);
  }
  if (has_sip(model)) {
    ResourceGrid pilots(pattern.n_s, pattern.n_t);
    pilots.data = pattern.values;
    const auto a = sip_fractions(model);
    for (auto& g : grids) g = sip_modulate(g, pilots, a);
  }
  return grids;
}

std::vector<std::vector<double>> receive(const Model& model, const std::vector<ResourceGrid>& y,
                                         const PilotPattern& pattern, const std::vector<ResourceGrid>* csi) {
  auto& net = const_cast<tk::Network<float>&>(model.receiver);
  const auto llr = neural_receive(y, pattern, csi, net, model.config.receiver);
  std::vector<std::vector<double>> out;
  out.reserve(llr.size());
  for (const auto& l : llr) out.push_back(data_llrs(l, pattern));
  return out;
}

TrainResult train_more(const Model& start, int steps, const TrainCallbacks& callbacks) {
  TrainResult result;
  result.model = clone(start);
  Model& model = result.model;
  const auto& cfg = model.config;
  const int offset = model.steps_done;
  if (cfg.mode == ModulationMode::deepofdm_gs) {
    // Train the full modulator first, then collapse it and adapt the receiver.
    model.config.mode = ModulationMode::deepofdm;
    {
      Session s(model);
      run_phase(s, steps, 0, false, cfg.lambda_max, result.history, callbacks, result, offset);
    }
    model.config.mode = ModulationMode::deepofdm_gs;
    if (result.diverged) return result;
    const auto pattern = model_pattern(model, cfg.grid.n_s, cfg.grid.n_t);
    model.constellation =
        collapse_to_gs(model.modulator, model.constellation, pattern, cfg.gs_collapse_grids, derive_seed(cfg.seed, 0x65, 0));
    const int finetune = cfg.gs_finetune_steps >= 0 ? cfg.gs_finetune_steps : steps / 4;
    Session s(model);
    run_phase(s, finetune, 1, true, 0.0, result.history, callbacks, result, offset + steps);
    return result;
  }
  Session s(model);
  run_phase(s, steps, 0, false, cfg.lambda_max, result.history, callbacks, result, offset);
  return result;
}

TrainResult train_end_to_end(const TrainConfig& cfg, const TrainCallbacks& callbacks) {
  return train_more(init_model(cfg), cfg.steps, callbacks);
}

std::map<std::string, double> probe_gradients(Model& model, int step) {
  Session s(model);
  auto params = s.trainables(false);
  for (auto& p : params) p.zero_grad();
  TrainRecord rec;
  auto [rate, papr] = s.forward(step, 0, rec);
  tk::backward(rate);
  std::map<std::string, double> out;
  for (auto& p : params) {
    double n = 0.0;
    for (float g : p.grad().data) n += static_cast<double>(g) * g;
    out[p.name()] = std::sqrt(n);
  }
  return out;
}

}  // namespace deepofdm
