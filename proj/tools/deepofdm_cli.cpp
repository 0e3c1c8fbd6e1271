#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "deepofdm/harness.hpp"

using namespace deepofdm;

namespace {

enum Exit { ok = 0, internal = 1, usage = 2, config = 3, load = 4, numeric = 5, framing = 6, estimator = 7 };

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw ConfigError("cannot write '" + path + "'");
}

void emit_csv(const SweepResult& r, const std::string& out) {
  const auto csv = sweep_csv(r);
  if (out.empty() || out == "-") {
    std::cout << csv;
  } else {
    write_text(out, csv);
    std::cerr << "wrote " << r.rows.size() << " rows to " << out << "\n";
  }
}

std::string describe(const tk::Network<float>& net) {
  std::string s;
  char buf[160];
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto& layer = net.layers()[i];
    tk::ConvSpec spec;
    if (const auto* c = std::get_if<tk::Conv2D<float>>(&layer)) spec = c->spec;
    if (const auto* r = std::get_if<tk::ResidualBlock<float>>(&layer)) spec = r->sep1.spec;
    std::snprintf(buf, sizeof buf, "  %-12s %-15s %4d -> %-4d kernel %dx%d dilation %dx%d\n", net.names()[i].c_str(),
                  tk::to_string(tk::kind_of(layer)), spec.cin, spec.cout, spec.kh, spec.kw, spec.dh, spec.dw);
    s += buf;
  }
  return s;
}

void print_complexity(const char* what, const Complexity& c) {
  std::printf("%s: %lld trainable parameters, %lld batch-norm state values, %.2f MMAC per grid (%.2f MFLOP)\n", what,
              c.params, c.bn_state, c.macs / 1e6, 2.0 * c.macs / 1e6);
}

int cmd_train(const std::string& config_path, std::string out, int log_every) {
  const auto cfg = load_config(config_path);
  if (out.empty()) out = "weights.json";
  TrainCallbacks cb;
  cb.on_step = [&](const TrainRecord& r) {
    if (log_every > 0 && (r.step % log_every == 0 || r.step + 1 == cfg.train.steps)) {
      std::fprintf(stderr, "step %6d  rate_loss %+.5f  papr %.3f dB  lambda %.4g\n", r.step, r.rate_loss,
                   linear_to_db(r.papr), r.lambda);
    }
  };
  cb.on_checkpoint = [&](const Model& m, const TrainHistory&) {
    save_weights(m, out + ".ckpt");
    std::fprintf(stderr, "checkpoint at step %d -> %s.ckpt\n", m.steps_done, out.c_str());
  };
  const auto result = train_end_to_end(cfg.train, cb);
  if (result.diverged) throw NumericError("training diverged: " + result.message);
  save_weights(result.model, out);
  std::fprintf(stderr, "wrote %s after %d steps\n", out.c_str(), result.model.steps_done);
  return ok;
}

int cmd_sweep(const std::string& config_path, const std::string& weights, const std::string& out) {
  const auto cfg = load_config(config_path);
  std::optional<Model> model;
  if (!weights.empty()) model = load_weights(weights);
  SweepOptions opts;
  opts.model = model ? &*model : nullptr;
  emit_csv(run_sweep(cfg, opts), out);
  return ok;
}

int cmd_ablate(const std::string& mode_name, const std::string& config_path, const std::string& weights,
               const std::string& out) {
  const auto mode = parse_ablation_mode(mode_name);
  const auto cfg = load_config(config_path);
  if (mode == AblationMode::width_split) {
    std::printf("%-9s %5s %5s %12s %12s %12s %12s | %10s %10s %10s %10s\n", "split", "tx_w", "rx_w", "tx_params",
                "rx_params", "tx_mflops", "rx_mflops", "ref_tx_k", "ref_rx_k", "ref_tx_mf", "ref_rx_mf");
    for (const auto& r : width_split_table(cfg.train.m, cfg.train.grid.n_s, cfg.train.grid.n_t)) {
      std::printf("%-9s %5d %5d %12lld %12lld %12.2f %12.2f | %10.2f %10.2f %10.2f %10.2f\n", r.name.c_str(),
                  r.tx_width, r.rx_width, r.tx.params, r.rx.params, 2.0 * r.tx.macs / 1e6, 2.0 * r.rx.macs / 1e6,
                  r.ref_tx_params_k, r.ref_rx_params_k, r.ref_tx_mflops, r.ref_rx_mflops);
    }
    if (weights.empty()) return ok;
  }
  std::optional<Model> model;
  if (!weights.empty()) model = load_weights(weights);
  emit_csv(run_ablation(mode, cfg, model ? &*model : nullptr), out);
  return ok;
}

int cmd_symmetry(const std::string& weights, int frames, std::uint64_t seed) {
  const auto model = load_weights(weights);
  const auto r = analyze_symmetry(model, frames, seed);
  std::printf("mode %s\n", to_string(model.config.mode).c_str());
  std::printf("output cloud symmetry %.6g\n", r.metric);
  std::printf("noise floor %.6g\n", r.noise_floor);
  std::printf("ratio %.3f\n", r.noise_floor > 0 ? r.metric / r.noise_floor : 0.0);
  std::printf("constellation symmetry %.6g\n", r.constellation_metric);
  return ok;
}

int cmd_info(const std::string& weights) {
  const auto model = load_weights(weights);
  const auto& c = model.config;
  std::printf("mode %s, m = %d, grid %dx%d %s, steps %d\n", to_string(c.mode).c_str(), c.m, c.grid.n_s, c.grid.n_t,
              to_string(c.grid.pilots).c_str(), model.steps_done);
  if (model.modulator.size() > 0) {
    std::printf("modulator (width %d%s)\n%s", c.modulator.width, c.modulator.linear ? ", linear" : "",
                describe(model.modulator).c_str());
    print_complexity("modulator", count_modulator(c.modulator, c.grid.n_s, c.grid.n_t));
  }
  std::printf("receiver (width %d, input %s)\n%s", c.receiver.width, to_string(c.receiver.input).c_str(),
              describe(model.receiver).c_str());
  print_complexity("receiver", count_receiver(c.receiver, c.grid.n_s, c.grid.n_t));
  std::printf("constellation:");
  for (const auto& p : model.constellation.points) std::printf(" (%.4f,%.4f)", p.real(), p.imag());
  std::printf("\n");
  if (c.mode == ModulationMode::sip) {
    const auto f = sip_fractions(model);
    double mean = 0.0;
    for (double v : f) mean += v;
    std::printf("superimposed pilot fraction: mean %.4f over %zu REs\n", f.empty() ? 0.0 : mean / f.size(), f.size());
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"DeepOFDM link-level simulator"};
  app.require_subcommand(1);

  std::string config_path, weights, out, mode;
  int log_every = 100, frames = 4;
  std::uint64_t seed = 1;

  auto* train = app.add_subcommand("train", "Train a transmitter/receiver pair");
  train->add_option("config", config_path, "JSON config")->required();
  train->add_option("--out", out, "Weights file (default weights.json)");
  train->add_option("--log-every", log_every, "Progress line interval in steps (0 for none)");

  auto* sweep = app.add_subcommand("sweep", "BLER/BER/goodput sweep to CSV");
  sweep->add_option("config", config_path, "JSON config")->required();
  sweep->add_option("--weights", weights, "Trained weights (required for neural modes)");
  sweep->add_option("--out", out, "CSV path (default stdout)");

  auto* ablate = app.add_subcommand("ablate", "Run an ablation study");
  ablate->add_option("mode", mode,
                     "single-symbol, restricted-8, gs-collapse, linear, width-split, sip or csi-oracle")
      ->required();
  ablate->add_option("config", config_path, "JSON config")->required();
  ablate->add_option("--weights", weights, "Trained weights");
  ablate->add_option("--out", out, "CSV path (default stdout)");

  auto* symmetry = app.add_subcommand("symmetry", "Rotational symmetry of the transmitted point cloud");
  symmetry->add_option("--weights", weights, "Trained weights")->required();
  symmetry->add_option("--frames", frames, "Frames per cloud");
  symmetry->add_option("--seed", seed, "Seed");

  auto* info = app.add_subcommand("info", "Architecture and complexity of saved weights");
  info->add_option("--weights", weights, "Trained weights")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : usage;
  }

  try {
    if (*train) return cmd_train(config_path, out, log_every);
    if (*sweep) return cmd_sweep(config_path, weights, out);
    if (*ablate) return cmd_ablate(mode, config_path, weights, out);
    if (*symmetry) return cmd_symmetry(weights, frames, seed);
    if (*info) return cmd_info(weights);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return usage;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return config;
  } catch (const LoadError& e) {
    std::cerr << "load error: " << e.what() << "\n";
    return load;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return numeric;
  } catch (const FramingError& e) {
    std::cerr << "framing error: " << e.what() << "\n";
    return framing;
  } catch (const EstimatorError& e) {
    std::cerr << "estimator error: " << e.what() << "\n";
    return estimator;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return internal;
  }
  return usage;
}
