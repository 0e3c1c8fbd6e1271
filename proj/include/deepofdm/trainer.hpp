#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "deepofdm/channel.hpp"
#include "deepofdm/neural_mod.hpp"
#include "deepofdm/neural_rx.hpp"

namespace deepofdm {

struct GridConfig {
  int n_s = 128;
  int n_t = 14;
  PilotConfig pilots = PilotConfig::p2;
};

struct ChannelConfig {
  std::string profile = "TDL-A";
  double delay_spread = 100e-9;
  double carrier = 2e9;
  double delta_f = 15e3;
  int n_cp = 6;
  int sinusoids = 32;

  double sample_period(int n_s) const { return 1.0 / (n_s * delta_f); }
};

TdlProfile make_profile(const ChannelConfig& cfg, int n_s);

struct TrainConfig {
  GridConfig grid;
  ChannelConfig channel;
  int m = 6;
  ModulationMode mode = ModulationMode::deepofdm;
  ModulatorConfig modulator;
  ReceiverConfig receiver;
  int batch = 128;
  double learning_rate = 1e-3;
  double speed_min = 0.0;
  double speed_max = 100.0;
  double snr_min_db = 0.0;
  double snr_max_db = 16.0;
  int steps = 1000;
  double lambda_max = 0.01;
  double lambda_start = 0.6;  // fraction of steps before the PAPR weight ramps up
  double papr_temperature = 10.0;
  double sip_fraction = 0.1;  // initial pilot energy fraction for the SIP baseline
  int gs_finetune_steps = -1; // receiver steps after the centroid collapse; -1 means steps / 4
  int gs_collapse_grids = 256;
  int checkpoint_every = 0;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Zero before lambda_start * steps, then linear up to lambda_max at the last step.
double papr_weight(int step, int steps, double lambda_max, double start_fraction);

/// Trained transmitter and receiver. Networks are empty when the mode does not use them.
struct Model {
  TrainConfig config;
  Constellation constellation;
  tk::Network<float> modulator;
  tk::Network<float> receiver;
  std::vector<float> sip_logits;  // per RE, storage order k + t n_s
  int steps_done = 0;
};

Model init_model(const TrainConfig& cfg);

/// Dense QPSK reference used by the superimposed-pilot transmitter.
ResourceGrid sip_pilot_grid(int n_s, int n_t);

/// Pilot pattern the model transmits on a grid of the given size.
PilotPattern model_pattern(const Model& model, int n_s, int n_t);

/// Per-RE pilot energy fractions of a SIP model.
std::vector<double> sip_fractions(const Model& model);

/// Maps bits, applies the modulator or pilot superposition, and returns unit-power grids.
/// The last `zero_res` data REs carry a zero symbol (padding after the last code block).
std::vector<ResourceGrid> transmit(const Model& model, const std::vector<Bits>& bits, const PilotPattern& pattern,
                                   int zero_res = 0);

/// Per-data-RE LLRs, frame by frame.
std::vector<std::vector<double>> receive(const Model& model, const std::vector<ResourceGrid>& y,
                                         const PilotPattern& pattern, const std::vector<ResourceGrid>* csi);

struct TrainRecord {
  int step = 0;
  double rate_loss = 0.0;
  double papr = 0.0;  // smoothed, linear
  double lambda = 0.0;
  double total = 0.0;
  double mean_speed = 0.0;
  double mean_snr_db = 0.0;
};

struct TrainHistory {
  std::vector<TrainRecord> records;
};

struct TrainResult {
  Model model;
  TrainHistory history;
  bool diverged = false;
  std::string message;
};

struct TrainCallbacks {
  std::function<void(const TrainRecord&)> on_step;
  std::function<void(const Model&, const TrainHistory&)> on_checkpoint;
};

TrainResult train_end_to_end(const TrainConfig& cfg, const TrainCallbacks& callbacks = {});

/// Continues training an existing model for `steps` further steps.
TrainResult train_more(const Model& model, int steps, const TrainCallbacks& callbacks = {});

/// Deep copy; networks otherwise share parameter storage when copied.
Model clone(const Model& model);

/// Runs one forward/backward pass without updating and returns the gradient
/// L2 norm of every trainable tensor by name.
std::map<std::string, double> probe_gradients(Model& model, int step);

}  // namespace deepofdm
