#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "deepofdm/classical_rx.hpp"
#include "deepofdm/trainer.hpp"

namespace deepofdm {

enum class ReceiverKind { ls, lmmse, iedd, perfect_csi, neural };

ReceiverKind parse_receiver_kind(const std::string& s);
std::string to_string(ReceiverKind r);

struct CodeConfig {
  int n = 648;
  CodeRate rate = CodeRate::r1_2;
};

struct SweepConfig {
  ReceiverKind receiver = ReceiverKind::neural;
  std::vector<double> snr_db = {0.0, 5.0, 10.0, 15.0};
  std::vector<double> speeds = {40.0};
  int max_frames = 10000;
  int target_block_errors = 100;
  int chunk = 32;  // frames between stopping-rule checks
  int decoder_iters = 20;
  int iedd_outer = 3;
  std::uint64_t seed = 1;
};

/// Everything a run needs. The grid here is the evaluation grid; the
/// training grid lives in the weights when a model is loaded.
struct ExperimentConfig {
  TrainConfig train;
  CodeConfig code;
  SweepConfig sweep;
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);
std::string dump_config(const ExperimentConfig& cfg);

// ------------------------------------------------------------------ weights

constexpr int kWeightsFormatVersion = 1;

void save_weights(const Model& model, const std::string& path);
Model load_weights(const std::string& path);

// ------------------------------------------------------------------ sweeps

struct SweepRow {
  std::string receiver;
  std::string pilot;
  double speed = 0.0;
  double snr_db = 0.0;
  long frames = 0;
  long blocks = 0;
  long block_errors = 0;
  long bits = 0;
  long bit_errors = 0;
  double bler = 0.0;
  double ber = 0.0;
  double rho = 0.0;
  double rate = 0.0;  // information bits per channel use
  double goodput = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::uint64_t seed = 0;
};

double goodput(double rate, double rho, double bler);

/// How the transmitter's data labels are chosen. With an override the coded
/// bits are scrambled onto the forced labels by a sequence the receiver knows.
enum class TxOverride { none, single_symbol, restricted };

struct SweepOptions {
  TxOverride tx = TxOverride::none;
  int restricted_k = 8;
  const Model* model = nullptr;  // required for the neural receiver and learned transmitters
  std::string label;             // receiver column; defaults to the receiver kind
};

SweepResult run_sweep(const ExperimentConfig& cfg, const SweepOptions& opts = {});

/// Exact CSV with a fixed header.
std::string sweep_csv(const SweepResult& result);
inline const char* kSweepCsvHeader = "receiver,pilot,speed_mps,snr_db,frames,block_errors,bler,ber,rho,goodput";

/// SNR where BLER crosses the target, interpolating log10(BLER) linearly
/// between the bracketing points. Empty if the curve never crosses it.
std::optional<double> required_snr(const std::vector<double>& snr_db, const std::vector<double>& bler,
                                   double target);

// ------------------------------------------------------------------ symmetry

/// Mean nearest-neighbour distance from a to b and from b to a, averaged.
double chamfer_distance(const CVec& a, const CVec& b);

/// Chamfer distance between a point set and its rotation by theta.
double symmetry_metric(const CVec& points, double theta = kPi / 2);

/// Transmit-side point cloud of data REs over random frames.
CVec output_cloud(const Model& model, int frames, std::uint64_t seed, int n_s = 0, int n_t = 0);

struct SymmetryReport {
  double metric = 0.0;
  double noise_floor = 0.0;  // Chamfer distance between two independent clouds
  double constellation_metric = 0.0;
};

SymmetryReport analyze_symmetry(const Model& model, int frames, std::uint64_t seed);

// ------------------------------------------------------------------ ablations

enum class AblationMode { single_symbol, restricted_8, gs_collapse, linear, width_split, sip, csi_oracle };

AblationMode parse_ablation_mode(const std::string& s);
std::string to_string(AblationMode m);

/// Transmitter and receiver complexity at a width pair, beside the published
/// reference numbers for that pair.
struct WidthSplitRow {
  std::string name;
  int tx_width = 0;
  int rx_width = 0;
  Complexity tx;
  Complexity rx;
  double ref_tx_params_k = 0.0;
  double ref_rx_params_k = 0.0;
  double ref_tx_mflops = 0.0;
  double ref_rx_mflops = 0.0;
};

std::vector<WidthSplitRow> width_split_table(int m = 6, int n_s = 128, int n_t = 14);

/// Dispatches the pipeline change for the mode and runs the sweep.
SweepResult run_ablation(AblationMode mode, const ExperimentConfig& cfg, const Model* model);

}  // namespace deepofdm
