#pragma once

#include <string>
#include <vector>

#include "deepofdm/ofdm_grid.hpp"
#include "deepofdm/tensorkit/layers.hpp"

namespace deepofdm {

enum class ModulationMode { qam, gs, deepofdm, deepofdm_linear, deepofdm_gs, sip };

ModulationMode parse_modulation_mode(const std::string& s);
std::string to_string(ModulationMode m);
/// Modes whose transmitter includes the convolutional modulator.
bool uses_modulator(ModulationMode m);
/// Modes that learn the constellation.
bool trains_constellation(ModulationMode m);

struct ModulatorConfig {
  int width = 48;  // residual width; the input convolution uses width / 2
  bool linear = false;
};

template <typename T>
tk::Network<T> build_modulator(const ModulatorConfig& cfg, Rng& rng);

struct Complexity {
  long long params = 0;      // trainable parameters
  long long macs = 0;        // multiply-accumulates per grid
  long long bn_state = 0;    // running statistics (not trainable)
};

Complexity count_modulator(const ModulatorConfig& cfg, int n_s = 128, int n_t = 14);

/// Complex grids to a (B, n_s, n_t, 2) tensor and back.
template <typename T>
tk::Tensor<T> grids_to_tensor(const std::vector<ResourceGrid>& grids);
template <typename T>
ResourceGrid tensor_to_grid(const tk::Tensor<T>& t, int batch_index, int channel_offset = 0);

/// Overwrites pilot REs with the pattern's values and scales data REs to unit
/// mean power, which makes the whole grid unit power with exact pilots.
void stamp_and_normalize(ResourceGrid& grid, const PilotPattern& pattern);

/// Runs the modulator in inference mode, then stamps pilots and normalizes.
std::vector<ResourceGrid> neural_modulate(const std::vector<ResourceGrid>& x, tk::Network<float>& net,
                                          const PilotPattern& pattern);
ResourceGrid neural_modulate(const ResourceGrid& x, tk::Network<float>& net, const PilotPattern& pattern);

/// X = sqrt(1 - A) X~ + sqrt(A) P per RE.
ResourceGrid sip_modulate(const ResourceGrid& data, const ResourceGrid& pilots, const std::vector<double>& a);
ResourceGrid sip_modulate(const ResourceGrid& data, const ResourceGrid& pilots, double a);

/// Average raw modulator output per input point over random context grids,
/// normalized into a fixed constellation.
Constellation collapse_to_gs(tk::Network<float>& net, const Constellation& c, const PilotPattern& pattern,
                             int grids, std::uint64_t seed);

}  // namespace deepofdm
