#pragma once

#include <string>
#include <vector>

#include "deepofdm/neural_mod.hpp"

namespace deepofdm {

enum class RxInput { none, pilots, pilots_csi };

RxInput parse_rx_input(const std::string& s);
std::string to_string(RxInput r);
int input_channels(RxInput r);

struct ReceiverConfig {
  int width = 128;  // residual width; the input convolution uses width / 2
  int m = 6;
  RxInput input = RxInput::pilots;
};

template <typename T>
tk::Network<T> build_receiver(const ReceiverConfig& cfg, Rng& rng);

Complexity count_receiver(const ReceiverConfig& cfg, int n_s = 128, int n_t = 14);

/// Concatenates [Re Y, Im Y, Re P, Im P, Re H, Im H] as the layout requires.
template <typename T>
tk::Tensor<T> receiver_input(const std::vector<ResourceGrid>& y, const PilotPattern& pattern,
                             const std::vector<ResourceGrid>* csi, RxInput layout);

struct LlrGrid {
  int n_s = 0, n_t = 0, m = 0;
  std::vector<float> values;  // ((k + t n_s) m + j)

  float at(int k, int t, int j) const {
    return values[(static_cast<std::size_t>(k) + static_cast<std::size_t>(t) * n_s) * m + j];
  }
};

std::vector<LlrGrid> neural_receive(const std::vector<ResourceGrid>& y, const PilotPattern& pattern,
                                    const std::vector<ResourceGrid>* csi, tk::Network<float>& net,
                                    const ReceiverConfig& cfg);

/// LLRs of data REs in mapping order (i * m + j).
std::vector<double> data_llrs(const LlrGrid& llr, const PilotPattern& pattern);

}  // namespace deepofdm
