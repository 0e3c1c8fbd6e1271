#pragma once

// Differentiable pieces of the transmit/channel/receive chain used for
// end-to-end training. Complex grids are (B, n_s, n_t, 2) tensors; time-domain
// frames are (B, L, 1, 2) tensors.

#include <vector>

#include "deepofdm/channel.hpp"
#include "deepofdm/ofdm_grid.hpp"
#include "deepofdm/tensorkit/tensor.hpp"

namespace deepofdm::ops {

/// Centres a (1, 1, M, 2) point set and scales it to unit mean power.
template <typename T>
tk::Var<T> normalize_points(const tk::Var<T>& points);

/// Places constellation points on data REs and pilot values on pilot REs.
/// labels holds one label per data RE, frame after frame.
template <typename T>
tk::Var<T> embed(const tk::Var<T>& points, const std::vector<int>& labels, const PilotPattern& pattern, int batch);

/// Per frame: data REs scaled to unit mean power, pilot REs overwritten.
template <typename T>
tk::Var<T> stamp_and_normalize(const tk::Var<T>& grid, const PilotPattern& pattern);

/// sqrt(1 - A) X + sqrt(A) P with A = sigmoid(logits), logits (1, n_s, n_t, 1).
template <typename T>
tk::Var<T> superimpose(const tk::Var<T>& grid, const tk::Var<T>& logits, const ResourceGrid& pilots);

template <typename T>
tk::Var<T> ofdm_modulate(const tk::Var<T>& grid, int n_cp);

template <typename T>
tk::Var<T> ofdm_demodulate(const tk::Var<T>& time, int n_s, int n_cp, int n_t);

/// Batch mean of the log-sum-exp smoothed PAPR (linear scale).
template <typename T>
tk::Var<T> smooth_papr(const tk::Var<T>& time, double temperature);

/// Time-varying multipath per frame plus a fixed noise realization.
template <typename T>
tk::Var<T> channel(const tk::Var<T>& time, const std::vector<ChannelRealization>& ch, const std::vector<CVec>& noise);

/// Mean binary cross-entropy over entries with mask != 0, in bits, minus one.
/// Positive LLR favours bit 1; LLRs are clipped to +-30.
template <typename T>
tk::Var<T> rate_loss(const tk::Var<T>& llr, const std::vector<std::uint8_t>& bits,
                     const std::vector<std::uint8_t>& mask);

/// Plain evaluation of rate_loss for reference checks.
double rate_loss_value(const std::vector<double>& llr, const std::vector<std::uint8_t>& bits);

}  // namespace deepofdm::ops
