#pragma once

#include <string>
#include <vector>

#include "deepofdm/ofdm_grid.hpp"

namespace deepofdm {

struct TimeDomainFrame {
  int n_s = 0;
  int n_cp = 0;
  int n_t = 0;
  double delta_f = 15e3;
  CVec samples;

  int symbol_length() const { return n_s + n_cp; }
  std::size_t expected_length() const { return static_cast<std::size_t>(n_t) * (n_s + n_cp); }
  double sample_period() const { return 1.0 / (n_s * delta_f); }
};

/// Unitary DFT of length n, in place. `inverse` uses the +j kernel.
void unitary_dft(cplx* data, int n, bool inverse);

TimeDomainFrame ofdm_modulate(const ResourceGrid& grid, int n_cp, double delta_f = 15e3);
ResourceGrid ofdm_demodulate(const TimeDomainFrame& frame);

/// max |x|^2 / mean |x|^2 over the frame (linear).
double papr(const TimeDomainFrame& frame);
double papr(const CVec& samples);

/// Smooth maximum used in training: log(mean exp(T p)) / T with p the
/// instantaneous power over the mean power and temperature T.
double smooth_papr(const CVec& samples, double temperature = 10.0);

/// Value exceeded with the given probability (empirical CCDF inverse).
double ccdf_level(std::vector<double> values, double probability);

/// Interleaved little-endian float32 (Re, Im) pairs.
void export_iq(const TimeDomainFrame& frame, const std::string& path);

}  // namespace deepofdm
