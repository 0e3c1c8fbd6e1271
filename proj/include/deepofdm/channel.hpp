#pragma once

#include <string>
#include <vector>

#include "deepofdm/waveform.hpp"

namespace deepofdm {

/// Tap delays in samples with linear powers summing to one.
struct TdlProfile {
  std::string name;
  std::vector<int> delays;
  std::vector<double> powers;

  int max_delay() const { return delays.empty() ? 0 : delays.back(); }
};

/// Builds a profile from delays (ns) and powers (dB), quantizing each delay
/// to the nearest sample and merging taps that land on the same sample.
TdlProfile profile_from_table(const std::string& name, const std::vector<double>& delays_ns,
                              const std::vector<double>& powers_db, double sample_period);

/// TDL-A and TDL-C tables scaled to an RMS delay spread.
TdlProfile make_tdl_profile(const std::string& name, double delay_spread_s, double sample_period);

/// Single tap of unit power at delay 0.
TdlProfile flat_profile();

struct ChannelRealization {
  TdlProfile profile;
  int length = 0;               // samples
  std::vector<CVec> taps;       // taps[i][b] for profile tap i at sample b
  double speed = 0.0;
  double doppler = 0.0;
  std::uint64_t seed = 0;
};

double doppler_hz(double speed_mps, double carrier_hz);

/// Sum-of-sinusoids Clarke fading: each tap is
/// sqrt(p / M) sum_m exp(j (2 pi f_d cos(a_m) b T_s + phi_m)).
ChannelRealization generate_tdl(const TdlProfile& profile, double speed_mps, double carrier_hz, double sample_period,
                                int length, std::uint64_t seed, int sinusoids = 32);

/// y[b] = sum_l h_l[b] x[b - l] + w[b], w ~ CN(0, n0). Samples before the
/// frame start are zero.
TimeDomainFrame apply_channel(const TimeDomainFrame& frame, const ChannelRealization& ch, double n0,
                              std::uint64_t seed);

/// Adjoint of the noiseless channel with respect to the input samples.
CVec apply_channel_adjoint(const CVec& grad_out, const ChannelRealization& ch);

/// H[k, t] with taps frozen at the midpoint of each symbol's useful part.
ResourceGrid freq_csi(const ChannelRealization& ch, int n_s, int n_cp, int n_t);

/// gamma = 1 - sinc^2(u f_c / (c delta_f)).
double ici_fraction(double speed_mps, double carrier_hz, double delta_f);

struct EffectiveNoise {
  double gamma_ici = 0.0;
  double n0_eff = 0.0;
};
EffectiveNoise effective_noise(double n0, double speed_mps, double carrier_hz, double delta_f);

}  // namespace deepofdm
