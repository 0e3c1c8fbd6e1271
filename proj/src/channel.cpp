#include "deepofdm/channel.hpp"

#include <map>

namespace deepofdm {

namespace {

struct TableRow {
  double delay;  // normalized to the RMS delay spread
  double power_db;
};

const std::vector<TableRow>& tdl_table(const std::string& name) {
  static const std::map<std::string, std::vector<TableRow>> tables = {
      {"TDL-A",
       {{0.0000, -13.4}, {0.3819, 0.0},   {0.4025, -2.2},  {0.5868, -4.0},  {0.4610, -6.0},  {0.5375, -8.2},
        {0.6708, -9.9},  {0.5750, -10.5}, {0.7618, -7.5},  {1.5375, -15.9}, {1.8978, -6.6},  {2.2242, -16.7},
        {2.1718, -12.4}, {2.4942, -15.2}, {2.5119, -10.8}, {3.0582, -11.3}, {4.0810, -12.7}, {4.4579, -16.2},
        {4.5695, -18.3}, {4.7966, -18.9}, {5.0066, -16.6}, {5.3043, -19.9}, {9.6586, -29.7}}},
      {"TDL-C",
       {{0.0000, -4.4},  {0.2099, -1.2},  {0.2219, -3.5},  {0.2329, -5.2},  {0.2176, -2.5},  {0.6366, 0.0},
        {0.6448, -2.2},  {0.6560, -3.9},  {0.6584, -7.4},  {0.7935, -7.1},  {0.8213, -10.7}, {0.9336, -11.1},
        {1.2285, -5.1},  {1.3083, -6.8},  {2.1704, -8.7},  {2.7105, -13.2}, {4.2589, -13.9}, {4.6003, -13.9},
        {5.4902, -15.8}, {5.6077, -17.1}, {6.3065, -16.0}, {6.6374, -15.7}, {7.0427, -21.6}, {8.6523, -22.8}}},
  };
  auto it = tables.find(name);
  if (it == tables.end()) throw ConfigError("unknown TDL profile '" + name + "' (expected TDL-A or TDL-C)");
  return it->second;
}

}  // namespace

TdlProfile profile_from_table(const std::string& name, const std::vector<double>& delays_ns,
                              const std::vector<double>& powers_db, double sample_period) {
  if (delays_ns.empty() || delays_ns.size() != powers_db.size()) {
    throw ConfigError("profile '" + name + "': delays and powers must be non-empty and of equal length");
  }
  if (!(sample_period > 0.0)) throw ConfigError("profile '" + name + "': sample period must be positive");
  std::map<int, double> merged;
  double total = 0.0;
  for (std::size_t i = 0; i < delays_ns.size(); ++i) {
    if (delays_ns[i] < 0.0) throw ConfigError("profile '" + name + "': negative delay");
    const int d = static_cast<int>(std::lround(delays_ns[i] * 1e-9 / sample_period));
    const double p = db_to_linear(powers_db[i]);
    merged[d] += p;
    total += p;
  }
  TdlProfile prof;
  prof.name = name;
  for (const auto& [d, p] : merged) {
    prof.delays.push_back(d);
    prof.powers.push_back(p / total);
  }
  return prof;
}

TdlProfile make_tdl_profile(const std::string& name, double delay_spread_s, double sample_period) {
  const auto& table = tdl_table(name);
  std::vector<double> delays, powers;
  for (const auto& row : table) {
    delays.push_back(row.delay * delay_spread_s * 1e9);
    powers.push_back(row.power_db);
  }
  return profile_from_table(name, delays, powers, sample_period);
}

TdlProfile flat_profile() { return TdlProfile{"flat", {0}, {1.0}}; }

double doppler_hz(double speed_mps, double carrier_hz) { return speed_mps * carrier_hz / kSpeedOfLight; }

ChannelRealization generate_tdl(const TdlProfile& profile, double speed_mps, double carrier_hz, double sample_period,
                                int length, std::uint64_t seed, int sinusoids) {
  if (speed_mps < 0.0) throw ConfigError("speed must be non-negative");
  if (length <= 0 || sinusoids <= 0) throw ConfigError("generate_tdl: length and sinusoid count must be positive");
  ChannelRealization ch;
  ch.profile = profile;
  ch.length = length;
  ch.speed = speed_mps;
  ch.doppler = doppler_hz(speed_mps, carrier_hz);
  ch.seed = seed;
  Rng rng(seed);
  const double w = 2.0 * kPi * ch.doppler * sample_period;
  std::vector<double> freq(static_cast<std::size_t>(sinusoids));
  std::vector<double> phase(static_cast<std::size_t>(sinusoids));
  for (std::size_t i = 0; i < profile.powers.size(); ++i) {
    for (int m = 0; m < sinusoids; ++m) {
      freq[m] = w * std::cos(2.0 * kPi * uniform01(rng));
      phase[m] = 2.0 * kPi * uniform01(rng);
    }
    const double amp = std::sqrt(profile.powers[i] / sinusoids);
    CVec tap(static_cast<std::size_t>(length));
    // Each sinusoid advances by a fixed rotation per sample.
    for (int m = 0; m < sinusoids; ++m) {
      const cplx step = std::polar(1.0, freq[m]);
      cplx z = std::polar(amp, phase[m]);
      for (int b = 0; b < length; ++b) {
        if ((b & 255) == 0) z = std::polar(amp, phase[m] + freq[m] * b);
        tap[b] += z;
        z *= step;
      }
    }
    ch.taps.push_back(std::move(tap));
  }
  return ch;
}

TimeDomainFrame apply_channel(const TimeDomainFrame& frame, const ChannelRealization& ch, double n0,
                              std::uint64_t seed) {
  const std::size_t n = frame.samples.size();
  if (static_cast<std::size_t>(ch.length) < n + static_cast<std::size_t>(ch.profile.max_delay())) {
    throw ConfigError("channel realization covers " + std::to_string(ch.length) + " samples, need " +
                      std::to_string(n + ch.profile.max_delay()));
  }
  if (n0 < 0.0) throw ConfigError("noise power must be non-negative");
  TimeDomainFrame out = frame;
  for (std::size_t b = 0; b < n; ++b) {
    cplx acc(0.0, 0.0);
    for (std::size_t i = 0; i < ch.taps.size(); ++i) {
      const auto l = static_cast<std::size_t>(ch.profile.delays[i]);
      if (b >= l) acc += ch.taps[i][b] * frame.samples[b - l];
    }
    out.samples[b] = acc;
  }
  if (n0 > 0.0) {
    Rng rng(seed);
    for (auto& s : out.samples) s += complex_gaussian(rng, n0);
  }
  return out;
}

CVec apply_channel_adjoint(const CVec& grad_out, const ChannelRealization& ch) {
  const std::size_t n = grad_out.size();
  CVec g(n);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t i = 0; i < ch.taps.size(); ++i) {
      const auto l = static_cast<std::size_t>(ch.profile.delays[i]);
      if (b >= l) g[b - l] += std::conj(ch.taps[i][b]) * grad_out[b];
    }
  }
  return g;
}

ResourceGrid freq_csi(const ChannelRealization& ch, int n_s, int n_cp, int n_t) {
  const int sym = n_s + n_cp;
  if (ch.length < n_t * sym) throw ConfigError("freq_csi: realization shorter than the frame");
  ResourceGrid h(n_s, n_t, GridRole::csi);
  for (int t = 0; t < n_t; ++t) {
    const int mid = t * sym + n_cp + n_s / 2;
    for (std::size_t i = 0; i < ch.taps.size(); ++i) {
      const cplx tap = ch.taps[i][mid];
      const int l = ch.profile.delays[i];
      for (int k = 0; k < n_s; ++k) {
        h.at(k, t) += tap * std::polar(1.0, -2.0 * kPi * static_cast<double>((static_cast<long>(k) * l) % n_s) / n_s);
      }
    }
  }
  return h;
}

double ici_fraction(double speed_mps, double carrier_hz, double delta_f) {
  if (!(delta_f > 0.0)) throw ConfigError("subcarrier spacing must be positive");
  const double nu = speed_mps * carrier_hz / (kSpeedOfLight * delta_f);
  if (nu == 0.0) return 0.0;
  const double x = kPi * nu;
  const double s = std::sin(x) / x;
  return 1.0 - s * s;
}

EffectiveNoise effective_noise(double n0, double speed_mps, double carrier_hz, double delta_f) {
  const double g = ici_fraction(speed_mps, carrier_hz, delta_f);
  return {g, n0 + g};
}

}  // namespace deepofdm
