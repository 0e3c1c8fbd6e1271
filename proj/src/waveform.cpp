#include "deepofdm/waveform.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>

namespace deepofdm {

namespace {

struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

// Plans are created once per length and executed on caller buffers.
PlanPair plans_for(int n) {
  static std::mutex mutex;
  static std::map<int, PlanPair> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  // In-place plans: fftw_execute_dft must match the planned placement.
  fftw_complex* a = fftw_alloc_complex(static_cast<std::size_t>(n));
  PlanPair p;
  p.forward = fftw_plan_dft_1d(n, a, a, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  p.backward = fftw_plan_dft_1d(n, a, a, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(a);
  cache.emplace(n, p);
  return p;
}

}  // namespace

void unitary_dft(cplx* data, int n, bool inverse) {
  const PlanPair p = plans_for(n);
  auto* io = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(inverse ? p.backward : p.forward, io, io);
  const double s = 1.0 / std::sqrt(static_cast<double>(n));
  for (int i = 0; i < n; ++i) data[i] *= s;
}

TimeDomainFrame ofdm_modulate(const ResourceGrid& grid, int n_cp, double delta_f) {
  if (n_cp < 0 || n_cp >= grid.n_s) {
    throw ConfigError("cyclic prefix length " + std::to_string(n_cp) + " must be in [0, n_s = " +
                      std::to_string(grid.n_s) + ")");
  }
  TimeDomainFrame f;
  f.n_s = grid.n_s;
  f.n_cp = n_cp;
  f.n_t = grid.n_t;
  f.delta_f = delta_f;
  f.samples.resize(f.expected_length());
  CVec col(static_cast<std::size_t>(grid.n_s));
  for (int t = 0; t < grid.n_t; ++t) {
    std::copy_n(grid.data.begin() + static_cast<std::ptrdiff_t>(t) * grid.n_s, grid.n_s, col.begin());
    unitary_dft(col.data(), grid.n_s, true);
    cplx* out = f.samples.data() + static_cast<std::size_t>(t) * f.symbol_length();
    std::copy_n(col.end() - n_cp, n_cp, out);
    std::copy(col.begin(), col.end(), out + n_cp);
  }
  return f;
}

ResourceGrid ofdm_demodulate(const TimeDomainFrame& frame) {
  if (frame.n_s <= 0 || frame.n_t <= 0 || frame.samples.size() != frame.expected_length()) {
    throw FramingError("ofdm_demodulate: frame has " + std::to_string(frame.samples.size()) + " samples, expected " +
                       std::to_string(frame.expected_length()));
  }
  ResourceGrid g(frame.n_s, frame.n_t, GridRole::rx);
  for (int t = 0; t < frame.n_t; ++t) {
    const cplx* in = frame.samples.data() + static_cast<std::size_t>(t) * frame.symbol_length() + frame.n_cp;
    cplx* col = g.data.data() + static_cast<std::size_t>(t) * frame.n_s;
    std::copy_n(in, frame.n_s, col);
    unitary_dft(col, frame.n_s, false);
  }
  return g;
}

double papr(const CVec& samples) {
  double peak = 0.0, total = 0.0;
  for (const auto& s : samples) {
    const double p = std::norm(s);
    peak = std::max(peak, p);
    total += p;
  }
  if (samples.empty() || !(total > 0.0)) throw NumericError("papr: zero-energy frame");
  return peak / (total / static_cast<double>(samples.size()));
}

double papr(const TimeDomainFrame& frame) { return papr(frame.samples); }

double smooth_papr(const CVec& samples, double temperature) {
  double total = 0.0;
  for (const auto& s : samples) total += std::norm(s);
  if (samples.empty() || !(total > 0.0)) throw NumericError("smooth_papr: zero-energy frame");
  const double mean = total / static_cast<double>(samples.size());
  double top = 0.0;
  for (const auto& s : samples) top = std::max(top, std::norm(s) / mean);
  double acc = 0.0;
  for (const auto& s : samples) acc += std::exp((std::norm(s) / mean - top) * temperature);
  return top + std::log(acc / static_cast<double>(samples.size())) / temperature;
}

double ccdf_level(std::vector<double> values, double probability) {
  if (values.empty()) throw UsageError("ccdf_level: no samples");
  std::sort(values.begin(), values.end());
  const double pos = (1.0 - probability) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

void export_iq(const TimeDomainFrame& frame, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot open " + path + " for writing");
  static_assert(std::endian::native == std::endian::little, "IQ export assumes a little-endian host");
  for (const auto& s : frame.samples) {
    const float pair[2] = {static_cast<float>(s.real()), static_cast<float>(s.imag())};
    out.write(reinterpret_cast<const char*>(pair), sizeof(pair));
  }
}

}  // namespace deepofdm
