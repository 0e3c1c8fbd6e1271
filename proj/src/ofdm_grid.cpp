#include "deepofdm/ofdm_grid.hpp"

#include <algorithm>
#include <limits>

namespace deepofdm {

double ResourceGrid::mean_power() const {
  if (data.empty()) return 0.0;
  double p = 0.0;
  for (const auto& v : data) p += std::norm(v);
  return p / static_cast<double>(data.size());
}

PilotConfig parse_pilot_config(const std::string& s) {
  if (s == "2P" || s == "2p") return PilotConfig::p2;
  if (s == "1P" || s == "1p") return PilotConfig::p1;
  if (s == "0P" || s == "0p") return PilotConfig::p0;
  throw ConfigError("unknown pilot configuration '" + s + "' (expected 2P, 1P or 0P)");
}

std::string to_string(PilotConfig c) {
  switch (c) {
    case PilotConfig::p2: return "2P";
    case PilotConfig::p1: return "1P";
    case PilotConfig::p0: return "0P";
  }
  return "?";
}

PilotPattern make_pilot_pattern(PilotConfig config, int n_s, int n_t, const std::vector<int>& symbols,
                                std::uint64_t seed) {
  if (n_s <= 0 || n_t <= 0) throw ConfigError("pilot pattern: grid dimensions must be positive");
  PilotPattern p;
  p.n_s = n_s;
  p.n_t = n_t;
  p.config = config;
  if (!symbols.empty()) {
    p.pilot_symbols = symbols;
  } else if (config == PilotConfig::p2) {
    p.pilot_symbols = {2, 11};
  } else if (config == PilotConfig::p1) {
    p.pilot_symbols = {2};
  }
  if (config == PilotConfig::p0) p.pilot_symbols.clear();
  std::sort(p.pilot_symbols.begin(), p.pilot_symbols.end());
  p.pilot_symbols.erase(std::unique(p.pilot_symbols.begin(), p.pilot_symbols.end()), p.pilot_symbols.end());
  for (int t : p.pilot_symbols) {
    if (t < 0 || t >= n_t) {
      throw ConfigError("pilot symbol index " + std::to_string(t) + " outside grid with n_t = " + std::to_string(n_t));
    }
  }

  const std::size_t total = static_cast<std::size_t>(n_s) * n_t;
  p.mask.assign(total, 0);
  p.values.assign(total, cplx(0.0, 0.0));
  Rng rng(seed);
  const double a = 1.0 / std::sqrt(2.0);
  for (int t : p.pilot_symbols) {
    for (int k = 0; k < n_s; ++k) {
      const std::size_t idx = static_cast<std::size_t>(k) + static_cast<std::size_t>(t) * n_s;
      p.mask[idx] = 1;
    }
  }
  // Values are drawn in storage order so that they do not depend on which
  // symbols are pilots.
  for (std::size_t idx = 0; idx < total; ++idx) {
    const double re = random_bit(rng) ? -a : a;
    const double im = random_bit(rng) ? -a : a;
    if (p.mask[idx]) p.values[idx] = cplx(re, im);
  }
  for (std::size_t idx = 0; idx < total; ++idx) {
    (p.mask[idx] ? p.pilot_indices : p.data_indices).push_back(static_cast<int>(idx));
  }
  return p;
}

int Constellation::label_of(const std::uint8_t* bits) const {
  int label = 0;
  for (int j = 0; j < m; ++j) label = (label << 1) | (bits[j] & 1);
  return label;
}

Constellation normalize_constellation(const CVec& points, int m) {
  if (points.size() < 2) throw NumericError("degenerate constellation: fewer than two points");
  const double n = static_cast<double>(points.size());
  cplx mean(0.0, 0.0);
  for (const auto& p : points) mean += p;
  mean /= n;
  double power = 0.0;
  for (const auto& p : points) power += std::norm(p - mean);
  power /= n;
  if (!(power > 1e-24)) throw NumericError("degenerate constellation: all points identical");
  const double inv = 1.0 / std::sqrt(power);
  Constellation c;
  c.points.reserve(points.size());
  for (const auto& p : points) c.points.push_back((p - mean) * inv);
  if (m < 0) {
    m = 0;
    while ((std::size_t{1} << m) < points.size()) ++m;
  }
  c.m = m;
  return c;
}

Constellation make_qam(int m) {
  if (m == 1) {
    auto c = normalize_constellation({cplx(1, 0), cplx(-1, 0)}, 1);
    return c;
  }
  if (m <= 0 || m % 2 != 0 || m > 12) throw ConfigError("QAM order must be 1 or an even number up to 12, got " + std::to_string(m));
  const int half = m / 2;
  const int levels = 1 << half;
  // Position j along an axis carries the Gray word j ^ (j >> 1).
  std::vector<int> level_of_word(levels);
  for (int j = 0; j < levels; ++j) level_of_word[j ^ (j >> 1)] = j;
  CVec pts(static_cast<std::size_t>(1) << m);
  for (int label = 0; label < (1 << m); ++label) {
    const int wi = label >> half;
    const int wq = label & (levels - 1);
    const double re = levels - 1 - 2 * level_of_word[wi];
    const double im = levels - 1 - 2 * level_of_word[wq];
    pts[label] = cplx(re, im);
  }
  return normalize_constellation(pts, m);
}

ResourceGrid map_bits_to_grid(const Bits& bits, const Constellation& c, const PilotPattern& pattern) {
  const std::size_t need = static_cast<std::size_t>(c.m) * pattern.data_count();
  if (bits.size() != need) {
    throw FramingError("map_bits_to_grid: expected " + std::to_string(need) + " bits, got " + std::to_string(bits.size()));
  }
  ResourceGrid g(pattern.n_s, pattern.n_t, GridRole::tx_data);
  g.data = pattern.values;
  for (int i = 0; i < pattern.data_count(); ++i) {
    g.data[pattern.data_indices[i]] = c.points[c.label_of(bits.data() + static_cast<std::size_t>(i) * c.m)];
  }
  return g;
}

CVec gather_data(const ResourceGrid& grid, const PilotPattern& pattern) {
  CVec out(pattern.data_indices.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = grid.data[pattern.data_indices[i]];
  return out;
}

void scatter_data(ResourceGrid& grid, const PilotPattern& pattern, const CVec& symbols) {
  if (symbols.size() != pattern.data_indices.size()) throw FramingError("scatter_data: symbol count mismatch");
  for (std::size_t i = 0; i < symbols.size(); ++i) grid.data[pattern.data_indices[i]] = symbols[i];
}

int nearest_label(const Constellation& c, cplx y) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < c.size(); ++i) {
    const double d = std::norm(y - c.points[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

Bits demap_hard(const ResourceGrid& grid, const Constellation& c, const PilotPattern& pattern) {
  Bits out;
  out.reserve(static_cast<std::size_t>(c.m) * pattern.data_count());
  for (int idx : pattern.data_indices) {
    const int label = nearest_label(c, grid.data[idx]);
    for (int j = 0; j < c.m; ++j) out.push_back(static_cast<std::uint8_t>(c.bit(label, j)));
  }
  return out;
}

}  // namespace deepofdm
