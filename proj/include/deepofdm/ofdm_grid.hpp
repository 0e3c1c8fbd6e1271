#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deepofdm/common.hpp"

namespace deepofdm {

using Bits = std::vector<std::uint8_t>;

enum class GridRole { tx_data, tx_modulated, rx, csi };

/// Complex n_s x n_t grid. Storage is subcarrier-fastest: index k + t * n_s.
struct ResourceGrid {
  int n_s = 0;
  int n_t = 0;
  GridRole role = GridRole::tx_data;
  CVec data;

  ResourceGrid() = default;
  ResourceGrid(int subcarriers, int symbols, GridRole r = GridRole::tx_data)
      : n_s(subcarriers), n_t(symbols), role(r), data(static_cast<std::size_t>(subcarriers) * symbols) {}

  cplx& at(int k, int t) { return data[static_cast<std::size_t>(k) + static_cast<std::size_t>(t) * n_s]; }
  const cplx& at(int k, int t) const { return data[static_cast<std::size_t>(k) + static_cast<std::size_t>(t) * n_s]; }
  std::size_t size() const { return data.size(); }
  double mean_power() const;
};

enum class PilotConfig { p2, p1, p0 };

PilotConfig parse_pilot_config(const std::string& s);
std::string to_string(PilotConfig c);

struct PilotPattern {
  int n_s = 0;
  int n_t = 0;
  PilotConfig config = PilotConfig::p0;
  std::vector<int> pilot_symbols;     // OFDM symbol indices carrying pilots
  std::vector<std::uint8_t> mask;     // 1 on pilot REs
  CVec values;                        // zero on data REs
  std::vector<int> data_indices;      // grid storage indices of data REs, frequency-first
  std::vector<int> pilot_indices;

  int n_p() const { return static_cast<int>(pilot_indices.size()); }
  int data_count() const { return static_cast<int>(data_indices.size()); }
  bool is_pilot(int k, int t) const { return mask[static_cast<std::size_t>(k) + static_cast<std::size_t>(t) * n_s] != 0; }
  /// Fraction of REs carrying data.
  double rho() const { return 1.0 - static_cast<double>(n_p()) / (static_cast<double>(n_s) * n_t); }
};

inline constexpr std::uint64_t kPilotSeed = 0x5EED0F0FDULL;

/// Full pilot symbols; 2P uses symbols 2 and 11 (0-indexed), 1P symbol 2.
/// `symbols` overrides the defaults when non-empty.
PilotPattern make_pilot_pattern(PilotConfig config, int n_s, int n_t, const std::vector<int>& symbols = {},
                                std::uint64_t seed = kPilotSeed);

/// Points indexed by label: points[i] carries the m-bit word i, MSB first.
struct Constellation {
  int m = 0;
  CVec points;
  bool trainable = false;

  int size() const { return static_cast<int>(points.size()); }
  /// Bit j (0 = MSB) of label i.
  int bit(int label, int j) const { return (label >> (m - 1 - j)) & 1; }
  int label_of(const std::uint8_t* bits) const;
};

/// Subtract the mean, then divide by the RMS.
Constellation normalize_constellation(const CVec& points, int m = -1);

/// Square Gray-labelled QAM (m even) or BPSK (m = 1). Bit 0 maps to the
/// positive amplitude on each axis; the I axis takes the first m/2 bits.
Constellation make_qam(int m);

/// Places bits on data REs (frequency-first) and pilot values on pilot REs.
ResourceGrid map_bits_to_grid(const Bits& bits, const Constellation& c, const PilotPattern& pattern);

/// Symbols on data REs in mapping order.
CVec gather_data(const ResourceGrid& grid, const PilotPattern& pattern);
void scatter_data(ResourceGrid& grid, const PilotPattern& pattern, const CVec& symbols);

/// Nearest-point hard decision.
int nearest_label(const Constellation& c, cplx y);
Bits demap_hard(const ResourceGrid& grid, const Constellation& c, const PilotPattern& pattern);

}  // namespace deepofdm
