#include "deepofdm/fec.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace deepofdm {

namespace {

constexpr int kBaseCols = 24;

// True when placing `shift` at (r, c) closes a length-4 cycle.
bool closes_four_cycle(const std::vector<std::vector<int>>& base, int r, int c, int shift, int z) {
  const int rows = static_cast<int>(base.size());
  for (int r2 = 0; r2 < rows; ++r2) {
    if (r2 == r || base[r2][c] < 0) continue;
    for (int c2 = 0; c2 < kBaseCols; ++c2) {
      if (c2 == c || base[r][c2] < 0 || base[r2][c2] < 0) continue;
      const int s = shift - base[r][c2] + base[r2][c2] - base[r2][c];
      if (((s % z) + z) % z == 0) return true;
    }
  }
  return false;
}

}  // namespace

CodeRate parse_code_rate(const std::string& s) {
  if (s == "1/3") return CodeRate::r1_3;
  if (s == "1/2") return CodeRate::r1_2;
  if (s == "2/3") return CodeRate::r2_3;
  throw ConfigError("unsupported code rate '" + s + "' (expected 1/3, 1/2 or 2/3)");
}

std::string to_string(CodeRate r) {
  switch (r) {
    case CodeRate::r1_3: return "1/3";
    case CodeRate::r1_2: return "1/2";
    case CodeRate::r2_3: return "2/3";
  }
  return "?";
}

double rate_value(CodeRate r) {
  switch (r) {
    case CodeRate::r1_3: return 1.0 / 3.0;
    case CodeRate::r1_2: return 0.5;
    case CodeRate::r2_3: return 2.0 / 3.0;
  }
  return 0.0;
}

LdpcCode::LdpcCode(int n, CodeRate rate) : n_(n), rate_(rate) {
  if (n <= 0 || n % kBaseCols != 0) {
    throw ConfigError("LDPC blocklength must be a positive multiple of 24, got " + std::to_string(n));
  }
  z_ = n / kBaseCols;
  mb_ = rate == CodeRate::r1_3 ? 16 : rate == CodeRate::r1_2 ? 12 : 8;
  kb_ = kBaseCols - mb_;
  k_ = kb_ * z_;
  if (z_ < 4) throw ConfigError("LDPC blocklength too short for a lifted code: " + std::to_string(n));

  base_.assign(static_cast<std::size_t>(mb_), std::vector<int>(kBaseCols, -1));
  // Parity part: a weight-3 column followed by a dual diagonal.
  const int mid = mb_ / 2;
  base_[0][kb_] = 1;
  base_[mid][kb_] = 0;
  base_[mb_ - 1][kb_] = 1;
  for (int j = 1; j < mb_; ++j) {
    base_[j - 1][kb_ + j] = 0;
    base_[j][kb_ + j] = 0;
  }

  // Information columns: a few heavy columns, the rest of degree 3, rows
  // filled greedily by current weight.
  Rng rng(derive_seed(0x1DBC0DEULL, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(mb_)));
  std::vector<int> row_weight(static_cast<std::size_t>(mb_), 0);
  for (int r = 0; r < mb_; ++r)
    for (int c = kb_; c < kBaseCols; ++c) row_weight[r] += base_[r][c] >= 0;
  for (int c = 0; c < kb_; ++c) {
    const int degree = std::min(mb_, c % 4 == 0 ? std::max(3, mb_ / 2) : 3);
    for (int e = 0; e < degree; ++e) {
      std::vector<int> candidates;
      int best = std::numeric_limits<int>::max();
      for (int r = 0; r < mb_; ++r) {
        if (base_[r][c] >= 0) continue;
        if (row_weight[r] < best) {
          best = row_weight[r];
          candidates.clear();
        }
        if (row_weight[r] == best) candidates.push_back(r);
      }
      const int r = candidates[static_cast<std::size_t>(uniform01(rng) * candidates.size())];
      int shift = static_cast<int>(uniform01(rng) * z_);
      for (int attempt = 0; attempt < 4 * z_ && closes_four_cycle(base_, r, c, shift, z_); ++attempt) {
        shift = static_cast<int>(uniform01(rng) * z_);
      }
      base_[r][c] = shift;
      ++row_weight[r];
    }
  }
  lift();
}

void LdpcCode::lift() {
  checks_.assign(static_cast<std::size_t>(mb_) * z_, {});
  for (int r = 0; r < mb_; ++r) {
    for (int c = 0; c < kBaseCols; ++c) {
      const int s = base_[r][c];
      if (s < 0) continue;
      for (int i = 0; i < z_; ++i) checks_[static_cast<std::size_t>(r) * z_ + i].push_back(c * z_ + (i + s) % z_);
    }
  }
}

Bits LdpcCode::encode(const Bits& message) const {
  if (static_cast<int>(message.size()) != k_) {
    throw FramingError("ldpc_encode: expected " + std::to_string(k_) + " bits, got " + std::to_string(message.size()));
  }
  // lambda[r] = sum over information blocks of P^s u_c.
  std::vector<Bits> lambda(static_cast<std::size_t>(mb_), Bits(static_cast<std::size_t>(z_), 0));
  for (int r = 0; r < mb_; ++r) {
    for (int c = 0; c < kb_; ++c) {
      const int s = base_[r][c];
      if (s < 0) continue;
      for (int i = 0; i < z_; ++i) lambda[r][i] ^= message[static_cast<std::size_t>(c) * z_ + (i + s) % z_];
    }
  }
  auto shifted = [&](const Bits& v, int s) {
    Bits out(v.size());
    for (int i = 0; i < z_; ++i) out[i] = v[(i + s) % z_];
    return out;
  };
  std::vector<Bits> p(static_cast<std::size_t>(mb_), Bits(static_cast<std::size_t>(z_), 0));
  for (int r = 0; r < mb_; ++r)
    for (int i = 0; i < z_; ++i) p[0][i] ^= lambda[r][i];
  const int mid = mb_ / 2;
  const Bits p0_shift = shifted(p[0], 1);
  for (int i = 0; i < z_; ++i) p[1][i] = lambda[0][i] ^ p0_shift[i];
  for (int r = 1; r + 1 < mb_; ++r) {
    for (int i = 0; i < z_; ++i) p[r + 1][i] = lambda[r][i] ^ p[r][i] ^ (r == mid ? p[0][i] : 0);
  }
  Bits cw(message);
  cw.reserve(static_cast<std::size_t>(n_));
  for (int r = 0; r < mb_; ++r) cw.insert(cw.end(), p[r].begin(), p[r].end());
  return cw;
}

bool LdpcCode::satisfies(const Bits& codeword) const {
  if (static_cast<int>(codeword.size()) != n_) return false;
  for (const auto& check : checks_) {
    int parity = 0;
    for (int v : check) parity ^= codeword[v];
    if (parity) return false;
  }
  return true;
}

DecodeResult ldpc_decode(const std::vector<double>& llrs, const LdpcCode& code, int max_iters, double normalization) {
  const int n = code.n();
  if (static_cast<int>(llrs.size()) != n) {
    throw FramingError("ldpc_decode: expected " + std::to_string(n) + " LLRs, got " + std::to_string(llrs.size()));
  }
  const auto& checks = code.checks();
  // Internally positive LLR favours 0.
  std::vector<double> channel(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) channel[v] = -llrs[v];
  std::vector<std::size_t> offset(checks.size() + 1, 0);
  for (std::size_t c = 0; c < checks.size(); ++c) offset[c + 1] = offset[c] + checks[c].size();
  std::vector<double> r(offset.back(), 0.0);
  std::vector<double> q(offset.back(), 0.0);
  std::vector<double> app = channel;

  DecodeResult res;
  res.codeword.assign(static_cast<std::size_t>(n), 0);
  auto hard_and_check = [&] {
    bool zero_app = false;
    for (int v = 0; v < n; ++v) {
      res.codeword[v] = app[v] < 0.0 ? 1 : 0;
      zero_app = zero_app || app[v] == 0.0;
    }
    return !zero_app && code.satisfies(res.codeword);
  };

  for (int it = 1; it <= max_iters; ++it) {
    res.iterations = it;
    for (std::size_t c = 0; c < checks.size(); ++c) {
      const auto& vars = checks[c];
      double min1 = std::numeric_limits<double>::infinity(), min2 = min1;
      std::size_t argmin = 0;
      int sign = 1;
      for (std::size_t e = 0; e < vars.size(); ++e) {
        const double m = app[vars[e]] - r[offset[c] + e];
        q[offset[c] + e] = m;
        const double a = std::abs(m);
        if (m < 0.0) sign = -sign;
        if (a < min1) {
          min2 = min1;
          min1 = a;
          argmin = e;
        } else if (a < min2) {
          min2 = a;
        }
      }
      for (std::size_t e = 0; e < vars.size(); ++e) {
        const double m = q[offset[c] + e];
        const int s = (m < 0.0) ? -sign : sign;
        r[offset[c] + e] = normalization * s * (e == argmin ? min2 : min1);
      }
    }
    app = channel;
    for (std::size_t c = 0; c < checks.size(); ++c) {
      for (std::size_t e = 0; e < checks[c].size(); ++e) app[checks[c][e]] += r[offset[c] + e];
    }
    if (hard_and_check()) {
      res.converged = true;
      break;
    }
  }
  if (max_iters <= 0) res.converged = hard_and_check();
  res.app.resize(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) res.app[v] = -app[v];
  res.message.assign(res.codeword.begin(), res.codeword.begin() + code.k());
  return res;
}

BlockLayout segment_payload(int capacity_bits, const LdpcCode& code, int bits_per_symbol) {
  if (capacity_bits < code.n()) {
    throw ConfigError("grid capacity of " + std::to_string(capacity_bits) + " bits is below the blocklength " +
                      std::to_string(code.n()));
  }
  BlockLayout l;
  l.block_bits = code.n();
  l.blocks = capacity_bits / code.n();
  l.pad_bits = capacity_bits - l.blocks * code.n();
  l.pad_res = bits_per_symbol > 0 ? l.pad_bits / bits_per_symbol : 0;
  return l;
}

}  // namespace deepofdm
