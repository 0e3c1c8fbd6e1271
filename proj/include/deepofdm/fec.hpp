#pragma once

#include <string>
#include <vector>

#include "deepofdm/ofdm_grid.hpp"

namespace deepofdm {

enum class CodeRate { r1_3, r1_2, r2_3 };

CodeRate parse_code_rate(const std::string& s);
std::string to_string(CodeRate r);
double rate_value(CodeRate r);

/// Quasi-cyclic LDPC code over a 24-column base matrix with a dual-diagonal
/// parity part, lifted by Z = N / 24. Codewords are systematic: the first K
/// bits are the message.
class LdpcCode {
 public:
  LdpcCode(int n, CodeRate rate);

  int n() const { return n_; }
  int k() const { return k_; }
  int z() const { return z_; }
  int parity_rows() const { return n_ - k_; }
  CodeRate rate() const { return rate_; }
  double rate_value() const { return static_cast<double>(k_) / n_; }

  /// Base matrix entries: -1 for a zero block, otherwise the cyclic shift.
  const std::vector<std::vector<int>>& base() const { return base_; }
  /// Variable indices of each check.
  const std::vector<std::vector<int>>& checks() const { return checks_; }

  Bits encode(const Bits& message) const;
  bool satisfies(const Bits& codeword) const;

 private:
  void lift();

  int n_, k_, z_, mb_, kb_;
  CodeRate rate_;
  std::vector<std::vector<int>> base_;
  std::vector<std::vector<int>> checks_;
};

struct DecodeResult {
  Bits message;                 // K hard decisions
  Bits codeword;                // N hard decisions
  std::vector<double> app;      // a-posteriori LLRs, positive favours 1
  bool converged = false;
  int iterations = 0;
};

/// Normalized min-sum, flooding schedule. Input LLRs are positive when bit 1
/// is more likely. Stops once all parity checks hold.
DecodeResult ldpc_decode(const std::vector<double>& llrs, const LdpcCode& code, int max_iters = 20,
                         double normalization = 0.8);

struct BlockLayout {
  int blocks = 0;
  int block_bits = 0;
  int pad_bits = 0;
  int pad_res = 0;  // whole REs carrying only padding
};

BlockLayout segment_payload(int capacity_bits, const LdpcCode& code, int bits_per_symbol);

}  // namespace deepofdm
