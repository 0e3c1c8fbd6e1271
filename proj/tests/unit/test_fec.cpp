#include <cmath>

#include "doctest.h"
#include "deepofdm/fec.hpp"

using namespace deepofdm;

namespace {

Bits random_bits(std::size_t n, Rng& rng) {
  Bits b(n);
  for (auto& x : b) x = static_cast<std::uint8_t>(random_bit(rng));
  return b;
}

std::vector<double> saturated(const Bits& cw, double mag) {
  std::vector<double> l(cw.size());
  for (std::size_t i = 0; i < cw.size(); ++i) l[i] = cw[i] ? mag : -mag;
  return l;
}

}  // namespace

TEST_CASE("codes in the blocklength x rate grid encode valid codewords") {
  Rng rng(1);
  for (int n : {648, 1296, 1944}) {
    for (auto r : {CodeRate::r1_3, CodeRate::r1_2, CodeRate::r2_3}) {
      const LdpcCode code(n, r);
      CHECK(code.n() == n);
      CHECK(code.rate_value() == doctest::Approx(rate_value(r)));
      CHECK(code.encode(Bits(code.k(), 0)) == Bits(n, 0));
      for (int trial = 0; trial < 5; ++trial) {
        const auto msg = random_bits(code.k(), rng);
        const auto cw = code.encode(msg);
        CHECK(code.satisfies(cw));
        CHECK(std::equal(msg.begin(), msg.end(), cw.begin()));
      }
    }
  }
  CHECK(LdpcCode(1296, CodeRate::r1_2).k() == 648);
  CHECK_THROWS_AS(LdpcCode(650, CodeRate::r1_2), ConfigError);
  CHECK_THROWS_AS(LdpcCode(648, CodeRate::r1_2).encode(Bits(100)), FramingError);
  CHECK_THROWS_AS(parse_code_rate("3/4"), ConfigError);
}

TEST_CASE("lifted graph has no 4-cycles") {
  const LdpcCode code(648, CodeRate::r1_2);
  const auto& checks = code.checks();
  std::vector<std::vector<int>> var_checks(code.n());
  for (std::size_t c = 0; c < checks.size(); ++c)
    for (int v : checks[c]) var_checks[v].push_back(static_cast<int>(c));
  int cycles = 0;
  for (std::size_t c = 0; c < checks.size(); ++c) {
    std::vector<int> seen(checks.size(), 0);
    for (int v : checks[c])
      for (int c2 : var_checks[v])
        if (c2 != static_cast<int>(c) && ++seen[c2] > 1) ++cycles;
  }
  CHECK(cycles == 0);
}

TEST_CASE("decoder basics") {
  Rng rng(2);
  const LdpcCode code(648, CodeRate::r1_2);
  const auto msg = random_bits(code.k(), rng);
  const auto cw = code.encode(msg);
  const auto res = ldpc_decode(saturated(cw, 20.0), code, 20);
  CHECK(res.converged);
  CHECK(res.iterations == 1);
  CHECK(res.message == msg);

  const auto zero = ldpc_decode(std::vector<double>(648, 0.0), code, 20);
  CHECK_FALSE(zero.converged);
  CHECK(zero.iterations == 20);

  const auto a = ldpc_decode(saturated(cw, 1.3), code, 5);
  const auto b = ldpc_decode(saturated(cw, 1.3), code, 5);
  CHECK(a.app == b.app);
}

TEST_CASE("every single flipped bit is corrected") {
  Rng rng(3);
  const LdpcCode code(648, CodeRate::r1_2);
  const auto cw = code.encode(random_bits(code.k(), rng));
  auto llr = saturated(cw, 8.0);
  int failures = 0;
  for (int i = 0; i < code.n(); ++i) {
    llr[i] = -llr[i];
    const auto res = ldpc_decode(llr, code, 20);
    failures += !(res.converged && res.codeword == cw);
    llr[i] = -llr[i];
  }
  CHECK(failures == 0);
}

TEST_CASE("coded BPSK beats uncoded at 2.5 dB") {
  const LdpcCode code(648, CodeRate::r1_2);
  const double ebn0 = db_to_linear(2.5);
  const double es_n0 = ebn0 * code.rate_value();
  const double sigma = std::sqrt(1.0 / (2.0 * es_n0));
  Rng rng(4);
  long coded_err = 0, bits = 0;
  while (bits < 100000) {
    const auto msg = random_bits(code.k(), rng);
    const auto cw = code.encode(msg);
    std::vector<double> llr(cw.size());
    for (std::size_t i = 0; i < cw.size(); ++i) {
      const double y = (cw[i] ? 1.0 : -1.0) + sigma * gaussian(rng);
      llr[i] = 2.0 * y / (sigma * sigma);
    }
    const auto res = ldpc_decode(llr, code, 20);
    for (int i = 0; i < code.k(); ++i) coded_err += res.message[i] != msg[i];
    bits += code.k();
  }
  const double uncoded = 0.5 * std::erfc(std::sqrt(ebn0));
  CHECK(std::abs(uncoded - 0.02970) < 1e-4);
  CHECK(static_cast<double>(coded_err) / bits < uncoded);
}

TEST_CASE("payload segmentation") {
  const LdpcCode c1944(1944, CodeRate::r1_2);
  const auto l = segment_payload(10752, c1944, 6);
  CHECK(l.blocks == 5);
  CHECK(l.pad_bits == 1032);
  CHECK(l.pad_res == 172);
  const LdpcCode c648(648, CodeRate::r1_2);
  const auto one = segment_payload(648, c648, 2);
  CHECK(one.blocks == 1);
  CHECK(one.pad_bits == 0);
  const LdpcCode full(10752, CodeRate::r1_2);
  CHECK(segment_payload(10752, full, 6).blocks == 1);
  CHECK_THROWS_AS(segment_payload(600, c648, 2), ConfigError);
}
