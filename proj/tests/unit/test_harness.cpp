#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "deepofdm/harness.hpp"

using namespace deepofdm;

namespace {

ExperimentConfig small_experiment(ReceiverKind rx) {
  ExperimentConfig c;
  c.train.grid = {32, 14, PilotConfig::p2};
  c.train.m = 2;
  c.train.mode = ModulationMode::qam;
  c.train.modulator = {8, false};
  c.train.receiver = {8, 2, RxInput::pilots};
  c.train.batch = 4;
  c.train.steps = 3;
  c.train.speed_max = 40.0;
  c.train.seed = 7;
  c.code = {96, CodeRate::r1_2};
  c.sweep.receiver = rx;
  c.sweep.snr_db = {-20.0, 30.0};
  c.sweep.speeds = {0.0};
  c.sweep.max_frames = 8;
  c.sweep.target_block_errors = 1000;
  c.sweep.chunk = 4;
  c.sweep.seed = 3;
  return c;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("deepofdm_test_" + name)).string();
}

}  // namespace

TEST_CASE("goodput and overhead") {
  CHECK(goodput(1.0, 0.5, 0.2) == doctest::Approx(0.4));
  CHECK(goodput(3.0, 1.0, 1.0) == 0.0);
  const auto p2 = make_pilot_pattern(PilotConfig::p2, 128, 14);
  CHECK(std::abs(p2.rho() - 12.0 / 14.0) < 1e-15);
  CHECK(make_pilot_pattern(PilotConfig::p0, 128, 14).rho() == 1.0);
}

TEST_CASE("symmetry metric") {
  CHECK(symmetry_metric(make_qam(4).points) < 1e-12);
  CHECK(symmetry_metric(make_qam(6).points) < 1e-12);
  const CVec tri = {{1.0, 0.0}, {-0.5, 0.8660254037844386}, {-0.5, -0.8660254037844386}};
  CHECK(symmetry_metric(tri) > 0.1);
  CHECK(symmetry_metric(tri, 2.0 * kPi) < 1e-12);
  CHECK(symmetry_metric(tri, 2.0 * kPi / 3.0) < 1e-12);
  CHECK(chamfer_distance(tri, tri) == 0.0);
  CHECK_THROWS_AS(chamfer_distance({}, tri), ConfigError);
}

TEST_CASE("required SNR interpolation") {
  const std::vector<double> snr = {0, 2, 4, 6};
  const std::vector<double> bler = {1.0, 0.5, 0.01, 0.0};
  const auto s = required_snr(snr, bler, 0.1);
  REQUIRE(s.has_value());
  CHECK(*s > 2.0);
  CHECK(*s < 4.0);
  const double expected = 2.0 + 2.0 * (std::log10(0.1) - std::log10(0.5)) / (std::log10(0.01) - std::log10(0.5));
  CHECK(std::abs(*s - expected) < 1e-12);
  // Lower targets need more SNR.
  CHECK(*required_snr(snr, bler, 0.01) >= *s);
  CHECK_FALSE(required_snr(snr, {1, 1, 1, 1}, 0.1).has_value());
  // Unsorted input gives the same answer.
  CHECK(std::abs(*required_snr({6, 0, 4, 2}, {0.0, 1.0, 0.01, 0.5}, 0.1) - expected) < 1e-12);
}

TEST_CASE("config parsing") {
  const auto c = parse_config(R"({
    "grid": {"n_s": 64, "n_t": 14, "pilots": "1P"},
    "modulation": {"m": 2, "mode": "deepofdm", "width": 16},
    "receiver": {"kind": "neural", "width": 16},
    "train": {"steps": 10, "speed_range": [0, 40], "snr_range_db": [0, 10]},
    "code": {"n": 648, "rate": "1/2"},
    "sweep": {"snr_db": [0, 5], "speeds": [40]}
  })");
  CHECK(c.train.grid.n_s == 64);
  CHECK(c.train.grid.pilots == PilotConfig::p1);
  CHECK(c.train.m == 2);
  CHECK(c.train.receiver.m == 2);
  CHECK(c.train.mode == ModulationMode::deepofdm);
  CHECK(c.train.speed_max == 40.0);
  CHECK(c.sweep.snr_db.size() == 2);
  // Dumping and re-parsing is lossless.
  CHECK(dump_config(parse_config(dump_config(c))) == dump_config(c));

  CHECK_THROWS_AS(parse_config("{"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"grid": {"n_s": 64, "bogus": 1}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"nonsense": {}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"grid": {"pilots": "3P"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"modulation": {"m": 0}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"code": {"rate": "5/6"}})"), ConfigError);
  CHECK_THROWS_AS(load_config(temp_path("missing.json")), ConfigError);
}

TEST_CASE("weights roundtrip bitwise") {
  auto cfg = small_experiment(ReceiverKind::neural).train;
  cfg.mode = ModulationMode::deepofdm;
  const auto trained = train_end_to_end(cfg).model;
  const auto path = temp_path("weights.json");
  save_weights(trained, path);
  const auto loaded = load_weights(path);
  CHECK(loaded.steps_done == trained.steps_done);
  REQUIRE(loaded.constellation.points.size() == trained.constellation.points.size());
  for (std::size_t i = 0; i < loaded.constellation.points.size(); ++i)
    CHECK(loaded.constellation.points[i] == trained.constellation.points[i]);

  // Identical outputs on the same frames.
  const auto pattern = model_pattern(trained, 32, 14);
  Rng rng(5);
  std::vector<Bits> bits(2, Bits(static_cast<std::size_t>(pattern.data_count() * 2)));
  for (auto& b : bits)
    for (auto& v : b) v = static_cast<std::uint8_t>(random_bit(rng));
  const auto ga = transmit(trained, bits, pattern);
  const auto gb = transmit(loaded, bits, pattern);
  for (std::size_t f = 0; f < ga.size(); ++f)
    for (std::size_t i = 0; i < ga[f].data.size(); ++i) REQUIRE(ga[f].data[i] == gb[f].data[i]);
  const auto la = receive(trained, ga, pattern, nullptr);
  const auto lb = receive(loaded, gb, pattern, nullptr);
  CHECK(la == lb);

  // Version mismatch and corruption are load errors.
  {
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto pos = text.find("\"format_version\"");
    REQUIRE(pos != std::string::npos);
    const auto colon = text.find(':', pos);
    const auto end = text.find_first_of(",}", colon);
    text.replace(colon + 1, end - colon - 1, " 999");
    std::ofstream(path) << text;
  }
  CHECK_THROWS_AS(load_weights(path), LoadError);
  std::ofstream(path) << "{ not json";
  CHECK_THROWS_AS(load_weights(path), LoadError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_weights(path), LoadError);
}

TEST_CASE("sweep rows, CSV and determinism") {
  const auto cfg = small_experiment(ReceiverKind::perfect_csi);
  const auto a = run_sweep(cfg);
  const auto b = run_sweep(cfg);
  REQUIRE(a.rows.size() == 2);
  CHECK(sweep_csv(a) == sweep_csv(b));
  CHECK(sweep_csv(a).rfind(std::string(kSweepCsvHeader) + "\n", 0) == 0);
  const auto& low = a.rows[0];
  const auto& high = a.rows[1];
  CHECK(low.frames == 8);
  CHECK(low.bler == 1.0);
  CHECK(high.bler == 0.0);
  CHECK(high.ber == 0.0);
  CHECK(std::abs(high.goodput - high.rate * high.rho) < 1e-12);
  CHECK(low.goodput == 0.0);
  CHECK(high.rate == doctest::Approx(1.0));
}

TEST_CASE("sweep stops early once enough block errors are seen") {
  auto cfg = small_experiment(ReceiverKind::lmmse);
  cfg.sweep.snr_db = {-20.0};
  cfg.sweep.target_block_errors = 1;
  cfg.sweep.chunk = 2;
  const auto r = run_sweep(cfg);
  CHECK(r.rows[0].frames == 2);
  CHECK(r.rows[0].block_errors >= 1);
}

TEST_CASE("classical receivers decode on a clean channel") {
  for (auto kind : {ReceiverKind::ls, ReceiverKind::lmmse, ReceiverKind::iedd}) {
    auto cfg = small_experiment(kind);
    cfg.sweep.snr_db = {30.0};
    cfg.sweep.max_frames = 4;
    const auto r = run_sweep(cfg);
    CAPTURE(to_string(kind));
    CHECK(r.rows[0].bler == 0.0);
  }
}

TEST_CASE("sweep configuration errors") {
  auto cfg = small_experiment(ReceiverKind::neural);
  CHECK_THROWS_AS(run_sweep(cfg), ConfigError);
  cfg = small_experiment(ReceiverKind::ls);
  cfg.train.grid.pilots = PilotConfig::p0;
  CHECK_THROWS_AS(run_sweep(cfg), ConfigError);
  cfg = small_experiment(ReceiverKind::ls);
  cfg.train.mode = ModulationMode::deepofdm;
  CHECK_THROWS_AS(run_sweep(cfg), ConfigError);
  CHECK_THROWS_AS(parse_receiver_kind("zf"), ConfigError);
  CHECK_THROWS_AS(parse_ablation_mode("everything"), ConfigError);
  CHECK(to_string(parse_ablation_mode("csi-oracle")) == "csi-oracle");
}

TEST_CASE("neural sweep with a label override keeps scrambled bits decodable") {
  auto cfg = small_experiment(ReceiverKind::neural);
  cfg.train.mode = ModulationMode::deepofdm;
  const auto model = train_end_to_end(cfg.train).model;
  cfg.sweep.snr_db = {0.0};
  cfg.sweep.max_frames = 4;
  SweepOptions opts;
  opts.model = &model;
  const auto plain = run_sweep(cfg, opts);
  opts.tx = TxOverride::single_symbol;
  const auto forced = run_sweep(cfg, opts);
  CHECK(plain.rows[0].frames == 4);
  CHECK(forced.rows[0].frames == 4);
  CHECK(forced.rows[0].bits == plain.rows[0].bits);
  const auto abl = run_ablation(AblationMode::restricted_8, cfg, &model);
  CHECK(abl.rows[0].receiver == "restricted-8");
  const auto gs = run_ablation(AblationMode::gs_collapse, cfg, &model);
  CHECK(gs.rows[0].receiver == "gs-collapse");
  CHECK_THROWS_AS(run_ablation(AblationMode::linear, cfg, &model), ConfigError);
  CHECK_THROWS_AS(run_ablation(AblationMode::single_symbol, cfg, nullptr), ConfigError);
}

TEST_CASE("width split table") {
  const auto rows = width_split_table();
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].name == "rx-heavy");
  CHECK(rows[0].tx.params < rows[2].tx.params);
  CHECK(rows[0].rx.params > rows[2].rx.params);
  CHECK(rows[2].rx_width == 34);
  for (const auto& r : rows) CHECK(r.ref_rx_mflops > 0.0);
}

TEST_CASE("output cloud symmetry report") {
  auto cfg = small_experiment(ReceiverKind::neural).train;
  const auto qam = init_model(cfg);
  const auto rep = analyze_symmetry(qam, 2, 11);
  CHECK(rep.metric < 1e-12);
  CHECK(rep.constellation_metric < 1e-12);
  CHECK(output_cloud(qam, 2, 11).size() == 2u * 32u * 12u);
}

TEST_CASE("padding REs after the last code block carry zero symbols") {
  auto cfg = small_experiment(ReceiverKind::neural).train;
  const auto qam = init_model(cfg);
  const auto pattern = model_pattern(qam, 32, 14);
  Bits bits(static_cast<std::size_t>(pattern.data_count() * 2), 1);
  const int pad = 10;
  const auto g = transmit(qam, {bits}, pattern, pad)[0];
  for (int i = 0; i < pattern.data_count(); ++i) {
    const double mag = std::abs(g.data[pattern.data_indices[i]]);
    if (i >= pattern.data_count() - pad) {
      CHECK(mag == 0.0);
    } else {
      CHECK(mag > 0.5);
    }
  }
  CHECK_THROWS_AS(transmit(qam, {bits}, pattern, pattern.data_count() + 1), ConfigError);
  const auto layout = segment_payload(pattern.data_count() * 2, LdpcCode(96, CodeRate::r1_2), 2);
  CHECK(layout.pad_res == (pattern.data_count() * 2 - layout.blocks * 96) / 2);
}

TEST_CASE("Chamfer distance matches brute force") {
  Rng rng(21);
  auto brute = [](const CVec& a, const CVec& b) {
    auto dir = [](const CVec& f, const CVec& t) {
      double s = 0;
      for (const auto& p : f) {
        double best = 1e300;
        for (const auto& q : t) best = std::min(best, std::abs(p - q));
        s += best;
      }
      return s / f.size();
    };
    return 0.5 * (dir(a, b) + dir(b, a));
  };
  for (int trial = 0; trial < 6; ++trial) {
    CVec a(static_cast<std::size_t>(50 + 300 * trial)), b(static_cast<std::size_t>(1 + 200 * trial));
    for (auto& p : a) p = complex_gaussian(rng, 1.0) * (trial % 2 ? 5.0 : 1.0);
    for (auto& p : b) p = complex_gaussian(rng, 1.0) + cplx(trial, -trial);
    CHECK(std::abs(chamfer_distance(a, b) - brute(a, b)) < 1e-12);
  }
  const CVec same(5, cplx(0.3, 0.3));
  CHECK(chamfer_distance(same, same) == 0.0);
}
