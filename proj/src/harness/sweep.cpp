#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "deepofdm/harness.hpp"

namespace deepofdm {

namespace {

struct Frame {
  std::vector<Bits> messages;
  Bits scramble;  // data-bit positions whose LLR sign must flip
  Bits tx_bits;
  ChannelRealization ch;
  ResourceGrid y;
};

bool learned_transmitter(const Model& m) {
  return uses_modulator(m.config.mode) || m.config.mode == ModulationMode::sip;
}

struct Link {
  const ExperimentConfig& cfg;
  const SweepOptions& opts;
  const Model* model;  // transmitter (and receiver for neural)
  int n_s, n_t, m;
  PilotPattern pattern;
  Constellation constellation;
  LdpcCode code;
  BlockLayout layout;
  TdlProfile profile;
  std::vector<int> subset;

  Link(const ExperimentConfig& c, const SweepOptions& o)
      : cfg(c), opts(o), model(o.model), n_s(c.train.grid.n_s), n_t(c.train.grid.n_t),
        m(o.model ? o.model->config.m : c.train.m), code(c.code.n, c.code.rate) {
    const auto kind = cfg.sweep.receiver;
    if (kind == ReceiverKind::neural && !model) throw ConfigError("the neural receiver needs trained weights");
    if (!model && cfg.train.mode != ModulationMode::qam) {
      throw ConfigError("modulation mode '" + to_string(cfg.train.mode) + "' needs trained weights");
    }
    if (model && kind != ReceiverKind::neural && learned_transmitter(*model)) {
      throw ConfigError("classical receivers need a constellation transmitter, not '" +
                        to_string(model->config.mode) + "'");
    }
    if (kind == ReceiverKind::iedd && opts.tx != TxOverride::none) {
      throw ConfigError("symbol-diversity ablations are defined for the neural receiver only");
    }
    pattern = model ? model_pattern(*model, n_s, n_t) : make_pilot_pattern(cfg.train.grid.pilots, n_s, n_t);
    if ((kind == ReceiverKind::ls || kind == ReceiverKind::lmmse || kind == ReceiverKind::iedd) && pattern.n_p() == 0) {
      throw ConfigError("receiver '" + to_string(kind) + "' needs pilots");
    }
    constellation = model ? model->constellation : make_qam(m);
    layout = segment_payload(pattern.data_count() * m, code, m);
    profile = make_profile(cfg.train.channel, n_s);
    if (opts.tx == TxOverride::restricted) {
      const int k = std::min(opts.restricted_k, 1 << m);
      subset.resize(static_cast<std::size_t>(1) << m);
      std::iota(subset.begin(), subset.end(), 0);
      Rng rng(derive_seed(cfg.sweep.seed, 0x5E7, static_cast<std::uint64_t>(k)));
      std::shuffle(subset.begin(), subset.end(), rng);
      subset.resize(static_cast<std::size_t>(k));
      std::sort(subset.begin(), subset.end());
    }
  }

  Frame make_frame(std::uint64_t seed, double speed) const {
    Rng rng(seed);
    Frame f;
    const int capacity = pattern.data_count() * m;
    Bits coded;
    coded.reserve(static_cast<std::size_t>(capacity));
    for (int b = 0; b < layout.blocks; ++b) {
      Bits msg(static_cast<std::size_t>(code.k()));
      for (auto& v : msg) v = static_cast<std::uint8_t>(random_bit(rng));
      const auto cw = code.encode(msg);
      coded.insert(coded.end(), cw.begin(), cw.end());
      f.messages.push_back(std::move(msg));
    }
    while (static_cast<int>(coded.size()) < capacity) coded.push_back(static_cast<std::uint8_t>(random_bit(rng)));

    f.tx_bits = coded;
    if (opts.tx != TxOverride::none) {
      for (int i = 0; i < pattern.data_count(); ++i) {
        const int label =
            opts.tx == TxOverride::single_symbol ? 0 : subset[static_cast<std::size_t>(rng() % subset.size())];
        for (int j = 0; j < m; ++j) f.tx_bits[static_cast<std::size_t>(i) * m + j] = static_cast<std::uint8_t>(constellation.bit(label, j));
      }
    }
    f.scramble.resize(coded.size());
    for (std::size_t i = 0; i < coded.size(); ++i) f.scramble[i] = coded[i] ^ f.tx_bits[i];

    const auto& ch_cfg = cfg.train.channel;
    const double ts = ch_cfg.sample_period(n_s);
    const int len = (n_s + ch_cfg.n_cp) * n_t;
    f.ch = generate_tdl(profile, speed, ch_cfg.carrier, ts, len + profile.max_delay(), rng(), ch_cfg.sinusoids);
    return f;
  }
};

void count_errors(const std::vector<DecodeResult>& decoded, const Frame& f, SweepRow& row) {
  for (std::size_t b = 0; b < decoded.size(); ++b) {
    long errors = 0;
    for (std::size_t i = 0; i < f.messages[b].size(); ++i) errors += decoded[b].message[i] != f.messages[b][i];
    row.bit_errors += errors;
    row.bits += static_cast<long>(f.messages[b].size());
    row.block_errors += errors > 0;
    ++row.blocks;
  }
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

double goodput(double rate, double rho, double bler) { return rate * rho * (1.0 - bler); }

SweepResult run_sweep(const ExperimentConfig& cfg, const SweepOptions& opts) {
  Link link(cfg, opts);
  const auto& sw = cfg.sweep;
  const auto& ch_cfg = cfg.train.channel;
  const int n_s = link.n_s, n_t = link.n_t;
  const bool csi_input = opts.model && opts.model->config.receiver.input == RxInput::pilots_csi;
  SweepResult result;
  result.seed = sw.seed;

  for (std::size_t si = 0; si < sw.speeds.size(); ++si) {
    const double speed = sw.speeds[si];
    std::optional<LmmseEstimator> estimator;
    if (sw.receiver == ReceiverKind::lmmse || sw.receiver == ReceiverKind::iedd) {
      estimator.emplace(make_covariance(link.profile, n_s, ch_cfg.n_cp, n_t, doppler_hz(speed, ch_cfg.carrier),
                                        ch_cfg.delta_f));
    }
    for (std::size_t ni = 0; ni < sw.snr_db.size(); ++ni) {
      const double snr = sw.snr_db[ni];
      const double n0 = db_to_linear(-snr);
      const double gamma = effective_noise(n0, speed, ch_cfg.carrier, ch_cfg.delta_f).gamma_ici;
      const std::uint64_t point = si * sw.snr_db.size() + ni;
      SweepRow row;
      row.receiver = opts.label.empty() ? to_string(sw.receiver) : opts.label;
      row.pilot = to_string(link.pattern.config);
      row.speed = speed;
      row.snr_db = snr;
      row.rho = link.pattern.rho();
      row.rate = link.code.rate_value() * link.m;

      long frame = 0;
      while (frame < sw.max_frames && row.block_errors < sw.target_block_errors) {
        const long count = std::min<long>(sw.chunk, sw.max_frames - frame);
        std::vector<Frame> frames;
        std::vector<Bits> bits;
        for (long i = 0; i < count; ++i) {
          frames.push_back(link.make_frame(derive_seed(sw.seed, point, static_cast<std::uint64_t>(frame + i)), speed));
          bits.push_back(frames.back().tx_bits);
        }
        std::vector<ResourceGrid> tx;
        if (opts.model) {
          tx = transmit(*opts.model, bits, link.pattern, link.layout.pad_res);
        } else {
          Model plain;
          plain.config.mode = ModulationMode::qam;
          plain.constellation = link.constellation;
          tx = transmit(plain, bits, link.pattern, link.layout.pad_res);
        }
        std::vector<ResourceGrid> csi;
        for (long i = 0; i < count; ++i) {
          auto& f = frames[i];
          const auto time = ofdm_modulate(tx[i], ch_cfg.n_cp, ch_cfg.delta_f);
          const auto rx = apply_channel(time, f.ch, n0, derive_seed(sw.seed, point, static_cast<std::uint64_t>(frame + i), 0x4E));
          f.y = ofdm_demodulate(rx);
          if (csi_input || sw.receiver == ReceiverKind::perfect_csi) csi.push_back(freq_csi(f.ch, n_s, ch_cfg.n_cp, n_t));
        }

        std::vector<std::vector<double>> llrs(static_cast<std::size_t>(count));
        if (sw.receiver == ReceiverKind::neural) {
          std::vector<ResourceGrid> ys;
          for (auto& f : frames) ys.push_back(f.y);
          llrs = receive(*opts.model, ys, link.pattern, csi_input ? &csi : nullptr);
        } else {
          for (long i = 0; i < count; ++i) {
            auto& f = frames[i];
            if (sw.receiver == ReceiverKind::iedd) {
              const auto r = iedd_receive(f.y, link.pattern, *estimator, n0, gamma, link.constellation, link.code,
                                          link.layout, sw.iedd_outer, sw.decoder_iters);
              count_errors(r.blocks, f, row);
              continue;
            }
            ChannelEstimate est;
            switch (sw.receiver) {
              case ReceiverKind::perfect_csi: est = oracle_estimate(csi[i]); break;
              case ReceiverKind::ls: est = ls_estimate(f.y, link.pattern, n0 + gamma); break;
              case ReceiverKind::lmmse: est = estimator->estimate(f.y, link.pattern, n0 + gamma); break;
              default: break;
            }
            llrs[i] = mmse_equalize_demap(f.y, est, n0, gamma, link.constellation, link.pattern).llr;
          }
        }
        if (sw.receiver != ReceiverKind::iedd) {
          for (long i = 0; i < count; ++i) {
            auto& l = llrs[i];
            const auto& s = frames[i].scramble;
            for (std::size_t k = 0; k < l.size(); ++k)
              if (s[k]) l[k] = -l[k];
            count_errors(decode_blocks(l, link.code, link.layout, sw.decoder_iters), frames[i], row);
          }
        }
        frame += count;
      }
      row.frames = frame;
      row.bler = row.blocks ? static_cast<double>(row.block_errors) / row.blocks : 0.0;
      row.ber = row.bits ? static_cast<double>(row.bit_errors) / row.bits : 0.0;
      row.goodput = goodput(row.rate, row.rho, row.bler);
      result.rows.push_back(row);
    }
  }
  return result;
}

std::string sweep_csv(const SweepResult& result) {
  std::ostringstream out;
  out << kSweepCsvHeader << '\n';
  for (const auto& r : result.rows) {
    out << r.receiver << ',' << r.pilot << ',' << fmt(r.speed) << ',' << fmt(r.snr_db) << ',' << r.frames << ','
        << r.block_errors << ',' << fmt(r.bler) << ',' << fmt(r.ber) << ',' << fmt(r.rho) << ',' << fmt(r.goodput)
        << '\n';
  }
  return out.str();
}

std::optional<double> required_snr(const std::vector<double>& snr_db, const std::vector<double>& bler, double target) {
  if (snr_db.size() != bler.size()) throw ConfigError("required_snr: SNR and BLER lists differ in length");
  if (!(target > 0.0)) throw ConfigError("required_snr: target BLER must be positive");
  std::vector<std::size_t> order(snr_db.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return snr_db[a] < snr_db[b]; });
  auto lg = [](double b) { return std::log10(std::max(b, 1e-12)); };
  for (std::size_t i = 0; i < order.size(); ++i) {
    const double s = snr_db[order[i]], b = bler[order[i]];
    if (b <= target) {
      if (i == 0) return std::nullopt;  // already below target at the lowest SNR
      const double s0 = snr_db[order[i - 1]], b0 = bler[order[i - 1]];
      const double t = (lg(target) - lg(b0)) / (lg(b) - lg(b0));
      return s0 + t * (s - s0);
    }
  }
  return std::nullopt;
}

namespace {

// Uniform bucket grid over a point set for nearest-neighbour queries.
class BucketGrid {
 public:
  explicit BucketGrid(const CVec& pts) : pts_(pts) {
    double x0 = pts[0].real(), x1 = x0, y0 = pts[0].imag(), y1 = y0;
    for (const auto& p : pts) {
      x0 = std::min(x0, p.real());
      x1 = std::max(x1, p.real());
      y0 = std::min(y0, p.imag());
      y1 = std::max(y1, p.imag());
    }
    origin_ = {x0, y0};
    const double span = std::max({x1 - x0, y1 - y0, 1e-12});
    side_ = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(pts.size()) / 2.0)));
    cell_ = span / side_ * (1.0 + 1e-9);
    start_.assign(static_cast<std::size_t>(side_) * side_ + 1, 0);
    std::vector<int> cell_of(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      cell_of[i] = index(cell_coord(pts[i].real() - x0), cell_coord(pts[i].imag() - y0));
      ++start_[static_cast<std::size_t>(cell_of[i]) + 1];
    }
    for (std::size_t c = 1; c < start_.size(); ++c) start_[c] += start_[c - 1];
    order_.resize(pts.size());
    auto fill = start_;
    for (std::size_t i = 0; i < pts.size(); ++i) order_[static_cast<std::size_t>(fill[cell_of[i]]++)] = static_cast<int>(i);
  }

  double nearest(cplx q) const {
    const int cx = cell_coord(q.real() - origin_.real()), cy = cell_coord(q.imag() - origin_.imag());
    // Distance from q to the grid box, so rings are bounded for outside queries too.
    const double ox = std::max({0.0, origin_.real() - q.real(), q.real() - (origin_.real() + side_ * cell_)});
    const double oy = std::max({0.0, origin_.imag() - q.imag(), q.imag() - (origin_.imag() + side_ * cell_)});
    const double outside = std::hypot(ox, oy);
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r <= side_; ++r) {
      for (int x = cx - r; x <= cx + r; ++x) {
        for (int y = cy - r; y <= cy + r; ++y) {
          if (std::max(std::abs(x - cx), std::abs(y - cy)) != r || x < 0 || y < 0 || x >= side_ || y >= side_) continue;
          const int c = index(x, y);
          for (int k = start_[c]; k < start_[c + 1]; ++k) best = std::min(best, std::norm(pts_[order_[k]] - q));
        }
      }
      // Every unvisited cell is at least r cells away from q's clamped cell.
      const double reach = std::max(outside, r * cell_);
      if (best <= reach * reach) break;
    }
    return std::sqrt(best);
  }

 private:
  int cell_coord(double d) const { return std::clamp(static_cast<int>(std::floor(d / cell_)), 0, side_ - 1); }
  int index(int x, int y) const { return x + y * side_; }

  const CVec& pts_;
  cplx origin_;
  double cell_ = 1.0;
  int side_ = 1;
  std::vector<int> start_, order_;
};

double directed_chamfer(const CVec& from, const CVec& to) {
  const BucketGrid grid(to);
  double total = 0.0;
  for (const auto& p : from) total += grid.nearest(p);
  return total / static_cast<double>(from.size());
}

}  // namespace

double chamfer_distance(const CVec& a, const CVec& b) {
  if (a.empty() || b.empty()) throw ConfigError("chamfer_distance: empty point set");
  return 0.5 * (directed_chamfer(a, b) + directed_chamfer(b, a));
}

double symmetry_metric(const CVec& points, double theta) {
  if (points.size() < 2) throw ConfigError("symmetry_metric needs at least two points");
  const cplx r = std::polar(1.0, theta);
  CVec rotated(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) rotated[i] = points[i] * r;
  return chamfer_distance(points, rotated);
}

CVec output_cloud(const Model& model, int frames, std::uint64_t seed, int n_s, int n_t) {
  if (n_s <= 0) n_s = model.config.grid.n_s;
  if (n_t <= 0) n_t = model.config.grid.n_t;
  const auto pattern = model_pattern(model, n_s, n_t);
  Rng rng(seed);
  std::vector<Bits> bits(static_cast<std::size_t>(frames));
  for (auto& b : bits) {
    b.resize(static_cast<std::size_t>(pattern.data_count()) * model.config.m);
    for (auto& v : b) v = static_cast<std::uint8_t>(random_bit(rng));
  }
  CVec cloud;
  for (const auto& g : transmit(model, bits, pattern)) {
    const auto d = gather_data(g, pattern);
    cloud.insert(cloud.end(), d.begin(), d.end());
  }
  return cloud;
}

SymmetryReport analyze_symmetry(const Model& model, int frames, std::uint64_t seed) {
  SymmetryReport r;
  const auto a = output_cloud(model, frames, seed);
  const auto b = output_cloud(model, frames, derive_seed(seed, 1));
  r.metric = symmetry_metric(a);
  r.noise_floor = chamfer_distance(a, b);
  r.constellation_metric = symmetry_metric(model.constellation.points);
  return r;
}

AblationMode parse_ablation_mode(const std::string& s) {
  if (s == "single-symbol") return AblationMode::single_symbol;
  if (s == "restricted-8") return AblationMode::restricted_8;
  if (s == "gs-collapse") return AblationMode::gs_collapse;
  if (s == "linear") return AblationMode::linear;
  if (s == "width-split") return AblationMode::width_split;
  if (s == "sip") return AblationMode::sip;
  if (s == "csi-oracle") return AblationMode::csi_oracle;
  throw ConfigError("unknown ablation '" + s +
                    "' (expected single-symbol, restricted-8, gs-collapse, linear, width-split, sip or csi-oracle)");
}

std::string to_string(AblationMode m) {
  switch (m) {
    case AblationMode::single_symbol: return "single-symbol";
    case AblationMode::restricted_8: return "restricted-8";
    case AblationMode::gs_collapse: return "gs-collapse";
    case AblationMode::linear: return "linear";
    case AblationMode::width_split: return "width-split";
    case AblationMode::sip: return "sip";
    case AblationMode::csi_oracle: return "csi-oracle";
  }
  return "?";
}

std::vector<WidthSplitRow> width_split_table(int m, int n_s, int n_t) {
  struct Ref {
    const char* name;
    int tx, rx;
    double tx_k, rx_k, tx_mf, rx_mf;
  };
  // Parameter counts in thousands and MFLOPs as listed for each split.
  const Ref refs[] = {{"rx-heavy", 20, 50, 18.48, 124.96, 65.77, 446.66},
                      {"balanced", 40, 40, 59.36, 83.97, 211.82, 299.98},
                      {"tx-heavy", 48, 33, 137.99, 18.23, 493.05, 64.94}};
  std::vector<WidthSplitRow> rows;
  for (const auto& r : refs) {
    WidthSplitRow w;
    w.name = r.name;
    w.tx_width = r.tx;
    w.rx_width = r.rx % 2 ? r.rx + 1 : r.rx;  // the receiver needs an even width
    w.tx = count_modulator({r.tx, false}, n_s, n_t);
    w.rx = count_receiver({w.rx_width, m, RxInput::pilots}, n_s, n_t);
    w.ref_tx_params_k = r.tx_k;
    w.ref_rx_params_k = r.rx_k;
    w.ref_tx_mflops = r.tx_mf;
    w.ref_rx_mflops = r.rx_mf;
    rows.push_back(w);
  }
  return rows;
}

SweepResult run_ablation(AblationMode mode, const ExperimentConfig& cfg, const Model* model) {
  auto need = [&](const char* what) {
    if (!model) throw ConfigError(std::string("ablation '") + to_string(mode) + "' needs " + what);
  };
  ExperimentConfig c = cfg;
  c.sweep.receiver = ReceiverKind::neural;
  SweepOptions opts;
  opts.model = model;
  opts.label = to_string(mode);
  switch (mode) {
    case AblationMode::single_symbol:
      need("trained weights");
      opts.tx = TxOverride::single_symbol;
      return run_sweep(c, opts);
    case AblationMode::restricted_8:
      need("trained weights");
      opts.tx = TxOverride::restricted;
      opts.restricted_k = 8;
      return run_sweep(c, opts);
    case AblationMode::gs_collapse: {
      need("DeepOFDM weights");
      if (!uses_modulator(model->config.mode)) throw ConfigError("gs-collapse needs weights with a modulator");
      Model collapsed = clone(*model);
      const auto pattern = model_pattern(collapsed, collapsed.config.grid.n_s, collapsed.config.grid.n_t);
      collapsed.constellation = collapse_to_gs(collapsed.modulator, collapsed.constellation, pattern,
                                               collapsed.config.gs_collapse_grids, derive_seed(cfg.sweep.seed, 0x65));
      collapsed.config.mode = ModulationMode::deepofdm_gs;
      opts.model = &collapsed;
      return run_sweep(c, opts);
    }
    case AblationMode::linear:
      need("DeepOFDM-linear weights");
      if (model->config.mode != ModulationMode::deepofdm_linear) {
        throw ConfigError("the linear ablation needs weights trained with mode deepofdm-linear");
      }
      return run_sweep(c, opts);
    case AblationMode::sip:
      need("SIP weights");
      if (model->config.mode != ModulationMode::sip) throw ConfigError("the sip ablation needs weights trained with mode sip");
      return run_sweep(c, opts);
    case AblationMode::width_split:
      need("weights trained at the chosen width split");
      opts.label = "width-" + std::to_string(model->config.modulator.width) + "-" +
                   std::to_string(model->config.receiver.width);
      return run_sweep(c, opts);
    case AblationMode::csi_oracle: {
      need("weights with receiver input pilots+csi");
      if (model->config.receiver.input != RxInput::pilots_csi) {
        throw ConfigError("csi-oracle needs a receiver trained with input pilots+csi");
      }
      opts.label = "neural-csi";
      auto res = run_sweep(c, opts);
      ExperimentConfig k = c;
      k.sweep.receiver = ReceiverKind::perfect_csi;
      SweepOptions ko;
      ko.label = "perfect-csi";
      if (!learned_transmitter(*model)) {
        ko.model = model;
      } else {
        k.train.mode = ModulationMode::qam;
        k.train.m = model->config.m;
        k.train.grid.pilots = model->config.grid.pilots;
      }
      // The classical path only needs the transmitter, so a neural-only model is fine here.
      auto extra = run_sweep(k, ko);
      res.rows.insert(res.rows.end(), extra.rows.begin(), extra.rows.end());
      return res;
    }
  }
  return {};
}

}  // namespace deepofdm
