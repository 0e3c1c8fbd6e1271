#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "deepofdm/harness.hpp"

namespace deepofdm {

using nlohmann::ordered_json;

namespace {

// Reads keys of one config section, rejecting anything unrecognized.
class Section {
 public:
  Section(const ordered_json& root, const char* name) : name_(name) {
    if (!root.contains(name)) return;
    obj_ = root.at(name);
    if (!obj_.is_object()) throw ConfigError(std::string("config section '") + name + "' must be an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    known_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(std::string("config key '") + name_ + "." + key + "' has the wrong type");
    }
  }

  void finish() const {
    for (const auto& [k, v] : obj_.items()) {
      if (!known_.count(k)) throw ConfigError("unknown config key '" + std::string(name_) + "." + k + "'");
    }
  }

 private:
  const char* name_;
  ordered_json obj_ = ordered_json::object();
  std::set<std::string> known_;
};

void read_range(Section& s, const char* key, double& lo, double& hi) {
  std::vector<double> r{lo, hi};
  s.read(key, r);
  if (r.size() != 2) throw ConfigError(std::string("config key '") + key + "' must be a [min, max] pair");
  lo = r[0];
  hi = r[1];
}

void parse_train_sections(const ordered_json& root, TrainConfig& t, ReceiverKind* kind) {
  for (const auto& [k, v] : root.items()) {
    static const std::set<std::string> sections{"grid", "channel", "code", "modulation", "receiver", "train", "sweep"};
    if (!sections.count(k)) throw ConfigError("unknown config section '" + k + "'");
  }
  {
    Section s(root, "grid");
    std::string pilots = to_string(t.grid.pilots);
    s.read("n_s", t.grid.n_s);
    s.read("n_t", t.grid.n_t);
    s.read("pilots", pilots);
    s.finish();
    t.grid.pilots = parse_pilot_config(pilots);
  }
  {
    Section s(root, "channel");
    double ds_ns = std::round(t.channel.delay_spread * 1e15) / 1e6;
    s.read("profile", t.channel.profile);
    s.read("delay_spread_ns", ds_ns);
    s.read("carrier_hz", t.channel.carrier);
    s.read("subcarrier_spacing_hz", t.channel.delta_f);
    s.read("n_cp", t.channel.n_cp);
    s.read("sinusoids", t.channel.sinusoids);
    s.finish();
    t.channel.delay_spread = ds_ns / 1e9;
  }
  {
    Section s(root, "modulation");
    std::string mode = to_string(t.mode);
    s.read("m", t.m);
    s.read("mode", mode);
    s.read("width", t.modulator.width);
    s.read("sip_fraction", t.sip_fraction);
    s.finish();
    t.mode = parse_modulation_mode(mode);
    t.modulator.linear = t.mode == ModulationMode::deepofdm_linear;
  }
  {
    Section s(root, "receiver");
    std::string input = to_string(t.receiver.input);
    std::string k = kind ? to_string(*kind) : "neural";
    s.read("kind", k);
    s.read("width", t.receiver.width);
    s.read("input", input);
    s.finish();
    t.receiver.input = parse_rx_input(input);
    if (kind) *kind = parse_receiver_kind(k);
  }
  {
    Section s(root, "train");
    s.read("batch", t.batch);
    s.read("learning_rate", t.learning_rate);
    s.read("steps", t.steps);
    read_range(s, "speed_range", t.speed_min, t.speed_max);
    read_range(s, "snr_range_db", t.snr_min_db, t.snr_max_db);
    s.read("lambda_max", t.lambda_max);
    s.read("lambda_start", t.lambda_start);
    s.read("papr_temperature", t.papr_temperature);
    s.read("gs_finetune_steps", t.gs_finetune_steps);
    s.read("gs_collapse_grids", t.gs_collapse_grids);
    s.read("checkpoint_every", t.checkpoint_every);
    s.read("seed", t.seed);
    s.finish();
  }
  t.receiver.m = t.m;
}

ordered_json train_sections(const TrainConfig& t) {
  ordered_json j;
  j["grid"] = {{"n_s", t.grid.n_s}, {"n_t", t.grid.n_t}, {"pilots", to_string(t.grid.pilots)}};
  j["channel"] = {{"profile", t.channel.profile},
                  {"delay_spread_ns", std::round(t.channel.delay_spread * 1e15) / 1e6},
                  {"carrier_hz", t.channel.carrier},
                  {"subcarrier_spacing_hz", t.channel.delta_f},
                  {"n_cp", t.channel.n_cp},
                  {"sinusoids", t.channel.sinusoids}};
  j["modulation"] = {{"m", t.m}, {"mode", to_string(t.mode)}, {"width", t.modulator.width},
                     {"sip_fraction", t.sip_fraction}};
  j["receiver"] = {{"width", t.receiver.width}, {"input", to_string(t.receiver.input)}};
  j["train"] = {{"batch", t.batch},
                {"learning_rate", t.learning_rate},
                {"steps", t.steps},
                {"speed_range", {t.speed_min, t.speed_max}},
                {"snr_range_db", {t.snr_min_db, t.snr_max_db}},
                {"lambda_max", t.lambda_max},
                {"lambda_start", t.lambda_start},
                {"papr_temperature", t.papr_temperature},
                {"gs_finetune_steps", t.gs_finetune_steps},
                {"gs_collapse_grids", t.gs_collapse_grids},
                {"checkpoint_every", t.checkpoint_every},
                {"seed", t.seed}};
  return j;
}

ordered_json parse_json(const std::string& text, const char* what) {
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string(what) + " is not valid JSON: " + e.what());
  }
}

std::string read_file(const std::string& path, bool for_load) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (for_load) throw LoadError("cannot open '" + path + "'");
    throw ConfigError("cannot open config '" + path + "'");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename T>
ordered_json network_json(const tk::Network<T>& net) {
  ordered_json j = ordered_json::object();
  for (const auto& [name, t] : net.state()) {
    j[name] = {{"shape", {t->shape.n, t->shape.h, t->shape.w, t->shape.c}}, {"data", t->data}};
  }
  return j;
}

void fill_network(tk::Network<float>& net, const ordered_json& j, const char* which) {
  auto state = net.state();
  if (!j.is_object() || j.size() != state.size()) {
    throw LoadError(std::string(which) + " tensors do not match the architecture in the file's config");
  }
  for (auto& [name, t] : state) {
    if (!j.contains(name)) throw LoadError(std::string(which) + " is missing tensor '" + name + "'");
    const auto& e = j.at(name);
    const auto shape = e.at("shape").get<std::vector<int>>();
    if (shape != std::vector<int>{t->shape.n, t->shape.h, t->shape.w, t->shape.c}) {
      throw LoadError(std::string(which) + " tensor '" + name + "' has shape " + e.at("shape").dump() + ", expected " +
                      t->shape.str());
    }
    auto data = e.at("data").get<std::vector<float>>();
    if (data.size() != t->data.size()) throw LoadError("tensor '" + name + "' has the wrong number of values");
    t->data = std::move(data);
  }
}

}  // namespace

ReceiverKind parse_receiver_kind(const std::string& s) {
  if (s == "ls") return ReceiverKind::ls;
  if (s == "lmmse") return ReceiverKind::lmmse;
  if (s == "iedd") return ReceiverKind::iedd;
  if (s == "perfect-csi") return ReceiverKind::perfect_csi;
  if (s == "neural") return ReceiverKind::neural;
  throw ConfigError("unknown receiver '" + s + "' (expected ls, lmmse, iedd, perfect-csi or neural)");
}

std::string to_string(ReceiverKind r) {
  switch (r) {
    case ReceiverKind::ls: return "ls";
    case ReceiverKind::lmmse: return "lmmse";
    case ReceiverKind::iedd: return "iedd";
    case ReceiverKind::perfect_csi: return "perfect-csi";
    case ReceiverKind::neural: return "neural";
  }
  return "?";
}

ExperimentConfig parse_config(const std::string& text) {
  const auto root = parse_json(text, "config");
  if (!root.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig cfg;
  parse_train_sections(root, cfg.train, &cfg.sweep.receiver);
  {
    Section s(root, "code");
    std::string rate = to_string(cfg.code.rate);
    s.read("n", cfg.code.n);
    s.read("rate", rate);
    s.finish();
    cfg.code.rate = parse_code_rate(rate);
  }
  {
    Section s(root, "sweep");
    auto& w = cfg.sweep;
    s.read("snr_db", w.snr_db);
    s.read("speeds", w.speeds);
    s.read("max_frames", w.max_frames);
    s.read("target_block_errors", w.target_block_errors);
    s.read("chunk", w.chunk);
    s.read("decoder_iters", w.decoder_iters);
    s.read("iedd_outer", w.iedd_outer);
    s.read("seed", w.seed);
    s.finish();
    if (w.max_frames < 1 || w.chunk < 1 || w.target_block_errors < 1) {
      throw ConfigError("sweep max_frames, chunk and target_block_errors must be positive");
    }
  }
  cfg.train.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) { return parse_config(read_file(path, false)); }

std::string dump_config(const ExperimentConfig& cfg) {
  auto j = train_sections(cfg.train);
  j["receiver"]["kind"] = to_string(cfg.sweep.receiver);
  j["code"] = {{"n", cfg.code.n}, {"rate", to_string(cfg.code.rate)}};
  const auto& w = cfg.sweep;
  j["sweep"] = {{"snr_db", w.snr_db},
                {"speeds", w.speeds},
                {"max_frames", w.max_frames},
                {"target_block_errors", w.target_block_errors},
                {"chunk", w.chunk},
                {"decoder_iters", w.decoder_iters},
                {"iedd_outer", w.iedd_outer},
                {"seed", w.seed}};
  return j.dump(2);
}

void save_weights(const Model& model, const std::string& path) {
  ordered_json j;
  j["format_version"] = kWeightsFormatVersion;
  j["config"] = train_sections(model.config);
  j["steps_done"] = model.steps_done;
  ordered_json pts = ordered_json::array();
  for (const auto& p : model.constellation.points) pts.push_back({p.real(), p.imag()});
  j["constellation"] = {{"m", model.constellation.m}, {"points", pts}};
  j["modulator"] = network_json(model.modulator);
  j["receiver"] = network_json(model.receiver);
  j["sip_logits"] = model.sip_logits;
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ConfigError("cannot write weights to '" + path + "'");
    out << j.dump();
    if (!out) throw ConfigError("failed while writing '" + path + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw ConfigError("cannot move weights into '" + path + "'");
}

Model load_weights(const std::string& path) {
  ordered_json j;
  try {
    j = ordered_json::parse(read_file(path, true));
  } catch (const nlohmann::json::parse_error& e) {
    throw LoadError("weights file '" + path + "' is corrupt: " + e.what());
  }
  try {
    if (!j.is_object() || !j.contains("format_version")) throw LoadError("'" + path + "' has no format_version");
    const int version = j.at("format_version").get<int>();
    if (version != kWeightsFormatVersion) {
      throw LoadError("weights format version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kWeightsFormatVersion) + ")");
    }
    TrainConfig cfg;
    parse_train_sections(j.at("config"), cfg, nullptr);
    Model model = init_model(cfg);
    model.steps_done = j.at("steps_done").get<int>();
    const auto& c = j.at("constellation");
    CVec pts;
    for (const auto& p : c.at("points")) pts.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    if (static_cast<int>(pts.size()) != (1 << cfg.m)) throw LoadError("constellation size does not match m");
    const bool trainable = model.constellation.trainable;
    model.constellation.points = pts;
    model.constellation.trainable = trainable;
    fill_network(model.modulator, j.at("modulator"), "modulator");
    fill_network(model.receiver, j.at("receiver"), "receiver");
    auto logits = j.at("sip_logits").get<std::vector<float>>();
    if (logits.size() != model.sip_logits.size()) throw LoadError("pilot fraction map has the wrong size");
    model.sip_logits = std::move(logits);
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("weights file '" + path + "' is malformed: " + e.what());
  } catch (const ConfigError& e) {
    throw LoadError("weights file '" + path + "' holds an invalid config: " + e.what());
  }
}

}  // namespace deepofdm
