#ifndef CAPWATT_IO_HPP
#define CAPWATT_IO_HPP

// JSON persistence: experiment configuration (strict, unknown keys rejected)
// and trained twin models. Doubles are written in shortest round-trip form so
// a saved model reloads bit-exactly.

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "capwatt/core.hpp"
#include "capwatt/linksim.hpp"
#include "capwatt/optimize.hpp"
#include "capwatt/profiles.hpp"
#include "capwatt/twin.hpp"

namespace capwatt {

using Json = nlohmann::json;

struct PowerLevel {
  double supply_power_w = 2.27;
  double wall_plug_efficiency = 0.066;
  bool operator==(const PowerLevel&) const = default;
};

struct ExperimentConfig {
  LinkConfig link;  // template: supply power, efficiency and GFF flag are set per cell
  EdfaShape edfa_shape;
  std::vector<PowerLevel> supply_power_levels{{1.09, 0.027}, {2.27, 0.066}, {7.53, 0.082}};
  std::vector<bool> gff_cases{true, false};
  CampaignSpec campaign;  // channel_count and total_power_mw are filled per cell
  LayerSpec layers;
  TrainSettings training;
  GdSettings gd;
  FlattenSettings flatten;
  std::size_t start_count = 0;  // multi-start runs per cell; 0 = every campaign profile
  double validation_fraction = 0.1;
  std::uint64_t master_seed = 1;

  ExperimentConfig() { link.edfa = default_edfa_params(link.grid, edfa_shape); }

  void validate() const {
    if (supply_power_levels.empty()) throw ConfigError("config: at least one supply power level is required");
    if (gff_cases.empty()) throw ConfigError("config: at least one gff case is required");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
      throw ConfigError("config: validation_fraction must lie in (0, 1)");
    try {
      for (const auto& lvl : supply_power_levels) {
        LinkConfig c = link;
        c.supply_power_w = lvl.supply_power_w;
        c.wall_plug_efficiency = lvl.wall_plug_efficiency;
        c.validate();
      }
      CampaignSpec cs = campaign;
      cs.channel_count = link.grid.channel_count;
      cs.validate();
      layers.validate(link.grid.channel_count);
      gd.validate();
      if (training.batch_size < 1 || training.max_epochs < 1) throw DomainError("training: batch and epochs >= 1");
      if (!(flatten.damping > 0.0 && flatten.damping <= 1.0)) throw DomainError("flatten: damping must be in (0, 1]");
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
};

namespace detail {

inline void check_keys(const Json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw ConfigError("config: unknown key '" + where + (where.empty() ? "" : ".") + key + "'");
}

template <typename T>
void read_field(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError("config: bad value for '" + where + "." + key + "': " + e.what());
  }
}

}  // namespace detail

inline ExperimentConfig config_from_json(const Json& j) {
  using detail::check_keys;
  using detail::read_field;
  ExperimentConfig c;
  check_keys(j, "", {"link", "supply_power_levels", "gff_cases", "campaign", "twin", "gd", "flatten", "start_count",
                     "validation_fraction", "master_seed"});

  if (j.contains("link")) {
    const Json& l = j["link"];
    check_keys(l, "link", {"grid", "edfa", "span_count", "inline_edfa_count", "span_loss_db", "tx_snr_db",
                           "gff_excess_loss_db"});
    if (l.contains("grid")) {
      const Json& g = l["grid"];
      check_keys(g, "link.grid", {"channel_count", "slot_width_hz", "channel_spacing_hz", "start_frequency_hz",
                                  "symbol_rate_hz"});
      read_field(g, "channel_count", c.link.grid.channel_count, "link.grid");
      read_field(g, "slot_width_hz", c.link.grid.slot_width_hz, "link.grid");
      read_field(g, "channel_spacing_hz", c.link.grid.channel_spacing_hz, "link.grid");
      read_field(g, "start_frequency_hz", c.link.grid.start_frequency_hz, "link.grid");
      read_field(g, "symbol_rate_hz", c.link.grid.symbol_rate_hz, "link.grid");
    }
    double nsp_max = 10.0;
    if (l.contains("edfa")) {
      const Json& e = l["edfa"];
      check_keys(e, "link.edfa", {"absorption_base_db", "gain_star_base_db", "nsp_max"});
      read_field(e, "absorption_base_db", c.edfa_shape.absorption_base_db, "link.edfa");
      read_field(e, "gain_star_base_db", c.edfa_shape.gain_star_base_db, "link.edfa");
      read_field(e, "nsp_max", nsp_max, "link.edfa");
    }
    read_field(l, "span_count", c.link.span_count, "link");
    read_field(l, "inline_edfa_count", c.link.inline_edfa_count, "link");
    read_field(l, "span_loss_db", c.link.span_loss_db, "link");
    read_field(l, "tx_snr_db", c.link.tx_snr_db, "link");
    read_field(l, "gff_excess_loss_db", c.link.gff_excess_loss_db, "link");
    try {
      c.link.grid.validate();
    } catch (const Error& err) {
      throw ConfigError(std::string("config: ") + err.what());
    }
    c.link.edfa = default_edfa_params(c.link.grid, c.edfa_shape);
    c.link.edfa.nsp_max = nsp_max;
  }

  if (j.contains("supply_power_levels")) {
    const Json& levels = j["supply_power_levels"];
    if (!levels.is_array()) throw ConfigError("config: supply_power_levels must be an array");
    c.supply_power_levels.clear();
    for (const Json& lvl : levels) {
      check_keys(lvl, "supply_power_levels[]", {"supply_power_w", "wall_plug_efficiency"});
      if (!lvl.contains("supply_power_w") || !lvl.contains("wall_plug_efficiency"))
        throw ConfigError("config: each supply power level needs supply_power_w and wall_plug_efficiency");
      PowerLevel p;
      read_field(lvl, "supply_power_w", p.supply_power_w, "supply_power_levels[]");
      read_field(lvl, "wall_plug_efficiency", p.wall_plug_efficiency, "supply_power_levels[]");
      c.supply_power_levels.push_back(p);
    }
  }
  if (j.contains("gff_cases")) {
    c.gff_cases.clear();
    std::vector<bool> cases;
    read_field(j, "gff_cases", cases, "");
    c.gff_cases = cases;
  }

  if (j.contains("campaign")) {
    const Json& s = j["campaign"];
    check_keys(s, "campaign", {"profile_count", "excursion_min_db", "excursion_max_db", "smoothing_window",
                               "pool_factor"});
    read_field(s, "profile_count", c.campaign.profile_count, "campaign");
    read_field(s, "excursion_min_db", c.campaign.excursion_min_db, "campaign");
    read_field(s, "excursion_max_db", c.campaign.excursion_max_db, "campaign");
    read_field(s, "smoothing_window", c.campaign.smoothing_window, "campaign");
    read_field(s, "pool_factor", c.campaign.pool_factor, "campaign");
  }

  if (j.contains("twin")) {
    const Json& t = j["twin"];
    check_keys(t, "twin", {"widths", "activations", "learning_rate", "beta1", "beta2", "epsilon", "batch_size",
                           "patience", "max_epochs", "input_feature", "signal_target"});
    read_field(t, "widths", c.layers.widths, "twin");
    if (t.contains("activations")) {
      std::vector<std::string> names;
      read_field(t, "activations", names, "twin");
      c.layers.activations.clear();
      for (const auto& n : names) c.layers.activations.push_back(parse_activation(n));
    }
    read_field(t, "learning_rate", c.training.learning_rate, "twin");
    read_field(t, "beta1", c.training.beta1, "twin");
    read_field(t, "beta2", c.training.beta2, "twin");
    read_field(t, "epsilon", c.training.epsilon, "twin");
    read_field(t, "batch_size", c.training.batch_size, "twin");
    read_field(t, "patience", c.training.patience, "twin");
    read_field(t, "max_epochs", c.training.max_epochs, "twin");
    if (t.contains("input_feature")) {
      std::string f;
      read_field(t, "input_feature", f, "twin");
      c.training.input_feature = parse_input_feature(f);
    }
    if (t.contains("signal_target")) {
      std::string f;
      read_field(t, "signal_target", f, "twin");
      c.training.signal_target = parse_signal_target(f);
    }
  }

  if (j.contains("gd")) {
    const Json& g = j["gd"];
    check_keys(g, "gd", {"max_iterations", "step_db", "normalization", "stop_tolerance", "plateau_window",
                         "clamp_margin_db", "beta1", "beta2", "epsilon"});
    read_field(g, "max_iterations", c.gd.max_iterations, "gd");
    read_field(g, "step_db", c.gd.step_db, "gd");
    if (g.contains("normalization")) {
      std::string n;
      read_field(g, "normalization", n, "gd");
      if (n == "max_abs")
        c.gd.normalization = StepNormalization::max_abs;
      else if (n == "adam")
        c.gd.normalization = StepNormalization::adam;
      else
        throw ConfigError("config: gd.normalization must be 'max_abs' or 'adam'");
    }
    read_field(g, "stop_tolerance", c.gd.stop_tolerance, "gd");
    read_field(g, "plateau_window", c.gd.plateau_window, "gd");
    read_field(g, "clamp_margin_db", c.gd.clamp_margin_db, "gd");
    read_field(g, "beta1", c.gd.beta1, "gd");
    read_field(g, "beta2", c.gd.beta2, "gd");
    read_field(g, "epsilon", c.gd.epsilon, "gd");
  }

  if (j.contains("flatten")) {
    const Json& f = j["flatten"];
    check_keys(f, "flatten", {"damping", "tolerance_db", "max_iterations"});
    read_field(f, "damping", c.flatten.damping, "flatten");
    read_field(f, "tolerance_db", c.flatten.tolerance_db, "flatten");
    read_field(f, "max_iterations", c.flatten.max_iterations, "flatten");
  }

  read_field(j, "start_count", c.start_count, "");
  read_field(j, "validation_fraction", c.validation_fraction, "");
  read_field(j, "master_seed", c.master_seed, "");
  c.validate();
  return c;
}

inline Json config_to_json(const ExperimentConfig& c) {
  Json j;
  const auto& g = c.link.grid;
  j["link"] = {{"grid",
                {{"channel_count", g.channel_count},
                 {"slot_width_hz", g.slot_width_hz},
                 {"channel_spacing_hz", g.channel_spacing_hz},
                 {"start_frequency_hz", g.start_frequency_hz},
                 {"symbol_rate_hz", g.symbol_rate_hz}}},
               {"edfa",
                {{"absorption_base_db", c.edfa_shape.absorption_base_db},
                 {"gain_star_base_db", c.edfa_shape.gain_star_base_db},
                 {"nsp_max", c.link.edfa.nsp_max}}},
               {"span_count", c.link.span_count},
               {"inline_edfa_count", c.link.inline_edfa_count},
               {"span_loss_db", c.link.span_loss_db},
               {"tx_snr_db", c.link.tx_snr_db},
               {"gff_excess_loss_db", c.link.gff_excess_loss_db}};
  j["supply_power_levels"] = Json::array();
  for (const auto& l : c.supply_power_levels)
    j["supply_power_levels"].push_back({{"supply_power_w", l.supply_power_w},
                                        {"wall_plug_efficiency", l.wall_plug_efficiency}});
  j["gff_cases"] = c.gff_cases;
  j["campaign"] = {{"profile_count", c.campaign.profile_count},
                   {"excursion_min_db", c.campaign.excursion_min_db},
                   {"excursion_max_db", c.campaign.excursion_max_db},
                   {"smoothing_window", c.campaign.smoothing_window},
                   {"pool_factor", c.campaign.pool_factor}};
  std::vector<std::string> acts;
  for (auto a : c.layers.activations) acts.emplace_back(to_string(a));
  j["twin"] = {{"widths", c.layers.widths},
               {"activations", acts},
               {"learning_rate", c.training.learning_rate},
               {"beta1", c.training.beta1},
               {"beta2", c.training.beta2},
               {"epsilon", c.training.epsilon},
               {"batch_size", c.training.batch_size},
               {"patience", c.training.patience},
               {"max_epochs", c.training.max_epochs},
               {"input_feature", std::string(to_string(c.training.input_feature))},
               {"signal_target", std::string(to_string(c.training.signal_target))}};
  j["gd"] = {{"max_iterations", c.gd.max_iterations},
             {"step_db", c.gd.step_db},
             {"normalization", c.gd.normalization == StepNormalization::adam ? "adam" : "max_abs"},
             {"stop_tolerance", c.gd.stop_tolerance},
             {"plateau_window", c.gd.plateau_window},
             {"clamp_margin_db", c.gd.clamp_margin_db},
             {"beta1", c.gd.beta1},
             {"beta2", c.gd.beta2},
             {"epsilon", c.gd.epsilon}};
  j["flatten"] = {{"damping", c.flatten.damping},
                  {"tolerance_db", c.flatten.tolerance_db},
                  {"max_iterations", c.flatten.max_iterations}};
  j["start_count"] = c.start_count;
  j["validation_fraction"] = c.validation_fraction;
  j["master_seed"] = c.master_seed;
  return j;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open " + path);
  try {
    return Json::parse(is);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline ExperimentConfig load_config(const std::string& path) { return config_from_json(read_json_file(path)); }

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path + " for writing");
  os << text;
}

// ---------------------------------------------------------------------------
// Twin models

inline Json model_to_json(const TwinModel& m) {
  Json j;
  std::vector<std::string> acts;
  for (auto a : m.layer_spec.activations) acts.emplace_back(to_string(a));
  j["layer_spec"] = {{"widths", m.layer_spec.widths}, {"activations", acts}};
  j["input_feature"] = std::string(to_string(m.input_feature));
  j["signal_target"] = std::string(to_string(m.signal_target));
  j["layers"] = Json::array();
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    const auto& w = m.weights[l];
    std::vector<double> flat;  // row-major
    flat.reserve(static_cast<std::size_t>(w.size()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    std::vector<double> b(m.biases[l].data(), m.biases[l].data() + m.biases[l].size());
    j["layers"].push_back({{"rows", w.rows()}, {"cols", w.cols()}, {"weights", flat}, {"biases", b}});
  }
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  j["input_mean"] = vec(m.input_mean);
  j["input_std"] = vec(m.input_std);
  j["output_mean"] = vec(m.output_mean);
  j["output_std"] = vec(m.output_std);
  j["envelope_min_dbm"] = m.envelope_min_dbm;
  j["envelope_max_dbm"] = m.envelope_max_dbm;
  j["fingerprint"] = m.fingerprint;
  return j;
}

inline TwinModel model_from_json(const Json& j) {
  try {
    TwinModel m;
    m.layer_spec.widths = j.at("layer_spec").at("widths").get<std::vector<int>>();
    m.layer_spec.activations.clear();
    for (const auto& a : j.at("layer_spec").at("activations")) m.layer_spec.activations.push_back(parse_activation(a.get<std::string>()));
    m.input_feature = parse_input_feature(j.at("input_feature").get<std::string>());
    m.signal_target = parse_signal_target(j.at("signal_target").get<std::string>());
    for (const auto& layer : j.at("layers")) {
      const auto rows = layer.at("rows").get<Eigen::Index>();
      const auto cols = layer.at("cols").get<Eigen::Index>();
      const auto flat = layer.at("weights").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(flat.size()) != rows * cols) throw DataError("model: weight array size mismatch");
      Eigen::MatrixXd w(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
      const auto b = layer.at("biases").get<std::vector<double>>();
      m.weights.push_back(std::move(w));
      m.biases.push_back(Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size())));
    }
    auto vec = [&](const char* key) {
      const auto v = j.at(key).get<std::vector<double>>();
      return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    };
    m.input_mean = vec("input_mean");
    m.input_std = vec("input_std");
    m.output_mean = vec("output_mean");
    m.output_std = vec("output_std");
    m.envelope_min_dbm = j.at("envelope_min_dbm").get<std::vector<double>>();
    m.envelope_max_dbm = j.at("envelope_max_dbm").get<std::vector<double>>();
    m.fingerprint = j.value("fingerprint", "");
    m.validate();
    return m;
  } catch (const Json::exception& e) {
    throw DataError(std::string("model: ") + e.what());
  } catch (const ShapeError& e) {
    throw DataError(std::string("model: ") + e.what());
  }
}

inline void save_model(const std::string& path, const TwinModel& m) { write_text_file(path, model_to_json(m).dump(1) + "\n"); }

inline TwinModel load_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path);
  try {
    return model_from_json(Json::parse(is));
  } catch (const Json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
}

/// FNV-1a over a canonical text, printed as 16 hex digits.
inline std::string fingerprint_of(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

}  // namespace capwatt

#endif  // CAPWATT_IO_HPP
