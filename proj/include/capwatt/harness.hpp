#ifndef CAPWATT_HARNESS_HPP
#define CAPWATT_HARNESS_HPP

// Experiment orchestration over the (supply power, GFF) grid of link setups.
// Each cell: calibrate the link, simulate a training campaign, train a twin,
// run multi-start capacity maximization through the twin, verify the best
// profile on the link model and compare it with the flat reference
// allocations. All artifacts are text files under one output directory and
// are byte-identical across re-runs with the same configuration.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "capwatt/core.hpp"
#include "capwatt/dataset.hpp"
#include "capwatt/io.hpp"
#include "capwatt/linksim.hpp"
#include "capwatt/optimize.hpp"
#include "capwatt/profiles.hpp"
#include "capwatt/twin.hpp"

namespace capwatt {

namespace fs = std::filesystem;

struct Cell {
  std::size_t level_index = 0;
  bool gff = false;
  PowerLevel level;

  std::string name() const { return "pe" + std::to_string(level_index) + (gff ? "_gff" : "_nogff"); }
};

inline std::vector<Cell> experiment_cells(const ExperimentConfig& cfg) {
  std::vector<Cell> out;
  for (std::size_t i = 0; i < cfg.supply_power_levels.size(); ++i)
    for (bool g : cfg.gff_cases) out.push_back({i, g, cfg.supply_power_levels[i]});
  return out;
}

/// Parses "<level index>,<gff>" with gff one of true/false/1/0/gff/nogff.
inline Cell parse_cell(const ExperimentConfig& cfg, const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw ConfigError("--cell expects <pE_index,gff>, got '" + text + "'");
  std::size_t idx = 0;
  try {
    std::size_t used = 0;
    idx = std::stoul(text.substr(0, comma), &used);
    if (used != comma) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ConfigError("--cell: bad power-level index in '" + text + "'");
  }
  if (idx >= cfg.supply_power_levels.size()) throw ConfigError("--cell: power-level index out of range");
  const std::string g = text.substr(comma + 1);
  bool gff = false;
  if (g == "true" || g == "1" || g == "gff")
    gff = true;
  else if (g != "false" && g != "0" && g != "nogff")
    throw ConfigError("--cell: gff must be true or false, got '" + g + "'");
  return {idx, gff, cfg.supply_power_levels[idx]};
}

// Seed streams. Campaign profiles use one stream for every cell, so all
// cells train on the same profile shapes at their own launch power.
inline constexpr std::uint64_t kSeedCampaign = 0xca3a;
inline constexpr std::uint64_t kSeedSplit = 0x5b17;
inline constexpr std::uint64_t kSeedTrain = 0x7a15;

inline std::uint64_t cell_key(const Cell& c) { return 2 * c.level_index + (c.gff ? 1 : 0); }

inline LinkConfig cell_link(const ExperimentConfig& cfg, const Cell& cell) {
  LinkConfig link = cfg.link;
  link.supply_power_w = cell.level.supply_power_w;
  link.wall_plug_efficiency = cell.level.wall_plug_efficiency;
  link.gff_enabled = cell.gff;
  return calibrate_link(link);
}

inline CampaignSpec cell_campaign_spec(const ExperimentConfig& cfg, const LinkConfig& link) {
  CampaignSpec spec = cfg.campaign;
  spec.channel_count = link.grid.channel_count;
  spec.total_power_mw = link.tx_total_mw();
  spec.seed = RngStream::derive(cfg.master_seed, kSeedCampaign).next_u64();
  return spec;
}

/// Seeded shuffle; the first max(1, round(fraction N)) shuffled rows (at most N - 1) validate.
inline std::vector<Split> assign_splits(std::size_t n, double fraction, std::uint64_t seed) {
  std::vector<Split> out(n, Split::train);
  if (n < 2) return out;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  RngStream rng = RngStream::derive(seed, kSeedSplit);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rng.next_u64() % i)]);
  auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  for (std::size_t i = 0; i < n_val; ++i) out[order[i]] = Split::validation;
  return out;
}

/// Oracle measurement of one launch profile: received signal and one-polarization noise in R_s.
inline DatasetRow measure(const PowerProfile& tx, const LinkConfig& link, std::uint64_t id, double excursion_db) {
  const PropagationResult r = propagate(tx, link);
  DatasetRow row;
  row.id = id;
  row.excursion_db = excursion_db;
  row.tx_dbm = tx.values();
  for (std::size_t k = 0; k < tx.size(); ++k) {
    row.signal_dbm.push_back(mw_to_dbm(r.rx.signal_mw[k]));
    row.noise_dbm.push_back(mw_to_dbm(r.rx.noise_mw(k, link.grid.symbol_rate_hz)));
  }
  return row;
}

inline Dataset run_cell_campaign(const ExperimentConfig& cfg, const LinkConfig& link) {
  const CampaignSpec spec = cell_campaign_spec(cfg, link);
  const auto campaign = generate_campaign(spec);
  const auto splits = assign_splits(campaign.size(), cfg.validation_fraction, cfg.master_seed);
  Dataset data;
  data.channel_count = link.grid.channel_count;
  for (std::size_t i = 0; i < campaign.size(); ++i) {
    DatasetRow row = measure(campaign[i].profile, link, i, campaign[i].excursion_db);
    row.split = splits[i];
    data.rows.push_back(std::move(row));
  }
  return data;
}

inline TrainResult train_cell(const ExperimentConfig& cfg, const Cell& cell, const Dataset& data) {
  const std::uint64_t seed = RngStream::derive(cfg.master_seed, kSeedTrain, cell_key(cell)).next_u64();
  TrainResult r = train(data, cfg.layers, cfg.training, seed);
  Json fp = config_to_json(cfg);
  fp["cell"] = cell.name();
  fp["train_seed"] = seed;
  r.model.fingerprint = fingerprint_of(fp.dump());
  return r;
}

struct VerificationRecord {
  PowerProfile profile;
  double predicted_capacity = 0.0;
  double oracle_capacity = 0.0;
  double relative_error = 0.0;  // |C_twin - C_oracle| / C_oracle
  std::vector<double> predicted_snr_db, oracle_snr_db, snr_delta_db;
  double max_inline_dbm = 0.0;
  double oracle_snr_spread_db = 0.0;
};

inline double oracle_capacity(const PowerProfile& tx, const LinkConfig& link) {
  return capacity(propagate(tx, link).snr, link.grid);
}

inline VerificationRecord verify_profile(const PowerProfile& tx, const TwinModel& model, const LinkConfig& link) {
  VerificationRecord v;
  v.profile = tx;
  const PropagationResult r = propagate(tx, link);
  v.oracle_snr_db = r.snr.db();
  v.predicted_snr_db = forward(model, tx).snr_db();
  v.oracle_capacity = capacity(r.snr, link.grid);
  v.predicted_capacity = capacity_from_snr_db(v.predicted_snr_db, link.grid);
  v.relative_error = std::abs(v.predicted_capacity - v.oracle_capacity) / v.oracle_capacity;
  for (std::size_t k = 0; k < tx.size(); ++k) v.snr_delta_db.push_back(v.predicted_snr_db[k] - v.oracle_snr_db[k]);
  v.max_inline_dbm = r.max_inline_dbm;
  auto [lo, hi] = std::minmax_element(v.oracle_snr_db.begin(), v.oracle_snr_db.end());
  v.oracle_snr_spread_db = *hi - *lo;
  return v;
}

struct Baselines {
  PowerProfile flat_tx, flat_rx, flat_snr;
  double flat_tx_capacity = 0.0, flat_rx_capacity = 0.0, flat_snr_capacity = 0.0;
  double flat_rx_deviation_db = 0.0, flat_snr_deviation_db = 0.0;
};

/// Flat TX, flat RX signal and flat SNR allocations, all evaluated on the link model.
inline Baselines run_baselines(const ExperimentConfig& cfg, const LinkConfig& link) {
  Baselines b;
  const double total = link.tx_total_mw();
  b.flat_tx = flat_tx_profile(total, link.grid);
  b.flat_tx_capacity = oracle_capacity(b.flat_tx, link);

  FlattenOracle rx_oracle = [&](const PowerProfile& p) {
    const auto r = propagate(p, link);
    std::vector<double> s;
    for (double v : r.rx.signal_mw) s.push_back(mw_to_dbm(v));
    return s;
  };
  FlattenOracle snr_oracle = [&](const PowerProfile& p) { return propagate(p, link).snr.db(); };
  const FlattenResult rx = flatten(FlattenTarget::rx_signal, rx_oracle, b.flat_tx, total, cfg.flatten);
  const FlattenResult snr = flatten(FlattenTarget::snr, snr_oracle, b.flat_tx, total, cfg.flatten);
  b.flat_rx = rx.profile;
  b.flat_rx_deviation_db = rx.deviation_db;
  b.flat_rx_capacity = oracle_capacity(b.flat_rx, link);
  b.flat_snr = snr.profile;
  b.flat_snr_deviation_db = snr.deviation_db;
  b.flat_snr_capacity = oracle_capacity(b.flat_snr, link);
  return b;
}

struct StartOutcome {
  std::size_t index = 0;
  double start_predicted = 0.0;
  double final_predicted = 0.0;
  double verified = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double snr_spread_db = 0.0;  // oracle, final profile
};

struct MultiStartResult {
  std::vector<StartOutcome> outcomes;
  std::size_t best = 0;               // by predicted final capacity; first index wins ties
  OptimizationResult best_run;
  double verified_spread = 0.0;       // (max - min) / max of verified capacity, converged runs
  std::size_t converged_count = 0;
};

inline MultiStartResult optimize_from_starts(const TwinModel& model, const LinkConfig& link,
                                             const std::vector<PowerProfile>& starts, const GdSettings& gd) {
  if (starts.empty()) throw DomainError("optimize: no start profiles");
  const CapacityObjective obj{link.grid, 1.0};
  const double total = link.tx_total_mw();
  MultiStartResult out;
  double best_c = -1.0;
  double hi = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < starts.size(); ++i) {
    // Campaign profiles carry the total only to round-off; put them exactly on the constraint.
    const PowerProfile start = rescale_to_total(starts[i], total);
    OptimizationResult r = maximize_capacity(model, start, total, gd, obj);
    const PropagationResult oracle = propagate(r.final_profile, link);
    StartOutcome o;
    o.index = i;
    o.start_predicted = r.capacity_trace.front();
    o.final_predicted = r.capacity_trace.back();
    o.verified = capacity(oracle.snr, link.grid);
    o.iterations = r.iterations_used;
    o.converged = r.converged;
    const auto snr = oracle.snr.db();
    auto [smin, smax] = std::minmax_element(snr.begin(), snr.end());
    o.snr_spread_db = *smax - *smin;
    if (o.converged) {
      ++out.converged_count;
      hi = std::max(hi, o.verified);
      lo = std::min(lo, o.verified);
    }
    if (o.final_predicted > best_c) {
      best_c = o.final_predicted;
      out.best = i;
      out.best_run = std::move(r);
    }
    out.outcomes.push_back(o);
  }
  out.verified_spread = out.converged_count ? (hi - lo) / hi : 0.0;
  return out;
}

struct CellResult {
  Cell cell;
  bool ok = false;
  std::string failure;
  int failure_code = 0;  // exit-code class of the failure
  double supply_power_w = 0.0;
  double capacity = 0.0;        // oracle-verified optimized capacity, bit/s
  double merit = 0.0;           // capacity / P_E, bit/s/W
  double twin_error = 0.0;      // relative, at the optimized profile
  double predicted_capacity = 0.0;
  double flat_tx_capacity = 0.0, flat_rx_capacity = 0.0, flat_snr_capacity = 0.0;
  double max_inline_dbm = 0.0;
  double spread = 0.0;
  std::size_t starts = 0, converged_starts = 0;
  double validation_rms_db = 0.0;
  double train_mse = 0.0, validation_mse = 0.0;
  std::size_t best_epoch = 0;
};

struct SweepResult {
  std::vector<CellResult> cells;

  std::size_t failed() const {
    std::size_t n = 0;
    for (const auto& c : cells) n += !c.ok;
    return n;
  }
};

// ---------------------------------------------------------------------------
// Artifact writers. Every number goes through format_double.

namespace detail {

inline std::string csv(std::initializer_list<std::string> cells) {
  std::string line;
  for (const auto& c : cells) {
    if (!line.empty()) line += ',';
    line += c;
  }
  return line + "\n";
}

inline std::string f(double v) { return format_double(v); }

inline void write_series(const fs::path& path, const std::vector<double>& x, const std::vector<double>& y) {
  std::string text = "x,y\n";
  for (std::size_t i = 0; i < x.size(); ++i) text += f(x[i]) + "," + f(y[i]) + "\n";
  write_text_file(path.string(), text);
}

}  // namespace detail

inline std::vector<double> frequencies_thz(const ChannelGrid& g) {
  std::vector<double> f;
  for (std::size_t k = 0; k < g.channel_count; ++k) f.push_back(g.center_frequency(k) * 1e-12);
  return f;
}

inline void write_profile(const fs::path& path, const PowerProfile& p, const ChannelGrid& grid) {
  detail::write_series(path, frequencies_thz(grid), p.values());
}

inline PowerProfile read_profile(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  if (line != "x,y") throw DataError(path.string() + ": expected an x,y series");
  std::vector<double> v;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 2) throw DataError(path.string() + ": malformed row");
    v.push_back(parse_double(cells[1]));
  }
  return PowerProfile(std::move(v));
}

inline void write_training(const fs::path& path, const TrainingReport& rep) {
  std::string text = "epoch,train_mse,validation_mse\n";
  for (std::size_t e = 0; e < rep.train_mse.size(); ++e)
    text += std::to_string(e) + "," + detail::f(rep.train_mse[e]) + "," + detail::f(rep.validation_mse[e]) + "\n";
  write_text_file(path.string(), text);
}

/// Per-row error table plus the predicted-vs-true SNR scatter of the validation rows.
inline void write_evaluation(const fs::path& dir, const EvaluationReport& rep, const Dataset& data,
                             const TwinModel& model) {
  std::string text = "id,F_db,rms_error_db,max_abs_error_db,capacity_relative_error\n";
  for (const auto& r : rep.rows)
    text += std::to_string(r.id) + "," + detail::f(r.excursion_db) + "," + detail::f(r.rms_error_db) + "," +
            detail::f(r.max_abs_error_db) + "," + detail::f(r.capacity_relative_error) + "\n";
  write_text_file((dir / "evaluation.csv").string(), text);

  std::string bins = "F_lower_db,F_upper_db,rows,rms_error_db,max_abs_error_db,mean_capacity_relative_error\n";
  for (const auto& b : rep.bins)
    bins += detail::f(b.lower_db) + "," + detail::f(b.upper_db) + "," + std::to_string(b.rows) + "," +
            detail::f(b.rms_error_db) + "," + detail::f(b.max_abs_error_db) + "," +
            detail::f(b.mean_capacity_relative_error) + "\n";
  write_text_file((dir / "evaluation_by_excursion.csv").string(), bins);

  std::vector<double> truth, predicted;
  for (const auto& row : data.rows) {
    if (row.split != Split::validation) continue;
    const auto p = forward(model, row.tx_dbm).snr_db();
    for (std::size_t k = 0; k < p.size(); ++k) {
      truth.push_back(row.signal_dbm[k] - row.noise_dbm[k]);
      predicted.push_back(p[k]);
    }
  }
  detail::write_series(dir / "snr_scatter.csv", truth, predicted);
}

inline void write_multistart(const fs::path& dir, const MultiStartResult& ms) {
  std::string text = "start,start_predicted_bps,final_predicted_bps,verified_bps,iterations,converged,snr_spread_db\n";
  for (const auto& o : ms.outcomes)
    text += std::to_string(o.index) + "," + detail::f(o.start_predicted) + "," + detail::f(o.final_predicted) + "," +
            detail::f(o.verified) + "," + std::to_string(o.iterations) + "," + (o.converged ? "1" : "0") + "," +
            detail::f(o.snr_spread_db) + "\n";
  write_text_file((dir / "optimization.csv").string(), text);
  std::vector<double> it, c;
  for (std::size_t i = 0; i < ms.best_run.capacity_trace.size(); ++i) {
    it.push_back(static_cast<double>(i));
    c.push_back(ms.best_run.capacity_trace[i]);
  }
  detail::write_series(dir / "capacity_trace.csv", it, c);
}

inline void write_verification(const fs::path& path, const VerificationRecord& v, const ChannelGrid& grid) {
  std::string text = "frequency_thz,tx_dbm,predicted_snr_db,oracle_snr_db,snr_delta_db\n";
  const auto fr = frequencies_thz(grid);
  for (std::size_t k = 0; k < v.profile.size(); ++k)
    text += detail::f(fr[k]) + "," + detail::f(v.profile[k]) + "," + detail::f(v.predicted_snr_db[k]) + "," +
            detail::f(v.oracle_snr_db[k]) + "," + detail::f(v.snr_delta_db[k]) + "\n";
  text += "# predicted_bps=" + detail::f(v.predicted_capacity) + " oracle_bps=" + detail::f(v.oracle_capacity) +
          " relative_error=" + detail::f(v.relative_error) + " max_inline_dbm=" + detail::f(v.max_inline_dbm) + "\n";
  write_text_file(path.string(), text);
}

inline void write_baselines(const fs::path& dir, const Baselines& b, const LinkConfig& link) {
  std::string text = "baseline,capacity_bps,flatness_db\n";
  text += "flat_tx," + detail::f(b.flat_tx_capacity) + ",0\n";
  text += "flat_rx," + detail::f(b.flat_rx_capacity) + "," + detail::f(b.flat_rx_deviation_db) + "\n";
  text += "flat_snr," + detail::f(b.flat_snr_capacity) + "," + detail::f(b.flat_snr_deviation_db) + "\n";
  write_text_file((dir / "baselines.csv").string(), text);
  write_profile(dir / "profile_flat_tx.csv", b.flat_tx, link.grid);
  write_profile(dir / "profile_flat_rx.csv", b.flat_rx, link.grid);
  write_profile(dir / "profile_flat_snr.csv", b.flat_snr, link.grid);
}

inline std::vector<PowerProfile> dataset_profiles(const Dataset& data, std::size_t limit = 0) {
  std::vector<PowerProfile> out;
  for (const auto& r : data.rows) {
    if (limit && out.size() == limit) break;
    out.emplace_back(r.tx_dbm);
  }
  return out;
}

using Logger = std::function<void(const std::string&)>;

/// Full pipeline for one cell; artifacts go to `dir`.
inline CellResult run_cell(const ExperimentConfig& cfg, const Cell& cell, const fs::path& dir, const Logger& log = {}) {
  auto say = [&](const std::string& s) {
    if (log) log(cell.name() + ": " + s);
  };
  CellResult res;
  res.cell = cell;
  res.supply_power_w = cell.level.supply_power_w;
  fs::create_directories(dir);

  const LinkConfig link = cell_link(cfg, cell);
  for (const auto& w : link.warnings) say("warning: " + w);
  say("campaign");
  const Dataset data = run_cell_campaign(cfg, link);
  save_dataset((dir / "dataset.csv").string(), data);

  say("training");
  const TrainResult tr = train_cell(cfg, cell, data);
  save_model((dir / "model.json").string(), tr.model);
  write_training(dir / "training.csv", tr.report);
  res.best_epoch = tr.report.best_epoch;
  res.train_mse = tr.report.train_mse[tr.report.best_epoch];
  res.validation_mse = tr.report.validation_mse[tr.report.best_epoch];

  const EvaluationReport ev = evaluate(tr.model, data, link.grid, Split::validation);
  write_evaluation(dir, ev, data, tr.model);
  res.validation_rms_db = ev.rms_error_db;

  say("optimizing");
  const MultiStartResult ms = optimize_from_starts(tr.model, link, dataset_profiles(data, cfg.start_count), cfg.gd);
  write_multistart(dir, ms);
  res.starts = ms.outcomes.size();
  res.converged_starts = ms.converged_count;
  res.spread = ms.verified_spread;

  const VerificationRecord v = verify_profile(ms.best_run.final_profile, tr.model, link);
  write_profile(dir / "profile_optimized.csv", v.profile, link.grid);
  write_verification(dir / "verification.csv", v, link.grid);
  res.capacity = v.oracle_capacity;
  res.predicted_capacity = v.predicted_capacity;
  res.merit = figure_of_merit(v.oracle_capacity, cell.level.supply_power_w);
  res.twin_error = v.relative_error;
  res.max_inline_dbm = v.max_inline_dbm;

  say("baselines");
  const Baselines b = run_baselines(cfg, link);
  write_baselines(dir, b, link);
  res.flat_tx_capacity = b.flat_tx_capacity;
  res.flat_rx_capacity = b.flat_rx_capacity;
  res.flat_snr_capacity = b.flat_snr_capacity;

  const auto fr = frequencies_thz(link.grid);
  detail::write_series(dir / "snr_flat_tx.csv", fr, propagate(b.flat_tx, link).snr.db());
  detail::write_series(dir / "snr_optimized.csv", fr, v.oracle_snr_db);
  res.ok = true;
  say("C = " + std::to_string(res.capacity * 1e-12) + " Tb/s, m = " + std::to_string(res.merit * 1e-12) +
      " Tb/s/W");
  return res;
}

inline int failure_code(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DataError*>(&e)) return 1;
  return 2;
}

inline void write_summary(const fs::path& out, const ExperimentConfig& cfg, const SweepResult& sweep) {
  std::string text =
      "cell,supply_power_w,wall_plug_efficiency,gff,status,capacity_bps,merit_bps_per_w,predicted_capacity_bps,"
      "twin_relative_error,flat_tx_bps,flat_rx_bps,flat_snr_bps,max_inline_dbm,starts,converged_starts,"
      "verified_spread,validation_rms_db,train_mse,validation_mse,best_epoch\n";
  for (const auto& c : sweep.cells) {
    using detail::f;
    text += c.cell.name() + "," + f(c.cell.level.supply_power_w) + "," + f(c.cell.level.wall_plug_efficiency) + "," +
            (c.cell.gff ? "1" : "0") + "," + (c.ok ? "ok" : "failed");
    if (c.ok)
      text += "," + f(c.capacity) + "," + f(c.merit) + "," + f(c.predicted_capacity) + "," + f(c.twin_error) + "," +
              f(c.flat_tx_capacity) + "," + f(c.flat_rx_capacity) + "," + f(c.flat_snr_capacity) + "," +
              f(c.max_inline_dbm) + "," + std::to_string(c.starts) + "," + std::to_string(c.converged_starts) +
              "," + f(c.spread) + "," + f(c.validation_rms_db) + "," + f(c.train_mse) + "," + f(c.validation_mse) +
              "," + std::to_string(c.best_epoch);
    else
      text += ",,,,,,,,,,,,,,,";
    text += "\n";
  }
  write_text_file((out / "summary.csv").string(), text);

  std::string failures;
  for (const auto& c : sweep.cells)
    if (!c.ok) failures += c.cell.name() + ": " + c.failure + "\n";
  if (!failures.empty()) write_text_file((out / "failures.txt").string(), failures);

  // GFF-removal gain per power level, and the capacity / merit series against P_E.
  std::string gain = "supply_power_w,merit_gff,merit_nogff,gff_removal_gain,reference_gain\n";
  std::vector<double> pe_g, c_g, m_g, pe_n, c_n, m_n;
  for (std::size_t i = 0; i < cfg.supply_power_levels.size(); ++i) {
    const CellResult* with = nullptr;
    const CellResult* without = nullptr;
    for (const auto& c : sweep.cells) {
      if (c.cell.level_index != i || !c.ok) continue;
      (c.cell.gff ? with : without) = &c;
      (c.cell.gff ? pe_g : pe_n).push_back(c.supply_power_w);
      (c.cell.gff ? c_g : c_n).push_back(c.capacity);
      (c.cell.gff ? m_g : m_n).push_back(c.merit);
    }
    if (with && without)
      gain += detail::f(cfg.supply_power_levels[i].supply_power_w) + "," + detail::f(with->merit) + "," +
              detail::f(without->merit) + "," + detail::f((without->merit - with->merit) / with->merit) + ",0.19\n";
  }
  write_text_file((out / "gff_gain.csv").string(), gain);
  detail::write_series(out / "capacity_vs_pe_gff.csv", pe_g, c_g);
  detail::write_series(out / "capacity_vs_pe_nogff.csv", pe_n, c_n);
  detail::write_series(out / "merit_vs_pe_gff.csv", pe_g, m_g);
  detail::write_series(out / "merit_vs_pe_nogff.csv", pe_n, m_n);
}

/// Runs every configured cell (or only `only`), recording per-cell failures.
inline SweepResult run_sweep(const ExperimentConfig& cfg, const fs::path& out, std::optional<Cell> only = std::nullopt,
                             const Logger& log = {}) {
  cfg.validate();
  fs::create_directories(out);
  write_text_file((out / "config.json").string(), config_to_json(cfg).dump(2) + "\n");
  SweepResult sweep;
  for (const Cell& cell : experiment_cells(cfg)) {
    if (only && (only->level_index != cell.level_index || only->gff != cell.gff)) continue;
    try {
      sweep.cells.push_back(run_cell(cfg, cell, out / cell.name(), log));
    } catch (const std::exception& e) {
      CellResult r;
      r.cell = cell;
      r.supply_power_w = cell.level.supply_power_w;
      r.failure = e.what();
      r.failure_code = failure_code(e);
      if (log) log(cell.name() + ": failed: " + r.failure);
      sweep.cells.push_back(r);
    }
  }
  write_summary(out, cfg, sweep);
  return sweep;
}

/// 0 all cells ok, 3 some failed, otherwise the failure class of the first failed cell.
inline int sweep_exit_code(const SweepResult& s) {
  if (s.failed() == 0) return 0;
  if (s.failed() < s.cells.size()) return 3;
  return s.cells.front().failure_code;
}

}  // namespace capwatt

#endif  // CAPWATT_HARNESS_HPP
