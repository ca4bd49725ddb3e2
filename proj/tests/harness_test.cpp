#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "capwatt/harness.hpp"

using namespace capwatt;

namespace {

std::string source_dir() {
  const char* s = std::getenv("CAPWATT_SOURCE_DIR");
  return s ? s : ".";
}

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.supply_power_levels = {{2.27, 0.066}};
  c.gff_cases = {false};
  c.campaign.profile_count = 12;
  c.training.max_epochs = 5;
  c.gd.max_iterations = 5;
  return c;
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("capwatt_harness_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Splits, SmallestCampaignSplitsOneOne) {
  auto s = assign_splits(2, 0.1, 5);
  EXPECT_EQ(std::count(s.begin(), s.end(), Split::validation), 1);
  EXPECT_EQ(std::count(s.begin(), s.end(), Split::train), 1);
}

TEST(Splits, NinetyTenWithinOneRow) {
  for (std::size_t n : {10u, 37u, 1440u}) {
    auto s = assign_splits(n, 0.1, 9);
    const auto val = static_cast<double>(std::count(s.begin(), s.end(), Split::validation));
    EXPECT_LE(std::abs(val - 0.1 * static_cast<double>(n)), 1.0);
  }
  EXPECT_EQ(assign_splits(50, 0.1, 3), assign_splits(50, 0.1, 3));
  EXPECT_NE(assign_splits(50, 0.1, 3), assign_splits(50, 0.1, 4));
}

TEST(Campaign, TwoProfileDataset) {
  ExperimentConfig c = tiny_config();
  c.campaign.profile_count = 2;
  const LinkConfig link = cell_link(c, experiment_cells(c).front());
  Dataset d = run_cell_campaign(c, link);
  ASSERT_EQ(d.rows.size(), 2u);
  EXPECT_EQ(d.count(Split::train), 1u);
  EXPECT_EQ(d.count(Split::validation), 1u);
}

TEST(Campaign, ByteIdenticalForSameSeed) {
  ExperimentConfig c = tiny_config();
  const LinkConfig link = cell_link(c, experiment_cells(c).front());
  std::stringstream a, b;
  write_dataset(a, run_cell_campaign(c, link));
  write_dataset(b, run_cell_campaign(c, link));
  EXPECT_EQ(a.str(), b.str());
  c.master_seed += 1;
  std::stringstream other;
  write_dataset(other, run_cell_campaign(c, link));
  EXPECT_NE(a.str(), other.str());
}

TEST(Campaign, RowsMatchTheOracle) {
  ExperimentConfig c = tiny_config();
  const LinkConfig link = cell_link(c, experiment_cells(c).front());
  Dataset d = run_cell_campaign(c, link);
  for (const auto& row : d.rows) {
    const auto r = propagate(PowerProfile(row.tx_dbm), link);
    const auto snr = r.snr.db();
    for (std::size_t k = 0; k < snr.size(); ++k) EXPECT_NEAR(row.signal_dbm[k] - row.noise_dbm[k], snr[k], 1e-9);
  }
}

TEST(Config, ShippedFilesLoad) {
  ExperimentConfig d = load_config(source_dir() + "/configs/default.json");
  EXPECT_EQ(d.supply_power_levels.size(), 3u);
  EXPECT_EQ(d.campaign.profile_count, 1440u);
  EXPECT_EQ(d.gd.max_iterations, 300u);
  ExperimentConfig s = load_config(source_dir() + "/configs/smoke.json");
  EXPECT_EQ(experiment_cells(s).size(), 2u);
  EXPECT_EQ(s.campaign.profile_count, 10u);
  EXPECT_EQ(s.gd.max_iterations, 20u);
}

TEST(Config, UnknownKeysAreErrors) {
  EXPECT_THROW(config_from_json(Json::parse(R"({"bogus": 1})")), ConfigError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"gd": {"step": 0.1}})")), ConfigError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"link": {"edfa": {"alpha": 7}}})")), ConfigError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"gd": {"step_db": "big"}})")), ConfigError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"gff_cases": []})")), ConfigError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"twin": {"widths": [40, 80, 40]}})")), ConfigError);
}

TEST(Config, JsonRoundTrip) {
  ExperimentConfig c = load_config(source_dir() + "/configs/smoke.json");
  ExperimentConfig back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back).dump(), config_to_json(c).dump());
}

TEST(Cells, Parsing) {
  ExperimentConfig c;
  Cell x = parse_cell(c, "1,false");
  EXPECT_EQ(x.level_index, 1u);
  EXPECT_FALSE(x.gff);
  EXPECT_TRUE(parse_cell(c, "2,1").gff);
  EXPECT_EQ(parse_cell(c, "0,gff").name(), "pe0_gff");
  EXPECT_THROW(parse_cell(c, "3,true"), ConfigError);
  EXPECT_THROW(parse_cell(c, "1"), ConfigError);
  EXPECT_THROW(parse_cell(c, "1,maybe"), ConfigError);
}

TEST(Model, SaveLoadIsExact) {
  ExperimentConfig c = tiny_config();
  const Cell cell = experiment_cells(c).front();
  const LinkConfig link = cell_link(c, cell);
  TrainResult r = train_cell(c, cell, run_cell_campaign(c, link));
  fs::path dir = scratch("model");
  fs::create_directories(dir);
  save_model((dir / "m.json").string(), r.model);
  TwinModel back = load_model((dir / "m.json").string());
  for (std::size_t l = 0; l < back.weights.size(); ++l) {
    EXPECT_TRUE(back.weights[l] == r.model.weights[l]);
    EXPECT_TRUE(back.biases[l] == r.model.biases[l]);
  }
  EXPECT_TRUE(back.output_std == r.model.output_std);
  EXPECT_EQ(back.fingerprint, r.model.fingerprint);
  EXPECT_EQ(back.fingerprint.size(), 16u);
  EXPECT_THROW(model_from_json(Json::parse(R"({"layer_spec": {}})")), DataError);
}

TEST(Verify, LookupModelHasZeroError) {
  ExperimentConfig c = tiny_config();
  const LinkConfig link = cell_link(c, experiment_cells(c).front());
  const PowerProfile tx = flat_tx_profile(link.tx_total_mw(), link.grid);
  const DatasetRow row = measure(tx, link, 0, 0.0);
  LayerSpec spec;
  TwinModel m = initialize_twin(spec, 1);
  m.signal_target = SignalTarget::absolute_dbm;
  for (auto& w : m.weights) w.setZero();
  for (std::size_t k = 0; k < 40; ++k) {
    m.output_mean(static_cast<Eigen::Index>(k)) = row.signal_dbm[k];
    m.output_mean(static_cast<Eigen::Index>(k + 40)) = row.noise_dbm[k];
  }
  VerificationRecord v = verify_profile(tx, m, link);
  EXPECT_NEAR(v.relative_error, 0.0, 1e-14);
  for (double d : v.snr_delta_db) EXPECT_NEAR(d, 0.0, 1e-12);
}

TEST(Sweep, SmokeConfigCompletesWithInvariants) {
  ExperimentConfig c = load_config(source_dir() + "/configs/smoke.json");
  fs::path out = scratch("smoke");
  SweepResult s = run_sweep(c, out);
  ASSERT_EQ(s.cells.size(), 2u);
  EXPECT_EQ(sweep_exit_code(s), 0);
  for (const auto& cell : s.cells) {
    ASSERT_TRUE(cell.ok) << cell.failure;
    EXPECT_DOUBLE_EQ(cell.merit, cell.capacity / cell.supply_power_w);
    EXPECT_EQ(cell.starts, 10u);
    for (const char* f : {"dataset.csv", "model.json", "training.csv", "evaluation.csv", "snr_scatter.csv",
                          "optimization.csv", "capacity_trace.csv", "verification.csv", "baselines.csv",
                          "profile_optimized.csv", "snr_flat_tx.csv", "snr_optimized.csv"})
      EXPECT_TRUE(fs::exists(out / cell.cell.name() / f)) << f;
    Dataset back = load_dataset((out / cell.cell.name() / "dataset.csv").string());
    EXPECT_EQ(back.rows.size(), 10u);
  }
  EXPECT_TRUE(fs::exists(out / "summary.csv"));
  EXPECT_TRUE(fs::exists(out / "gff_gain.csv"));
  PowerProfile opt = read_profile(out / s.cells[0].cell.name() / "profile_optimized.csv");
  EXPECT_EQ(opt.size(), 40u);
}

TEST(Sweep, FailedCellsAreRecorded) {
  ExperimentConfig c = tiny_config();
  c.gff_cases = {true, false};
  c.link.gff_excess_loss_db = 12.0;  // the filter's loss can no longer be made up by the amplifier
  fs::path out = scratch("failed");
  SweepResult s = run_sweep(c, out);
  ASSERT_EQ(s.cells.size(), 2u);
  for (const auto& cell : s.cells) {
    EXPECT_FALSE(cell.ok);
    EXPECT_NE(cell.failure.find("unreachable"), std::string::npos) << cell.failure;
  }
  EXPECT_EQ(sweep_exit_code(s), 2);
  EXPECT_TRUE(fs::exists(out / "failures.txt"));
  EXPECT_TRUE(fs::exists(out / "summary.csv"));
}

TEST(Sweep, ExitCodes) {
  SweepResult s;
  s.cells.resize(2);
  s.cells[0].ok = s.cells[1].ok = true;
  EXPECT_EQ(sweep_exit_code(s), 0);
  s.cells[1].ok = false;
  s.cells[1].failure_code = 2;
  EXPECT_EQ(sweep_exit_code(s), 3);
  s.cells[0].ok = false;
  s.cells[0].failure_code = 1;
  EXPECT_EQ(sweep_exit_code(s), 1);
}
