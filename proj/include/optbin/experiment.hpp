#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "optbin/features.hpp"
#include "optbin/gbt.hpp"
#include "optbin/labels.hpp"
#include "optbin/market_data.hpp"
#include "optbin/metrics.hpp"
#include "optbin/mlp.hpp"
#include "optbin/simulator.hpp"

namespace optbin {

enum class Learner { Ann, Gbt, Ensemble };

Learner learner_from_string(const std::string& s);
std::string to_string(Learner l);

/// Typed view of the JSON experiment document. Unset keys take defaults.
struct ExperimentConfig {
    std::filesystem::path underlying_csv;
    std::filesystem::path options_csv;
    std::filesystem::path yields_csv;
    std::vector<std::filesystem::path> datasets;
    std::filesystem::path model_path;
    std::filesystem::path out_dir = "out";
    std::string split = "test";  // dataset part scored by evaluate: train | test | all
    Approach approach = Approach::I;
    Learner learner = Learner::Ann;
    BinConfig bins{};
    double train_fraction = 0.7;
    std::uint64_t seed = 0;
    MlpTrainConfig mlp{};
    GbtConfig gbt{};
    SweepConfig sweep{};
    std::vector<double> widths;
    GbmConfig simulate{};  // source process for the simulate command

    nlohmann::json source;  // normalized document the hash is computed from
    std::string hash;

    static ExperimentConfig from_json(const nlohmann::json& doc);
};

/// FNV-1a 64 over the canonical JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& doc);

/// Per-stage seed derived from the root seed and a stage name.
std::uint64_t derive_seed(std::uint64_t root, const std::string& stage);

// Dataset file: both split halves plus ingest drop counts.
nlohmann::json record_to_json(const ContractRecord& r);
ContractRecord record_from_json(const nlohmann::json& j);
void save_dataset(const std::filesystem::path& path, const SplitDataset& data, const DropCounts& drops,
                  const std::string& hash);
SplitDataset load_dataset(const std::filesystem::path& path);

/// A trained learner together with the feature approach and binning it expects.
struct TrainedModel {
    Learner learner = Learner::Ann;
    Approach approach = Approach::I;
    BinConfig bins{};
    std::optional<MlpModel> mlp;
    std::optional<GbtModel> gbt;

    std::size_t input_size() const;
    double predict(std::span<const double> features) const;

    nlohmann::json to_json(const std::string& hash) const;
    static TrainedModel from_json(const nlohmann::json& j);
};

void save_model(const std::filesystem::path& path, const TrainedModel& m, const std::string& hash);
TrainedModel load_model(const std::filesystem::path& path);

TrainingSet make_training_set(std::span<const ContractRecord> records, Approach a, const BinConfig& bins);

struct TrainOutput {
    TrainedModel model;
    std::vector<double> mlp_epoch_loss;
    std::vector<double> mlp_validation_loss;
    std::vector<double> gbt_round_loss;
};

/// Trains the configured learner(s) on `records` with seeds derived from cfg.seed.
TrainOutput train_model(std::span<const ContractRecord> records, const ExperimentConfig& cfg);

// Subcommands. Each writes its artifacts under cfg.out_dir.
void cmd_ingest(const ExperimentConfig& cfg);
void cmd_simulate(const ExperimentConfig& cfg);
void cmd_train(const ExperimentConfig& cfg);
void cmd_evaluate(const ExperimentConfig& cfg);
void cmd_sweep(const ExperimentConfig& cfg);
void cmd_binwidth_study(const ExperimentConfig& cfg);

/// Scores `predicted` against the records' true bins, writes cdf.csv,
/// scatter.csv and iv_band.csv under `out_dir`, and returns the metrics
/// document (model and Black-Scholes metrics, regression, IV band hit rate).
nlohmann::json evaluation_report(std::span<const ContractRecord> records, std::span<const double> predicted,
                                 const BinConfig& bins, const std::string& hash,
                                 const std::filesystem::path& out_dir);

std::string emv_csv(const EmvCurve& curve, const std::string& hash);

/// Full command-line entry point. Returns 0 on success, 1 on validation
/// errors, 2 on I/O errors.
int run_cli(int argc, const char* const* argv);

}  // namespace optbin
