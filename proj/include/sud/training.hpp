#pragma once

// Softly update-drop training: per-epoch probability pass over the whole
// training set, probability cross-entropy scoring, ramped global drop, and
// label-smoothed updates on the kept set; plus the baseline pipelines.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sud/error.hpp"
#include "sud/kernels.hpp"
#include "sud/loss.hpp"
#include "sud/model.hpp"
#include "sud/selection.hpp"
#include "sud/synth.hpp"

namespace sud {

enum class Strategy {
    None,             ///< no-correction baseline: always train on the full set
    GlobalProbCE,     ///< global selection by probability cross-entropy
    GlobalLossCE,     ///< global selection by current cross-entropy loss
    MinibatchProbCE,  ///< per-mini-batch selection by probability cross-entropy
};

std::string to_string(Strategy s);
/// Throws ConfigError for unknown names.
Strategy strategy_from_string(const std::string& s);

struct TrainConfig {
    DropSchedule schedule;
    double label_weight = 0.5;
    OptimizerSettings optimizer;
    std::size_t batch_size = 32;
    Strategy strategy = Strategy::GlobalProbCE;
    /// Held out of the noisy training set only when the bundle has no validation split.
    double validation_fraction = 1.0 / 6.0;
    std::size_t hidden = 32;
    std::size_t feature_dim = 16;
    double scale = 30.0;
    std::uint64_t seed = 0;
    Backend backend = Backend::OpenMP;

    /// Throws ConfigError on invalid values; train_size bounds the batch size.
    void validate(std::size_t train_size) const;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Defaults for absent keys; unknown keys or wrong types throw ConfigError.
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Per-provenance means; NaN where a group is empty or the quantity is undefined.
struct GroupMeans {
    double clean = 0.0;
    double close = 0.0;
    double open = 0.0;
};

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    double drop_rate = 0.0;
    bool selection_active = false;
    SelectionOutcome selection;
    double train_loss = 0.0;  ///< mean smooth loss over the kept samples during the epoch
    double train_acc = 0.0;   ///< end-of-epoch accuracy on the training set (assigned labels)
    double val_acc = 0.0;
    double test_acc = 0.0;
    GroupMeans mean_prob_ce;  ///< probability cross-entropy C^t (NaN for t <= 2)
    GroupMeans mean_loss;     ///< start-of-epoch cross-entropy against assigned labels
    std::optional<double> overlap_all;
    std::optional<double> overlap_window3;
    std::vector<double> prob_ce;  ///< per-sample C^t, empty for t <= 2
    std::vector<double> losses;   ///< per-sample start-of-epoch cross-entropy
};

struct TrainResult {
    TrainConfig config;
    Model final_model;
    Model best_model;
    int best_epoch = 0;
    double best_val_acc = 0.0;
    double best_train_acc = 0.0;
    double best_test_acc = 0.0;
    std::vector<EpochRecord> epochs;
    /// Sample ids and provenance of the rows actually trained on (after any validation holdout).
    std::vector<std::size_t> sample_ids;
    std::vector<Provenance> provenance;
};

/// Non-finite loss or gradient; carries the last good checkpoint.
class RunDiverged : public TrainingDiverged {
public:
    RunDiverged(const std::string& what, Model last_good, int epoch)
        : TrainingDiverged(what), last_good_(std::move(last_good)), epoch_(epoch) {}
    const Model& last_good() const noexcept { return last_good_; }
    int epoch() const noexcept { return epoch_; }

private:
    Model last_good_;
    int epoch_;
};

struct Evaluation {
    double accuracy = 0.0;
    DenseMatrix probabilities;
    std::vector<std::size_t> predictions;
};

/// Fraction of rows whose argmax logit equals the assigned label. Requires a nonempty dataset.
Evaluation evaluate(const Model& model, const Dataset& dataset, Backend backend = Backend::OpenMP);

TrainResult run_training(const DatasetBundle& data, const TrainConfig& config);

struct ComparisonReport {
    std::vector<TrainResult> runs;  ///< one per config, in input order
};

/// Runs every config on the same data. All configs must share the seed.
ComparisonReport run_comparison(const DatasetBundle& data, const std::vector<TrainConfig>& configs);

}  // namespace sud
