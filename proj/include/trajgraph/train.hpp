#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "trajgraph/model.hpp"

namespace trajgraph::model {

struct TrainConfig {
    double learning_rate = 1e-3;
    int epochs = 50;
    int folds = 3;
    std::uint64_t seed = 0;
    std::optional<double> class_weight;  // extra weight on the T2D class
    std::size_t max_notes = 5;
    GraphSwitches graph_switches;
    bool use_text = true;
    bool use_kg = true;
    double weight_decay = 0.0;
    double dropout = 0.0;
    ModelDims dims;

    void validate() const;  // folds >= 2, lr > 0, at least one edge source
};

nlohmann::json train_config_to_json(const TrainConfig& config);
std::uint64_t train_config_hash(const TrainConfig& config);

struct FoldModel {
    int fold_id = 0;
    TrajectoryEncoderParams params;
    double best_val_auc = 0.0;
    int best_epoch = -1;
};

struct Ensemble {
    std::vector<FoldModel> members;
    ModelDims dims;
    std::uint64_t config_hash = 0;
};

struct TrainLogEntry {
    int fold = 0;
    int epoch = 0;
    double train_loss = 0.0;
    double val_auc = 0.0;
};

struct TrainResult {
    Ensemble ensemble;
    std::vector<TrainLogEntry> log;
    std::vector<int> fold_of_sample;  // validation fold of each input sample
};

// Stratified k-fold assignment: per class, indices are shuffled by the seed
// and dealt round-robin.
std::vector<int> stratified_folds(const std::vector<int>& labels, int folds,
                                  std::uint64_t seed);

// Full-batch Adam training per fold; the best-validation-AUC epoch is kept
// (ties favor the earliest). Deterministic under a fixed seed. Throws
// InputError on a single-class dataset.
TrainResult train(const std::vector<TrajectorySample>& samples, const TrainConfig& config);

double predict_sample(const TrajectorySample& sample, const TrajectoryEncoderParams& params);

// Mean of member probabilities.
double predict_ensemble(const TrajectorySample& sample, const Ensemble& ensemble);

// Out-of-fold score for every training sample: each sample is scored by the
// member whose validation fold contained it.
std::vector<double> out_of_fold_scores(const std::vector<TrajectorySample>& samples,
                                       const TrainResult& result);

void save_checkpoint(const Ensemble& ensemble, const std::string& path);
Ensemble load_checkpoint(const std::string& path);

void save_train_log(const std::vector<TrainLogEntry>& log, const std::string& path);

}  // namespace trajgraph::model
