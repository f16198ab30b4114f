#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace trajgraph::eval {

struct PredictionEntry {
    std::string patient_id;
    int y_true = 0;                        // 1 = T2D, 0 = NoD
    double score = 0.0;                    // probability in [0,1]
    int y_pred = 0;                        // score >= threshold
    std::map<std::string, std::string> groups;
    std::optional<int> horizon_days;       // T2D entries only
};

struct PredictionSet {
    std::vector<PredictionEntry> entries;
    double threshold = 0.5;

    void apply_threshold();
    void validate() const;
};

PredictionSet load_predictions_csv(const std::string& path, double threshold = 0.5);
void save_predictions_csv(const PredictionSet& set, const std::string& path);

// Mann-Whitney AUC via midranks: P(score_pos > score_neg) + 0.5 P(tie).
// Throws InputError when only one class is present.
double roc_auc_scores(const std::vector<double>& scores, const std::vector<int>& labels);
double roc_auc(const std::vector<PredictionEntry>& entries);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct ClassificationReport {
    ClassMetrics positive;  // T2D
    ClassMetrics negative;  // NoD
    double macro_f1 = 0.0;
    std::size_t n = 0;
};

// Zero denominators yield 0, matching degenerate all-one-class predictors.
ClassificationReport classification_metrics(const std::vector<PredictionEntry>& entries);

// P(y_pred=1 | Z=z) - P(y_pred=1 | Z!=z). Throws InputError when either side
// is empty.
double demographic_parity_difference(const std::vector<PredictionEntry>& entries,
                                     const std::string& attribute, const std::string& group);

// TPR_{Z=z} - TPR_{Z!=z} over true positives. Throws InputError when either
// side has no positive ground truth.
double equal_opportunity_difference(const std::vector<PredictionEntry>& entries,
                                    const std::string& attribute, const std::string& group);

struct HorizonRow {
    int window_index = 0;
    double auc = 0.0;        // NaN when n == 0
    double t2d_recall = 0.0; // NaN when n == 0
    std::size_t n = 0;
    bool aggregated_tail = false;
};

// Buckets T2D entries by floor(horizon/window_days); entries above the 95th
// percentile of horizon_days are merged into one final bucket. Each bucket's
// AUC is computed against the full control set.
std::vector<HorizonRow> horizon_curve(const std::vector<PredictionEntry>& t2d_entries,
                                      const std::vector<PredictionEntry>& controls,
                                      int window_days = 91);

nlohmann::json report_to_json(const ClassificationReport& report, double auc);

}  // namespace trajgraph::eval
