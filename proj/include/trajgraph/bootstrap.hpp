#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "trajgraph/metrics.hpp"

namespace trajgraph::eval {

using MetricFn = std::function<double(const std::vector<PredictionEntry>&)>;

struct BootstrapResult {
    double mean_diff = 0.0;
    double sd = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double p_value = 1.0;
    int replicates = 0;
    int valid_replicates = 0;  // replicates where the metric was defined
};

// Paired bootstrap over patients: both sets are resampled with the same
// per-replicate draw, the metric difference A - B is recorded, and the
// two-tailed p-value is clipped to [2/replicates, 1]. Each replicate derives
// its own seed from (seed, replicate index), so results are independent of
// evaluation order. Both sets must cover the same patient ids.
BootstrapResult bootstrap_compare(const std::vector<PredictionEntry>& set_a,
                                  const std::vector<PredictionEntry>& set_b,
                                  const MetricFn& metric, int replicates = 10000,
                                  std::uint64_t seed = 0);

// Named metric for CLI reporting: auc, macro_f1, t2d_precision, t2d_recall,
// nod_precision, nod_recall. Throws ConfigError for unknown names.
MetricFn metric_by_name(const std::string& name);

}  // namespace trajgraph::eval
