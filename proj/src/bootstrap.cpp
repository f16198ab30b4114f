#include "trajgraph/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "trajgraph/common.hpp"

namespace trajgraph::eval {

namespace {

double percentile(std::vector<double> sorted, double q) {
    // linear interpolation between order statistics
    if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
    double pos = q * static_cast<double>(sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
    double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

BootstrapResult bootstrap_compare(const std::vector<PredictionEntry>& set_a,
                                  const std::vector<PredictionEntry>& set_b,
                                  const MetricFn& metric, int replicates, std::uint64_t seed) {
    if (replicates < 1) throw ConfigError("bootstrap replicates must be >= 1");
    if (set_a.size() != set_b.size())
        throw InputError("bootstrap_compare: prediction sets differ in size");

    std::map<std::string, std::size_t> b_index;
    for (std::size_t i = 0; i < set_b.size(); ++i) {
        if (!b_index.emplace(set_b[i].patient_id, i).second)
            throw InputError("bootstrap_compare: duplicate patient id '" + set_b[i].patient_id +
                             "' in second set");
    }
    // aligned so draw i refers to the same patient in both sets
    std::vector<const PredictionEntry*> aligned_b(set_a.size());
    for (std::size_t i = 0; i < set_a.size(); ++i) {
        auto it = b_index.find(set_a[i].patient_id);
        if (it == b_index.end())
            throw InputError("bootstrap_compare: patient '" + set_a[i].patient_id +
                             "' missing from second set");
        aligned_b[i] = &set_b[it->second];
    }

    const std::size_t n = set_a.size();
    std::vector<double> diffs;
    diffs.reserve(static_cast<std::size_t>(replicates));
    std::size_t at_or_below_zero = 0, at_or_above_zero = 0;

    std::vector<PredictionEntry> sample_a(n), sample_b(n);
    for (int r = 0; r < replicates; ++r) {
        Rng rng = Rng::derive(seed, 0xb0075000ULL + static_cast<std::uint64_t>(r));
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t pick = static_cast<std::size_t>(rng.next_below(n));
            sample_a[i] = set_a[pick];
            sample_b[i] = *aligned_b[pick];
        }
        double diff;
        try {
            diff = metric(sample_a) - metric(sample_b);
        } catch (const InputError&) {
            continue;  // metric undefined on this resample (e.g. one class drawn)
        }
        if (std::isnan(diff)) continue;
        diffs.push_back(diff);
        if (diff <= 0.0) ++at_or_below_zero;
        if (diff >= 0.0) ++at_or_above_zero;
    }

    BootstrapResult result;
    result.replicates = replicates;
    result.valid_replicates = static_cast<int>(diffs.size());
    if (diffs.empty())
        throw InputError("bootstrap_compare: metric undefined on every replicate");

    double mean = 0.0;
    for (double d : diffs) mean += d;
    mean /= static_cast<double>(diffs.size());
    double var = 0.0;
    for (double d : diffs) var += (d - mean) * (d - mean);
    var = diffs.size() > 1 ? var / static_cast<double>(diffs.size() - 1) : 0.0;

    std::vector<double> sorted = diffs;
    std::sort(sorted.begin(), sorted.end());

    result.mean_diff = mean;
    result.sd = std::sqrt(var);
    result.ci_low = percentile(sorted, 0.025);
    result.ci_high = percentile(sorted, 0.975);

    double nvalid = static_cast<double>(diffs.size());
    double p = 2.0 * std::min(static_cast<double>(at_or_below_zero) / nvalid,
                              static_cast<double>(at_or_above_zero) / nvalid);
    double floor = 2.0 / static_cast<double>(replicates);
    result.p_value = std::clamp(p, floor, 1.0);
    return result;
}

MetricFn metric_by_name(const std::string& name) {
    if (name == "auc")
        return [](const std::vector<PredictionEntry>& e) { return roc_auc(e); };
    if (name == "macro_f1")
        return [](const std::vector<PredictionEntry>& e) {
            return classification_metrics(e).macro_f1;
        };
    if (name == "t2d_precision")
        return [](const std::vector<PredictionEntry>& e) {
            return classification_metrics(e).positive.precision;
        };
    if (name == "t2d_recall")
        return [](const std::vector<PredictionEntry>& e) {
            return classification_metrics(e).positive.recall;
        };
    if (name == "nod_precision")
        return [](const std::vector<PredictionEntry>& e) {
            return classification_metrics(e).negative.precision;
        };
    if (name == "nod_recall")
        return [](const std::vector<PredictionEntry>& e) {
            return classification_metrics(e).negative.recall;
        };
    throw ConfigError("unknown metric '" + name + "'");
}

}  // namespace trajgraph::eval
