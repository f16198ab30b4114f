#include "trajgraph/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "trajgraph/common.hpp"

namespace trajgraph::eval {

using nlohmann::json;

void PredictionSet::apply_threshold() {
    for (auto& e : entries) e.y_pred = e.score >= threshold ? 1 : 0;
}

void PredictionSet::validate() const {
    for (const auto& e : entries) {
        if (e.y_true != 0 && e.y_true != 1)
            throw InputError("prediction for " + e.patient_id + ": y_true must be 0 or 1");
        if (!(e.score >= 0.0 && e.score <= 1.0))
            throw InputError("prediction for " + e.patient_id + ": score outside [0,1]");
        if (e.horizon_days && e.y_true != 1)
            throw InputError("prediction for " + e.patient_id +
                             ": horizon_days present on a control entry");
        if (e.horizon_days && *e.horizon_days < 0)
            throw InputError("prediction for " + e.patient_id + ": negative horizon_days");
    }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

PredictionSet load_predictions_csv(const std::string& path, double threshold) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open predictions file " + path);
    std::string line;
    if (!std::getline(in, line)) throw InputError(path + ": empty predictions file");
    std::vector<std::string> header = split_csv_line(line);

    int col_id = -1, col_true = -1, col_score = -1, col_horizon = -1;
    std::vector<std::pair<int, std::string>> group_cols;
    for (int i = 0; i < static_cast<int>(header.size()); ++i) {
        const std::string& h = header[static_cast<std::size_t>(i)];
        if (h == "patient_id") col_id = i;
        else if (h == "y_true") col_true = i;
        else if (h == "score") col_score = i;
        else if (h == "horizon_days") col_horizon = i;
        else if (h == "y_pred") continue;  // recomputed from the threshold
        else group_cols.emplace_back(i, h);
    }
    if (col_id < 0 || col_true < 0 || col_score < 0)
        throw InputError(path + ": header must contain patient_id, y_true, score");

    PredictionSet set;
    set.threshold = threshold;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::vector<std::string> f = split_csv_line(line);
        if (f.size() != header.size())
            throw InputError(path + ":" + std::to_string(line_no) + ": wrong field count");
        PredictionEntry e;
        e.patient_id = f[static_cast<std::size_t>(col_id)];
        try {
            e.y_true = std::stoi(f[static_cast<std::size_t>(col_true)]);
            e.score = std::stod(f[static_cast<std::size_t>(col_score)]);
        } catch (const std::exception&) {
            throw InputError(path + ":" + std::to_string(line_no) + ": malformed numeric field");
        }
        if (col_horizon >= 0) {
            const std::string& h = f[static_cast<std::size_t>(col_horizon)];
            if (!trim(h).empty()) e.horizon_days = std::stoi(h);
        }
        for (const auto& [idx, name] : group_cols) {
            const std::string& v = f[static_cast<std::size_t>(idx)];
            if (!v.empty()) e.groups[name] = v;
        }
        set.entries.push_back(std::move(e));
    }
    set.apply_threshold();
    set.validate();
    return set;
}

void save_predictions_csv(const PredictionSet& set, const std::string& path) {
    std::set<std::string> group_keys;
    for (const auto& e : set.entries)
        for (const auto& [k, _] : e.groups) group_keys.insert(k);

    std::ofstream out(path);
    if (!out) throw InputError("cannot write predictions file " + path);
    out << "patient_id,y_true,score";
    for (const auto& k : group_keys) out << "," << k;
    out << ",horizon_days\n";
    out.precision(17);
    for (const auto& e : set.entries) {
        out << e.patient_id << "," << e.y_true << "," << e.score;
        for (const auto& k : group_keys) {
            auto it = e.groups.find(k);
            out << "," << (it == e.groups.end() ? "" : it->second);
        }
        out << ",";
        if (e.horizon_days) out << *e.horizon_days;
        out << "\n";
    }
}

double roc_auc_scores(const std::vector<double>& scores, const std::vector<int>& labels) {
    std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (int y : labels) n_pos += static_cast<std::size_t>(y == 1);
    std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw InputError("roc_auc is undefined: both classes must be present");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // midranks over tie runs
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        double midrank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k)
            if (labels[order[k]] == 1) rank_sum_pos += midrank;
        i = j + 1;
    }
    double u = rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double roc_auc(const std::vector<PredictionEntry>& entries) {
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(entries.size());
    labels.reserve(entries.size());
    for (const auto& e : entries) {
        scores.push_back(e.score);
        labels.push_back(e.y_true);
    }
    return roc_auc_scores(scores, labels);
}

ClassificationReport classification_metrics(const std::vector<PredictionEntry>& entries) {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (const auto& e : entries) {
        if (e.y_true == 1 && e.y_pred == 1) ++tp;
        else if (e.y_true == 0 && e.y_pred == 1) ++fp;
        else if (e.y_true == 0 && e.y_pred == 0) ++tn;
        else ++fn;
    }
    auto ratio = [](std::size_t num, std::size_t den) {
        return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    auto f1_of = [](double p, double r) { return (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r); };

    ClassificationReport rep;
    rep.n = entries.size();
    rep.positive.precision = ratio(tp, tp + fp);
    rep.positive.recall = ratio(tp, tp + fn);
    rep.positive.f1 = f1_of(rep.positive.precision, rep.positive.recall);
    rep.negative.precision = ratio(tn, tn + fn);
    rep.negative.recall = ratio(tn, tn + fp);
    rep.negative.f1 = f1_of(rep.negative.precision, rep.negative.recall);
    rep.macro_f1 = (rep.positive.f1 + rep.negative.f1) / 2.0;
    return rep;
}

namespace {

// positives-rate numerator/denominator split by group membership
struct GroupSplit {
    std::size_t in_num = 0, in_den = 0, out_num = 0, out_den = 0;
};

GroupSplit split_by_group(const std::vector<PredictionEntry>& entries,
                          const std::string& attribute, const std::string& group,
                          bool positives_only) {
    GroupSplit s;
    for (const auto& e : entries) {
        if (positives_only && e.y_true != 1) continue;
        auto it = e.groups.find(attribute);
        bool member = it != e.groups.end() && it->second == group;
        if (member) {
            ++s.in_den;
            s.in_num += static_cast<std::size_t>(e.y_pred == 1);
        } else {
            ++s.out_den;
            s.out_num += static_cast<std::size_t>(e.y_pred == 1);
        }
    }
    return s;
}

}  // namespace

double demographic_parity_difference(const std::vector<PredictionEntry>& entries,
                                     const std::string& attribute, const std::string& group) {
    GroupSplit s = split_by_group(entries, attribute, group, false);
    if (s.in_den == 0 || s.out_den == 0)
        throw InputError("demographic parity undefined: empty side for " + attribute + "=" +
                         group);
    return static_cast<double>(s.in_num) / static_cast<double>(s.in_den) -
           static_cast<double>(s.out_num) / static_cast<double>(s.out_den);
}

double equal_opportunity_difference(const std::vector<PredictionEntry>& entries,
                                    const std::string& attribute, const std::string& group) {
    GroupSplit s = split_by_group(entries, attribute, group, true);
    if (s.in_den == 0 || s.out_den == 0)
        throw InputError("equal opportunity undefined: a side has no positive cases for " +
                         attribute + "=" + group);
    return static_cast<double>(s.in_num) / static_cast<double>(s.in_den) -
           static_cast<double>(s.out_num) / static_cast<double>(s.out_den);
}

std::vector<HorizonRow> horizon_curve(const std::vector<PredictionEntry>& t2d_entries,
                                      const std::vector<PredictionEntry>& controls,
                                      int window_days) {
    if (window_days <= 0) throw ConfigError("window_days must be positive");
    for (const auto& e : t2d_entries)
        if (!e.horizon_days)
            throw InputError("t2d entry " + e.patient_id + " lacks horizon_days");

    if (t2d_entries.empty()) return {};

    // nearest-rank 95th percentile of horizon days
    std::vector<int> horizons;
    horizons.reserve(t2d_entries.size());
    for (const auto& e : t2d_entries) horizons.push_back(*e.horizon_days);
    std::sort(horizons.begin(), horizons.end());
    std::size_t rank = static_cast<std::size_t>(
        std::ceil(0.95 * static_cast<double>(horizons.size())));
    if (rank == 0) rank = 1;
    int p95 = horizons[rank - 1];

    int last_regular = p95 / window_days;
    int tail_index = last_regular + 1;

    std::vector<std::vector<const PredictionEntry*>> buckets(
        static_cast<std::size_t>(tail_index) + 1);
    for (const auto& e : t2d_entries) {
        int h = *e.horizon_days;
        int b = h > p95 ? tail_index : h / window_days;
        buckets[static_cast<std::size_t>(b)].push_back(&e);
    }

    std::vector<HorizonRow> rows;
    for (int b = 0; b <= tail_index; ++b) {
        const auto& bucket = buckets[static_cast<std::size_t>(b)];
        HorizonRow row;
        row.window_index = b;
        row.n = bucket.size();
        row.aggregated_tail = (b == tail_index);
        if (bucket.empty()) {
            row.auc = std::numeric_limits<double>::quiet_NaN();
            row.t2d_recall = std::numeric_limits<double>::quiet_NaN();
        } else {
            std::vector<double> scores;
            std::vector<int> labels;
            for (const auto* e : bucket) {
                scores.push_back(e->score);
                labels.push_back(1);
            }
            for (const auto& c : controls) {
                scores.push_back(c.score);
                labels.push_back(0);
            }
            row.auc = controls.empty() ? std::numeric_limits<double>::quiet_NaN()
                                       : roc_auc_scores(scores, labels);
            std::size_t predicted = 0;
            for (const auto* e : bucket) predicted += static_cast<std::size_t>(e->y_pred == 1);
            row.t2d_recall = static_cast<double>(predicted) / static_cast<double>(bucket.size());
        }
        rows.push_back(row);
    }
    return rows;
}

json report_to_json(const ClassificationReport& report, double auc) {
    return json{{"auc", auc},
                {"macro_f1", report.macro_f1},
                {"n", report.n},
                {"t2d", {{"precision", report.positive.precision},
                         {"recall", report.positive.recall},
                         {"f1", report.positive.f1}}},
                {"nod", {{"precision", report.negative.precision},
                         {"recall", report.negative.recall},
                         {"f1", report.negative.f1}}}};
}

}  // namespace trajgraph::eval
