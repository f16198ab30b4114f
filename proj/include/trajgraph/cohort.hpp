#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "trajgraph/date.hpp"

namespace trajgraph::cohort {

enum class CohortLabel { T2D, NoD };

std::string label_name(CohortLabel l);
std::optional<CohortLabel> label_from_name(std::string_view name);

struct Demographics {
    double age = 0.0;
    std::string gender;
    std::string race;
    std::optional<std::string> ethnicity;
};

struct VisitRef {
    std::optional<Date> date;
    std::string note_id;
    int word_count = -1;  // -1 = unknown
    std::string note_type;
    std::string author;
};

struct PatientRecord {
    std::string patient_id;
    Demographics demographics;
    CohortLabel label = CohortLabel::NoD;
    std::optional<Date> diagnosis_date;
    std::optional<Date> adjusted_diagnosis_date;
    std::vector<VisitRef> visits;

    // adjusted date when present, else the ICD proxy date
    std::optional<Date> effective_diagnosis_date() const;

    // T2D records need a diagnosis date; the adjusted date may not be later.
    void validate() const;
};

nlohmann::json record_to_json(const PatientRecord& r);
PatientRecord record_from_json(const nlohmann::json& j, const std::string& origin);

std::vector<PatientRecord> load_manifest(const std::string& path);
void save_manifest(const std::vector<PatientRecord>& records, const std::string& path);

// Drops notes dated on or after (effective diagnosis - buffer_days). NoD
// records pass through unchanged; returns nullopt when no notes survive.
std::optional<PatientRecord> filter_leakage(PatientRecord record, int buffer_days = 3);

struct NoteQualityFilter {
    int min_words = 100;
    std::optional<std::set<std::string>> note_type_allowlist;
    std::optional<std::set<std::string>> author_allowlist;
};

// Removes notes failing the word-count bound or either allowlist; absent
// allowlists accept everything. May leave the record without notes; callers
// drop such records.
PatientRecord filter_note_quality(PatientRecord record, const NoteQualityFilter& filter);

struct CovariateMatrix {
    std::vector<std::string> names;          // age + one-hot levels
    std::vector<std::vector<double>> rows;   // per record
    std::vector<int> treated;                // 1 = T2D
    std::vector<std::string> patient_ids;
};

// age standardized over the input; gender/race/ethnicity one-hot over the
// observed levels (sorted for determinism).
CovariateMatrix encode_covariates(const std::vector<PatientRecord>& records);

// Logistic regression by full-batch gradient descent until the gradient norm
// falls below tol or max_iters is hit. Throws InputError on single-class
// input. Returns P(T2D | demographics) per patient.
std::map<std::string, double> fit_propensity(const std::vector<PatientRecord>& records,
                                             double tol = 1e-6, int max_iters = 10000);

enum class MatchOrder { InputOrder, DescendingScore };

struct MatchedPair {
    std::string treated_id;
    std::string control_id;
};

struct BalanceRow {
    std::string covariate;
    double smd_before = 0.0;
    double smd_after = 0.0;
};

struct MatchResult {
    std::vector<MatchedPair> pairs;
    std::map<std::string, double> propensity;
    std::vector<BalanceRow> balance;
    std::vector<std::string> unmatched_treated;
};

// 1:1 greedy nearest-neighbor matching without replacement on the propensity
// score; ties pick the lower control index. Treated units left over when
// controls run out are reported unmatched.
std::vector<MatchedPair> greedy_match(const std::vector<std::pair<std::string, double>>& treated,
                                      const std::vector<std::pair<std::string, double>>& controls,
                                      std::vector<std::string>* unmatched = nullptr);

// Standardized mean differences (mean_t - mean_c) / sqrt((s_t^2 + s_c^2)/2)
// per covariate, before (all vs all) and after (matched subsets) matching.
// Zero pooled variance yields 0 for equal means and +/-inf otherwise.
std::vector<BalanceRow> covariate_balance(const std::vector<PatientRecord>& records,
                                          const std::vector<MatchedPair>& pairs);

// Propensity fit + greedy matching + balance table in one step.
MatchResult match_cohort(const std::vector<PatientRecord>& records,
                         MatchOrder order = MatchOrder::InputOrder);

void save_balance_csv(const std::vector<BalanceRow>& rows, const std::string& path);

}  // namespace trajgraph::cohort
