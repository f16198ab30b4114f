#include "trajgraph/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "trajgraph/common.hpp"

namespace trajgraph::cohort {

using nlohmann::json;

std::string label_name(CohortLabel l) { return l == CohortLabel::T2D ? "T2D" : "NoD"; }

std::optional<CohortLabel> label_from_name(std::string_view name) {
    if (name == "T2D") return CohortLabel::T2D;
    if (name == "NoD") return CohortLabel::NoD;
    return std::nullopt;
}

std::optional<Date> PatientRecord::effective_diagnosis_date() const {
    if (adjusted_diagnosis_date) return adjusted_diagnosis_date;
    return diagnosis_date;
}

void PatientRecord::validate() const {
    if (patient_id.empty()) throw InputError("patient record with empty id");
    if (label == CohortLabel::T2D && !diagnosis_date)
        throw InputError("patient " + patient_id + ": T2D record lacks a diagnosis_date");
    if (adjusted_diagnosis_date && diagnosis_date &&
        *adjusted_diagnosis_date > *diagnosis_date)
        throw InputError("patient " + patient_id +
                         ": adjusted_diagnosis_date is after diagnosis_date");
    if (demographics.gender.empty())
        throw InputError("patient " + patient_id + ": missing gender");
    if (demographics.race.empty()) throw InputError("patient " + patient_id + ": missing race");
}

json record_to_json(const PatientRecord& r) {
    json visits = json::array();
    for (const auto& v : r.visits) {
        json jv{{"note_id", v.note_id},
                {"date", v.date ? json(v.date->to_iso()) : json(nullptr)}};
        if (v.word_count >= 0) jv["words"] = v.word_count;
        if (!v.note_type.empty()) jv["note_type"] = v.note_type;
        if (!v.author.empty()) jv["author"] = v.author;
        visits.push_back(std::move(jv));
    }
    json j{{"patient_id", r.patient_id},
           {"age", r.demographics.age},
           {"gender", r.demographics.gender},
           {"race", r.demographics.race},
           {"ethnicity", r.demographics.ethnicity ? json(*r.demographics.ethnicity)
                                                  : json(nullptr)},
           {"label", label_name(r.label)},
           {"diagnosis_date",
            r.diagnosis_date ? json(r.diagnosis_date->to_iso()) : json(nullptr)},
           {"adjusted_diagnosis_date", r.adjusted_diagnosis_date
                                           ? json(r.adjusted_diagnosis_date->to_iso())
                                           : json(nullptr)},
           {"visits", std::move(visits)}};
    return j;
}

PatientRecord record_from_json(const json& j, const std::string& origin) {
    auto fail = [&](const std::string& what) -> InputError {
        return InputError(origin + ": " + what);
    };
    PatientRecord r;
    r.patient_id = j.value("patient_id", std::string{});
    if (r.patient_id.empty()) throw fail("missing field 'patient_id'");
    if (!j.contains("age")) throw fail("patient " + r.patient_id + ": missing field 'age'");
    r.demographics.age = j.at("age").get<double>();
    r.demographics.gender = j.value("gender", std::string{});
    r.demographics.race = j.value("race", std::string{});
    if (j.contains("ethnicity") && !j.at("ethnicity").is_null())
        r.demographics.ethnicity = j.at("ethnicity").get<std::string>();
    auto label = label_from_name(j.value("label", std::string{}));
    if (!label)
        throw fail("patient " + r.patient_id + ": label must be T2D or NoD");
    r.label = *label;

    auto parse_date_field = [&](const char* field) -> std::optional<Date> {
        if (!j.contains(field) || j.at(field).is_null()) return std::nullopt;
        auto d = Date::parse_iso(j.at(field).get<std::string>());
        if (!d)
            throw fail("patient " + r.patient_id + ": field '" + field +
                       "' is not an ISO-8601 date");
        return d;
    };
    r.diagnosis_date = parse_date_field("diagnosis_date");
    r.adjusted_diagnosis_date = parse_date_field("adjusted_diagnosis_date");

    for (const auto& jv : j.value("visits", json::array())) {
        VisitRef v;
        v.note_id = jv.value("note_id", std::string{});
        if (v.note_id.empty())
            throw fail("patient " + r.patient_id + ": visit with empty note_id");
        if (jv.contains("date") && !jv.at("date").is_null()) {
            auto d = Date::parse_iso(jv.at("date").get<std::string>());
            if (!d)
                throw fail("patient " + r.patient_id + ": visit date is not ISO-8601");
            v.date = *d;
        }
        v.word_count = jv.value("words", -1);
        v.note_type = jv.value("note_type", std::string{});
        v.author = jv.value("author", std::string{});
        r.visits.push_back(std::move(v));
    }
    r.validate();
    return r;
}

std::vector<PatientRecord> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open manifest " + path);
    std::vector<PatientRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw InputError(path + ":" + std::to_string(line_no) + ": invalid JSON (" +
                             e.what() + ")");
        }
        records.push_back(record_from_json(j, path + ":" + std::to_string(line_no)));
    }
    return records;
}

void save_manifest(const std::vector<PatientRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write manifest " + path);
    for (const auto& r : records) out << record_to_json(r).dump() << "\n";
}

std::optional<PatientRecord> filter_leakage(PatientRecord record, int buffer_days) {
    if (record.label == CohortLabel::NoD) return record;
    auto effective = record.effective_diagnosis_date();
    if (!effective)
        throw InputError("patient " + record.patient_id +
                         ": T2D record without an effective diagnosis date");
    Date cutoff = effective->plus_days(-buffer_days);
    std::vector<VisitRef> kept;
    for (auto& v : record.visits)
        if (v.date && *v.date < cutoff) kept.push_back(std::move(v));
    if (kept.empty()) return std::nullopt;
    record.visits = std::move(kept);
    return record;
}

PatientRecord filter_note_quality(PatientRecord record, const NoteQualityFilter& filter) {
    std::vector<VisitRef> kept;
    for (auto& v : record.visits) {
        if (v.word_count >= 0 && v.word_count < filter.min_words) continue;
        if (filter.note_type_allowlist && !filter.note_type_allowlist->count(v.note_type))
            continue;
        if (filter.author_allowlist && !filter.author_allowlist->count(v.author)) continue;
        kept.push_back(std::move(v));
    }
    record.visits = std::move(kept);
    return record;
}

CovariateMatrix encode_covariates(const std::vector<PatientRecord>& records) {
    if (records.empty()) throw InputError("cannot encode covariates of an empty cohort");

    double mean = 0.0;
    for (const auto& r : records) mean += r.demographics.age;
    mean /= static_cast<double>(records.size());
    double var = 0.0;
    for (const auto& r : records) {
        double c = r.demographics.age - mean;
        var += c * c;
    }
    var /= static_cast<double>(records.size());
    double sd = std::sqrt(var);
    if (sd == 0.0) sd = 1.0;

    std::set<std::string> genders, races, ethnicities;
    for (const auto& r : records) {
        genders.insert(r.demographics.gender);
        races.insert(r.demographics.race);
        if (r.demographics.ethnicity) ethnicities.insert(*r.demographics.ethnicity);
    }

    CovariateMatrix m;
    m.names.push_back("age");
    for (const auto& g : genders) m.names.push_back("gender=" + g);
    for (const auto& x : races) m.names.push_back("race=" + x);
    for (const auto& e : ethnicities) m.names.push_back("ethnicity=" + e);

    for (const auto& r : records) {
        std::vector<double> row;
        row.push_back((r.demographics.age - mean) / sd);
        for (const auto& g : genders) row.push_back(r.demographics.gender == g ? 1.0 : 0.0);
        for (const auto& x : races) row.push_back(r.demographics.race == x ? 1.0 : 0.0);
        for (const auto& e : ethnicities)
            row.push_back(r.demographics.ethnicity && *r.demographics.ethnicity == e ? 1.0
                                                                                     : 0.0);
        m.rows.push_back(std::move(row));
        m.treated.push_back(r.label == CohortLabel::T2D ? 1 : 0);
        m.patient_ids.push_back(r.patient_id);
    }
    return m;
}

std::map<std::string, double> fit_propensity(const std::vector<PatientRecord>& records,
                                             double tol, int max_iters) {
    CovariateMatrix m = encode_covariates(records);
    std::size_t n = m.rows.size();
    bool has_pos = std::count(m.treated.begin(), m.treated.end(), 1) > 0;
    bool has_neg = std::count(m.treated.begin(), m.treated.end(), 0) > 0;
    if (!has_pos || !has_neg)
        throw InputError("propensity fit needs both T2D and NoD records");

    std::size_t k = m.names.size();
    std::vector<double> w(k + 1, 0.0);  // intercept last

    auto score = [&](std::size_t i) {
        double z = w[k];
        for (std::size_t j = 0; j < k; ++j) z += w[j] * m.rows[i][j];
        return 1.0 / (1.0 + std::exp(-z));
    };

    const double step = 1.0;
    for (int iter = 0; iter < max_iters; ++iter) {
        std::vector<double> grad(k + 1, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double err = score(i) - static_cast<double>(m.treated[i]);
            for (std::size_t j = 0; j < k; ++j) grad[j] += err * m.rows[i][j];
            grad[k] += err;
        }
        double norm = 0.0;
        for (auto& g : grad) {
            g /= static_cast<double>(n);
            norm += g * g;
        }
        if (std::sqrt(norm) < tol) break;
        for (std::size_t j = 0; j <= k; ++j) w[j] -= step * grad[j];
    }

    std::map<std::string, double> out;
    for (std::size_t i = 0; i < n; ++i) out[m.patient_ids[i]] = score(i);
    return out;
}

std::vector<MatchedPair> greedy_match(
    const std::vector<std::pair<std::string, double>>& treated,
    const std::vector<std::pair<std::string, double>>& controls,
    std::vector<std::string>* unmatched) {
    std::vector<MatchedPair> pairs;
    std::vector<bool> used(controls.size(), false);
    for (const auto& [treated_id, t_score] : treated) {
        std::size_t best = controls.size();
        double best_diff = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < controls.size(); ++c) {
            if (used[c]) continue;
            double diff = std::abs(t_score - controls[c].second);
            if (diff < best_diff) {  // strict: equal distance keeps the lower index
                best_diff = diff;
                best = c;
            }
        }
        if (best == controls.size()) {
            if (unmatched) unmatched->push_back(treated_id);
            continue;
        }
        used[best] = true;
        pairs.push_back({treated_id, controls[best].first});
    }
    return pairs;
}

namespace {

struct MeanVar {
    double mean = 0.0;
    double var = 0.0;  // sample variance
};

MeanVar mean_var(const std::vector<double>& xs) {
    MeanVar mv;
    if (xs.empty()) return mv;
    for (double x : xs) mv.mean += x;
    mv.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        for (double x : xs) mv.var += (x - mv.mean) * (x - mv.mean);
        mv.var /= static_cast<double>(xs.size() - 1);
    }
    return mv;
}

double smd(const std::vector<double>& treated, const std::vector<double>& control) {
    MeanVar t = mean_var(treated);
    MeanVar c = mean_var(control);
    double pooled = std::sqrt((t.var + c.var) / 2.0);
    if (pooled == 0.0) {
        if (t.mean == c.mean) return 0.0;
        return t.mean > c.mean ? std::numeric_limits<double>::infinity()
                               : -std::numeric_limits<double>::infinity();
    }
    return (t.mean - c.mean) / pooled;
}

}  // namespace

std::vector<BalanceRow> covariate_balance(const std::vector<PatientRecord>& records,
                                          const std::vector<MatchedPair>& pairs) {
    CovariateMatrix m = encode_covariates(records);
    std::map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < m.patient_ids.size(); ++i) row_of[m.patient_ids[i]] = i;

    std::vector<std::size_t> matched_treated, matched_controls;
    for (const auto& p : pairs) {
        auto t = row_of.find(p.treated_id);
        auto c = row_of.find(p.control_id);
        if (t == row_of.end() || c == row_of.end())
            throw InputError("matched pair references a patient missing from the cohort");
        matched_treated.push_back(t->second);
        matched_controls.push_back(c->second);
    }

    std::vector<BalanceRow> rows;
    for (std::size_t j = 0; j < m.names.size(); ++j) {
        std::vector<double> t_all, c_all, t_matched, c_matched;
        for (std::size_t i = 0; i < m.rows.size(); ++i)
            (m.treated[i] ? t_all : c_all).push_back(m.rows[i][j]);
        for (std::size_t i : matched_treated) t_matched.push_back(m.rows[i][j]);
        for (std::size_t i : matched_controls) c_matched.push_back(m.rows[i][j]);
        BalanceRow row;
        row.covariate = m.names[j];
        row.smd_before = smd(t_all, c_all);
        row.smd_after = pairs.empty() ? std::numeric_limits<double>::quiet_NaN()
                                      : smd(t_matched, c_matched);
        rows.push_back(std::move(row));
    }
    return rows;
}

MatchResult match_cohort(const std::vector<PatientRecord>& records, MatchOrder order) {
    MatchResult result;
    result.propensity = fit_propensity(records);

    std::vector<std::pair<std::string, double>> treated, controls;
    for (const auto& r : records) {
        double score = result.propensity.at(r.patient_id);
        if (r.label == CohortLabel::T2D) treated.emplace_back(r.patient_id, score);
        else controls.emplace_back(r.patient_id, score);
    }
    if (controls.empty()) throw InputError("matching needs at least one control");
    if (order == MatchOrder::DescendingScore)
        std::stable_sort(treated.begin(), treated.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });

    result.pairs = greedy_match(treated, controls, &result.unmatched_treated);
    result.balance = covariate_balance(records, result.pairs);
    return result;
}

void save_balance_csv(const std::vector<BalanceRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write balance report " + path);
    out << "covariate,smd_before,smd_after\n";
    out.precision(17);
    for (const auto& r : rows)
        out << r.covariate << "," << r.smd_before << "," << r.smd_after << "\n";
}

}  // namespace trajgraph::cohort
