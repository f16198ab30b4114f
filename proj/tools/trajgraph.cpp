// trajgraph: longitudinal risk prediction over per-note temporal graphs.
// Subcommands cover the whole pipeline: synth -> curate -> build-graphs ->
// featurize -> train -> predict -> evaluate / horizon / fairness / compare,
// plus reveal-run for verifier-aided labeling.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "trajgraph/bootstrap.hpp"
#include "trajgraph/cohort.hpp"
#include "trajgraph/common.hpp"
#include "trajgraph/pipeline.hpp"
#include "trajgraph/reveal.hpp"
#include "trajgraph/synth.hpp"
#include "trajgraph/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace trajgraph;

namespace {

constexpr const char* kToolVersion = "0.1.0";

int g_log_level = 1;  // 0=quiet 1=info 2=debug

void log_info(const std::string& msg) {
    if (g_log_level >= 1) std::cerr << "[trajgraph] " << msg << "\n";
}

void log_debug(const std::string& msg) {
    if (g_log_level >= 2) std::cerr << "[trajgraph:debug] " << msg << "\n";
}

struct GlobalOptions {
    std::string workdir;
    std::uint64_t seed = 0;
    std::string log_level = "info";
};

// One snapshot per run, written beside the outputs. Deliberately contains no
// timestamps so identical runs stay byte-identical.
void write_snapshot(const std::string& workdir, const std::string& subcommand, json config) {
    config["tool_version"] = kToolVersion;
    config["subcommand"] = subcommand;
    fs::path dir = fs::path(workdir) / "snapshots";
    fs::create_directories(dir);
    std::ofstream out(dir / (subcommand + "_config.json"));
    out << config.dump(2) << "\n";
}

struct FeatureFlags {
    std::size_t token_dim = feat::kDefaultTokenDim;
    std::size_t width_dim = feat::kDefaultWidthDim;
    bool allow_hash_fallback = false;
    std::string embedding_dir;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--d-tok", token_dim, "Token embedding width for the hash fallback");
        cmd->add_option("--d-width", width_dim, "Span-width embedding width");
        cmd->add_flag("--allow-hash-fallback", allow_hash_fallback,
                      "Derive token vectors from seeded hashing when no .emb file exists");
        cmd->add_option("--emb-dir", embedding_dir,
                        "Directory of precomputed <note_id>.emb stores");
    }

    pipeline::FeatureConfig to_config(std::uint64_t seed) const {
        pipeline::FeatureConfig c;
        c.token_dim = token_dim;
        c.width_dim = width_dim;
        c.seed = seed;
        c.allow_hash_fallback = allow_hash_fallback;
        c.embedding_dir = embedding_dir;
        return c;
    }

    json to_json() const {
        return json{{"d_tok", token_dim},
                    {"d_width", width_dim},
                    {"allow_hash_fallback", allow_hash_fallback},
                    {"emb_dir", embedding_dir}};
    }
};

struct ModelFlags {
    model::TrainConfig config;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--lr", config.learning_rate, "Learning rate");
        cmd->add_option("--epochs", config.epochs, "Training epochs per fold");
        cmd->add_option("--folds", config.folds, "Stratified cross-validation folds");
        cmd->add_option("--class-weight", [this](const std::vector<std::string>& v) {
            try {
                config.class_weight = std::stod(v.at(0));
            } catch (const std::exception&) {
                return false;
            }
            return true;
        }, "Extra loss weight on the T2D class");
        cmd->add_option("--max-notes", config.max_notes, "Keep the last N notes per patient");
        cmd->add_option("--layers", config.dims.layers, "Graph encoder layers");
        cmd->add_option("--model-dim", config.dims.model_dim, "Graph encoder width");
        cmd->add_option("--hidden", config.dims.hidden_dim, "Recurrent hidden size");
        cmd->add_option("--weight-decay", config.weight_decay, "Decoupled weight decay");
        cmd->add_option("--dropout", config.dropout, "Dropout on visit/trajectory vectors");
        cmd->add_flag("--use-temporal,!--no-use-temporal",
                      config.graph_switches.use_temporal_edges,
                      "Keep Before/Overlap edges in the model graph");
        cmd->add_flag("--use-kg,!--no-use-kg", config.graph_switches.use_kg_subgraph,
                      "Keep semantic-type nodes and IsA/Semantic edges");
        cmd->add_flag("--use-text-emb,!--no-use-text-emb", config.use_text,
                      "Fill the text/width feature slots");
        cmd->add_flag("--use-kg-emb,!--no-use-kg-emb", config.use_kg,
                      "Fill the concept-vector feature slot");
    }
};

std::string resolve_workdir(const GlobalOptions& global) {
    if (!global.workdir.empty()) return global.workdir;
    if (const char* env = std::getenv("TRAJGRAPH_WORKDIR")) return env;
    return ".";
}

pipeline::Corpus load_workdir_corpus(const std::string& workdir) {
    return pipeline::load_corpus((fs::path(workdir) / "notes").string(),
                                 (fs::path(workdir) / "kb.json").string(),
                                 (fs::path(workdir) / "lexicon.tsv").string());
}

std::vector<cohort::PatientRecord> load_manifest_checked(const std::string& path) {
    auto records = cohort::load_manifest(path);
    if (records.empty()) throw InputError("manifest " + path + " contains no patients");
    return records;
}

void require_both_classes(const std::vector<cohort::PatientRecord>& records,
                          const std::string& manifest_path) {
    bool pos = false, neg = false;
    for (const auto& r : records) (r.label == cohort::CohortLabel::T2D ? pos : neg) = true;
    if (!pos || !neg)
        throw InputError("manifest " + manifest_path +
                         " must contain both T2D and NoD patients");
}

json train_flags_json(const model::TrainConfig& c, const FeatureFlags& f) {
    json j = model::train_config_to_json(c);
    j.update(f.to_json());
    return j;
}

// ---------------------------------------------------------------- synth ----

int cmd_synth(const GlobalOptions& global, const synth::SynthConfig& config) {
    std::string workdir = resolve_workdir(global);
    fs::create_directories(workdir);
    synth::SynthOutput out = synth::generate(config);
    synth::write_synth_output(out, workdir);
    write_snapshot(workdir, "synth",
                   json{{"n_patients", config.n_patients},
                        {"min_visits", config.min_visits},
                        {"max_visits", config.max_visits},
                        {"event_a", config.event_a},
                        {"event_b", config.event_b},
                        {"bridge_event", config.bridge_event},
                        {"p_label_given_order", config.p_label_given_order},
                        {"order_prob", config.order_prob},
                        {"demographic_shift", config.demographic_shift},
                        {"min_noise_relations", config.min_noise_relations},
                        {"max_noise_relations", config.max_noise_relations},
                        {"kg_dim", config.kg_dim},
                        {"seed", config.seed}});
    log_info("wrote " + std::to_string(out.manifest.size()) + " patients and " +
             std::to_string(out.notes.size()) + " notes to " + workdir);
    return 0;
}

// --------------------------------------------------------------- curate ----

int cmd_curate(const GlobalOptions& global, const std::string& manifest_arg, int buffer_days,
               int min_words, bool descending_order, double test_fraction) {
    std::string workdir = resolve_workdir(global);
    std::string manifest_path =
        manifest_arg.empty() ? (fs::path(workdir) / "manifest.jsonl").string() : manifest_arg;
    auto records = load_manifest_checked(manifest_path);
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ConfigError("--test-fraction must lie in (0,1)");

    cohort::NoteQualityFilter quality;
    quality.min_words = min_words;

    std::vector<cohort::PatientRecord> curated;
    json drop_log = json::array();
    for (auto& record : records) {
        cohort::PatientRecord filtered = cohort::filter_note_quality(record, quality);
        if (filtered.visits.empty()) {
            drop_log.push_back({{"patient_id", record.patient_id},
                                {"reason", "no notes left after quality filtering"}});
            continue;
        }
        auto leakage_free = cohort::filter_leakage(std::move(filtered), buffer_days);
        if (!leakage_free) {
            drop_log.push_back({{"patient_id", record.patient_id},
                                {"reason", "no notes left before the diagnosis buffer"}});
            continue;
        }
        curated.push_back(std::move(*leakage_free));
    }
    if (curated.empty()) throw InputError("curation removed every patient from " + manifest_path);
    require_both_classes(curated, manifest_path);

    // stratified train/test split, then a matched test set from the test side
    std::vector<std::size_t> test_idx;
    {
        std::vector<std::size_t> pos, neg;
        for (std::size_t i = 0; i < curated.size(); ++i)
            (curated[i].label == cohort::CohortLabel::T2D ? pos : neg).push_back(i);
        Rng rng = Rng::derive(global.seed, 0x5b111700ULL);
        rng.shuffle(pos);
        rng.shuffle(neg);
        auto take = [&](std::vector<std::size_t>& v) {
            std::size_t n = static_cast<std::size_t>(
                std::lround(test_fraction * static_cast<double>(v.size())));
            n = std::max<std::size_t>(1, std::min(n, v.size()));
            test_idx.insert(test_idx.end(), v.begin(), v.begin() + static_cast<long>(n));
        };
        take(pos);
        take(neg);
    }
    std::set<std::size_t> test_split(test_idx.begin(), test_idx.end());

    std::vector<cohort::PatientRecord> test_candidates;
    for (std::size_t i : test_idx) test_candidates.push_back(curated[i]);
    cohort::MatchResult match = cohort::match_cohort(
        test_candidates, descending_order ? cohort::MatchOrder::DescendingScore
                                          : cohort::MatchOrder::InputOrder);

    std::set<std::string> matched_ids;
    for (const auto& pair : match.pairs) {
        matched_ids.insert(pair.treated_id);
        matched_ids.insert(pair.control_id);
    }
    std::vector<cohort::PatientRecord> test_set, train_set;
    for (std::size_t i = 0; i < curated.size(); ++i) {
        const auto& r = curated[i];
        if (!test_split.count(i)) train_set.push_back(r);
        else if (matched_ids.count(r.patient_id)) test_set.push_back(r);
        // test-split patients left unmatched are dropped from evaluation
    }

    fs::path outdir = fs::path(workdir) / "cohort";
    fs::create_directories(outdir);
    cohort::save_manifest(curated, (outdir / "curated.jsonl").string());
    cohort::save_manifest(train_set, (outdir / "train_manifest.jsonl").string());
    cohort::save_manifest(test_set, (outdir / "test_manifest.jsonl").string());
    cohort::save_balance_csv(match.balance, (outdir / "balance.csv").string());
    {
        std::ofstream out(outdir / "propensity.csv");
        out << "patient_id,propensity\n";
        out.precision(17);
        for (const auto& [pid, score] : match.propensity) out << pid << "," << score << "\n";
    }
    {
        json match_log{{"pairs", json::array()},
                       {"unmatched_treated", match.unmatched_treated},
                       {"dropped", drop_log}};
        for (const auto& p : match.pairs)
            match_log["pairs"].push_back({{"treated", p.treated_id}, {"control", p.control_id}});
        std::ofstream out(outdir / "match_log.json");
        out << match_log.dump(2) << "\n";
    }
    write_snapshot(workdir, "curate",
                   json{{"manifest", manifest_path},
                        {"buffer_days", buffer_days},
                        {"min_words", min_words},
                        {"test_fraction", test_fraction},
                        {"match_order", descending_order ? "descending_score" : "input"}});
    log_info("curated " + std::to_string(curated.size()) + " patients; matched test set " +
             std::to_string(test_set.size()) + ", train pool " +
             std::to_string(train_set.size()));
    return 0;
}

// --------------------------------------------------------- build-graphs ----

int cmd_build_graphs(const GlobalOptions& global) {
    std::string workdir = resolve_workdir(global);
    pipeline::Corpus corpus = load_workdir_corpus(workdir);
    fs::path outdir = fs::path(workdir) / "graphs";
    fs::create_directories(outdir);

    std::ofstream reject_log(fs::path(workdir) / "graphs" / "rejected_edges.jsonl");
    std::size_t built = 0;
    for (const auto& [note_id, note] : corpus.notes) {
        std::vector<ingest::RejectedEdge> rejected;
        ingest::VisitGraph graph = pipeline::note_graph(note, corpus, 0, &rejected);
        ingest::save_graph_file(graph, (outdir / (note_id + ".json")).string());
        log_debug(note_id + ": " + std::to_string(graph.nodes.size()) + " nodes, " +
                  std::to_string(graph.edges.size()) + " edges, " +
                  std::to_string(rejected.size()) + " rejected");
        for (const auto& r : rejected)
            reject_log << json{{"note_id", note_id},
                               {"source", r.source},
                               {"target", r.target},
                               {"relation", ingest::relation_name(r.relation)},
                               {"confidence", r.confidence},
                               {"reason", r.reason}}
                              .dump()
                       << "\n";
        ++built;
    }
    write_snapshot(workdir, "build-graphs", json::object());
    log_info("built " + std::to_string(built) + " visit graphs");
    return 0;
}

// ------------------------------------------------------------ featurize ----

int cmd_featurize(const GlobalOptions& global, const FeatureFlags& flags, bool use_text,
                  bool use_kg) {
    std::string workdir = resolve_workdir(global);
    pipeline::Corpus corpus = load_workdir_corpus(workdir);
    pipeline::FeatureConfig config = flags.to_config(global.seed);
    feat::WidthEmbeddingTable widths = feat::WidthEmbeddingTable::seeded(
        config.width_buckets, config.width_dim, config.seed);
    feat::FeatureSwitches switches{use_text, use_kg};

    fs::path outdir = fs::path(workdir) / "features";
    fs::create_directories(outdir);
    std::size_t built = 0;
    for (const auto& [note_id, note] : corpus.notes) {
        ingest::VisitGraph graph = pipeline::note_graph(note, corpus, 0);
        feat::EmbeddingStore store = pipeline::note_store(note, config);
        auto features =
            feat::graph_features(graph, note, store, widths, corpus.knowledge_base, switches);
        json rows = json::array();
        for (const auto& f : features) rows.push_back({{"node", f.node_id}, {"x", f.vector}});
        std::ofstream out(outdir / (note_id + ".json"));
        out << json{{"note_id", note_id}, {"features", rows}}.dump() << "\n";
        ++built;
    }
    {
        json meta = flags.to_json();
        meta["use_text"] = use_text;
        meta["use_kg"] = use_kg;
        meta["d_kg"] = corpus.knowledge_base.vector_dim;
        meta["d_node"] = 2 * config.token_dim + config.width_dim +
                         corpus.knowledge_base.vector_dim;
        meta["seed"] = global.seed;
        std::ofstream out(outdir / "meta.json");
        out << meta.dump(2) << "\n";
    }
    write_snapshot(workdir, "featurize", flags.to_json());
    log_info("featurized " + std::to_string(built) + " notes");
    return 0;
}

// ---------------------------------------------------------------- train ----

int cmd_train(const GlobalOptions& global, const std::string& manifest_arg,
              const FeatureFlags& feature_flags, model::TrainConfig config) {
    std::string workdir = resolve_workdir(global);
    std::string manifest_path = manifest_arg;
    if (manifest_path.empty()) {
        fs::path preferred = fs::path(workdir) / "cohort" / "train_manifest.jsonl";
        manifest_path = fs::exists(preferred) ? preferred.string()
                                              : (fs::path(workdir) / "manifest.jsonl").string();
    }
    config.seed = global.seed;
    config.validate();

    auto records = load_manifest_checked(manifest_path);
    require_both_classes(records, manifest_path);

    pipeline::Corpus corpus = load_workdir_corpus(workdir);
    pipeline::FeatureConfig features = feature_flags.to_config(global.seed);
    std::vector<std::string> warnings;
    auto samples = pipeline::build_samples(records, corpus, features, config, &warnings);
    for (const auto& w : warnings) log_info(w);
    if (samples.empty()) throw InputError("no usable patients in " + manifest_path);

    config.dims.node_dim = samples.front().visits.front().features.front().size();
    model::TrainResult result = model::train(samples, config);

    fs::path outdir = fs::path(workdir) / "model";
    fs::create_directories(outdir);
    model::save_checkpoint(result.ensemble, (outdir / "checkpoint.bin").string());
    model::save_train_log(result.log, (outdir / "train_log.jsonl").string());

    // out-of-fold predictions over the training pool; evaluate falls back to
    // these when no held-out predictions exist yet
    {
        std::vector<double> oof = model::out_of_fold_scores(samples, result);
        std::map<std::string, const cohort::PatientRecord*> by_id;
        for (const auto& r : records) by_id[r.patient_id] = &r;
        std::vector<cohort::PatientRecord> scored;
        for (const auto& s : samples) scored.push_back(*by_id.at(s.patient_id));
        eval::PredictionSet oof_set = pipeline::predictions_from_scores(scored, oof);
        eval::save_predictions_csv(oof_set, (outdir / "oof_predictions.csv").string());
    }
    write_snapshot(workdir, "train", train_flags_json(config, feature_flags));

    for (const auto& member : result.ensemble.members)
        log_info("fold " + std::to_string(member.fold_id) + ": best val AUC " +
                 std::to_string(member.best_val_auc) + " at epoch " +
                 std::to_string(member.best_epoch));
    return 0;
}

// -------------------------------------------------------------- predict ----

int cmd_predict(const GlobalOptions& global, const std::string& manifest_arg,
                const std::string& checkpoint_arg, const std::string& out_arg,
                const FeatureFlags& feature_flags, model::TrainConfig config,
                double threshold) {
    std::string workdir = resolve_workdir(global);
    std::string manifest_path = manifest_arg;
    if (manifest_path.empty()) {
        fs::path preferred = fs::path(workdir) / "cohort" / "test_manifest.jsonl";
        manifest_path = fs::exists(preferred) ? preferred.string()
                                              : (fs::path(workdir) / "manifest.jsonl").string();
    }
    std::string checkpoint_path = checkpoint_arg.empty()
                                      ? (fs::path(workdir) / "model" / "checkpoint.bin").string()
                                      : checkpoint_arg;
    std::string out_path =
        out_arg.empty() ? (fs::path(workdir) / "predictions.csv").string() : out_arg;

    config.seed = global.seed;
    auto records = load_manifest_checked(manifest_path);
    pipeline::Corpus corpus = load_workdir_corpus(workdir);
    pipeline::FeatureConfig features = feature_flags.to_config(global.seed);
    model::Ensemble ensemble = model::load_checkpoint(checkpoint_path);
    config.dims = ensemble.dims;

    eval::PredictionSet predictions = pipeline::predict_records(
        records, corpus, features, config, ensemble, threshold);
    eval::save_predictions_csv(predictions, out_path);
    write_snapshot(workdir, "predict",
                   json{{"manifest", manifest_path},
                        {"checkpoint", checkpoint_path},
                        {"out", out_path},
                        {"threshold", threshold}});
    log_info("wrote " + std::to_string(predictions.entries.size()) + " predictions to " +
             out_path);
    return 0;
}

// ------------------------------------------------- evaluation commands -----

int cmd_compare(const GlobalOptions& global, const std::string& a_path,
                const std::string& b_path, std::vector<std::string> metrics, int replicates,
                const std::string& out_arg);

int cmd_evaluate(const GlobalOptions& global, const std::string& pred_path,
                 const std::string& out_arg, double threshold,
                 const std::vector<std::string>& compare_paths, int replicates) {
    if (!compare_paths.empty()) {
        if (compare_paths.size() != 2)
            throw ConfigError("--compare takes exactly two prediction files");
        return cmd_compare(global, compare_paths[0], compare_paths[1], {}, replicates, "");
    }
    std::string workdir = resolve_workdir(global);
    std::string path = pred_path;
    if (path.empty()) {
        fs::path preferred = fs::path(workdir) / "predictions.csv";
        fs::path oof = fs::path(workdir) / "model" / "oof_predictions.csv";
        if (fs::exists(preferred)) path = preferred.string();
        else if (fs::exists(oof)) path = oof.string();
        else path = preferred.string();  // fail below with the expected name
    }
    eval::PredictionSet set = eval::load_predictions_csv(path, threshold);
    if (set.entries.empty()) throw InputError("predictions file " + path + " is empty");

    double auc;
    try {
        auc = eval::roc_auc(set.entries);
    } catch (const InputError& e) {
        throw InputError(path + ": " + e.what());
    }
    eval::ClassificationReport report = eval::classification_metrics(set.entries);
    json j = eval::report_to_json(report, auc);

    fs::path outdir = out_arg.empty() ? fs::path(workdir) / "reports" : fs::path(out_arg);
    fs::create_directories(outdir);
    {
        std::ofstream out(outdir / "report.json");
        out << j.dump(2) << "\n";
    }
    {
        std::ofstream out(outdir / "report.csv");
        out << "auc,macro_f1,t2d_precision,t2d_recall,nod_precision,nod_recall,n\n";
        out.precision(17);
        out << auc << "," << report.macro_f1 << "," << report.positive.precision << ","
            << report.positive.recall << "," << report.negative.precision << ","
            << report.negative.recall << "," << report.n << "\n";
    }
    write_snapshot(workdir, "evaluate", json{{"pred", path}, {"threshold", threshold}});
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_horizon(const GlobalOptions& global, const std::string& pred_path, int window_days,
                const std::string& out_arg, double threshold) {
    std::string workdir = resolve_workdir(global);
    std::string path =
        pred_path.empty() ? (fs::path(workdir) / "predictions.csv").string() : pred_path;
    eval::PredictionSet set = eval::load_predictions_csv(path, threshold);

    std::vector<eval::PredictionEntry> t2d, controls;
    for (const auto& e : set.entries) {
        if (e.y_true == 1) {
            if (!e.horizon_days)
                throw InputError("predictions file " + path + ": T2D entry " + e.patient_id +
                                 " lacks horizon_days");
            t2d.push_back(e);
        } else {
            controls.push_back(e);
        }
    }
    auto rows = eval::horizon_curve(t2d, controls, window_days);

    std::string out_path =
        out_arg.empty() ? (fs::path(workdir) / "horizon.csv").string() : out_arg;
    std::ofstream out(out_path);
    out << "window_index,window_start_days,auc,t2d_recall,n,aggregated_tail\n";
    out.precision(17);
    for (const auto& r : rows)
        out << r.window_index << "," << r.window_index * window_days << "," << r.auc << ","
            << r.t2d_recall << "," << r.n << "," << (r.aggregated_tail ? 1 : 0) << "\n";
    write_snapshot(workdir, "horizon",
                   json{{"pred", path}, {"window_days", window_days}});
    log_info("wrote " + std::to_string(rows.size()) + " horizon windows to " + out_path);
    return 0;
}

int cmd_fairness(const GlobalOptions& global, const std::string& pred_path,
                 std::vector<std::string> attributes, const std::string& out_arg,
                 double threshold) {
    std::string workdir = resolve_workdir(global);
    std::string path =
        pred_path.empty() ? (fs::path(workdir) / "predictions.csv").string() : pred_path;
    eval::PredictionSet set = eval::load_predictions_csv(path, threshold);

    if (attributes.empty()) {
        std::set<std::string> seen;
        for (const auto& e : set.entries)
            for (const auto& [k, _] : e.groups) seen.insert(k);
        attributes.assign(seen.begin(), seen.end());
    }

    std::string out_path =
        out_arg.empty() ? (fs::path(workdir) / "fairness.csv").string() : out_arg;
    std::ofstream out(out_path);
    out << "attribute,group,n,dpd,eod\n";
    out.precision(17);
    for (const auto& attribute : attributes) {
        std::map<std::string, std::size_t> groups;
        for (const auto& e : set.entries) {
            auto it = e.groups.find(attribute);
            if (it != e.groups.end()) ++groups[it->second];
        }
        for (const auto& [group, n] : groups) {
            std::string dpd = "", eod = "";
            try {
                dpd = std::to_string(
                    eval::demographic_parity_difference(set.entries, attribute, group));
            } catch (const InputError&) {
            }
            try {
                eod = std::to_string(
                    eval::equal_opportunity_difference(set.entries, attribute, group));
            } catch (const InputError&) {
            }
            out << attribute << "," << group << "," << n << "," << dpd << "," << eod << "\n";
        }
    }
    write_snapshot(workdir, "fairness", json{{"pred", path}, {"attributes", attributes}});
    log_info("wrote fairness table to " + out_path);
    return 0;
}

int cmd_compare(const GlobalOptions& global, const std::string& a_path,
                const std::string& b_path, std::vector<std::string> metrics, int replicates,
                const std::string& out_arg) {
    std::string workdir = resolve_workdir(global);
    eval::PredictionSet a = eval::load_predictions_csv(a_path);
    eval::PredictionSet b = eval::load_predictions_csv(b_path);
    if (metrics.empty())
        metrics = {"auc", "macro_f1", "t2d_precision", "t2d_recall", "nod_precision",
                   "nod_recall"};

    std::string out_path =
        out_arg.empty() ? (fs::path(workdir) / "significance.csv").string() : out_arg;
    std::ofstream out(out_path);
    out << "metric,mean_diff,sd,ci_low,ci_high,p_value,replicates\n";
    out.precision(17);
    json table = json::array();
    for (const auto& name : metrics) {
        eval::BootstrapResult r = eval::bootstrap_compare(
            a.entries, b.entries, eval::metric_by_name(name), replicates, global.seed);
        out << name << "," << r.mean_diff << "," << r.sd << "," << r.ci_low << "," << r.ci_high
            << "," << r.p_value << "," << r.replicates << "\n";
        table.push_back({{"metric", name},
                         {"mean_diff", r.mean_diff},
                         {"sd", r.sd},
                         {"ci95", {r.ci_low, r.ci_high}},
                         {"p_value", r.p_value}});
    }
    write_snapshot(workdir, "compare",
                   json{{"a", a_path}, {"b", b_path}, {"replicates", replicates},
                        {"metrics", metrics}});
    std::cout << table.dump(2) << "\n";
    return 0;
}

// ------------------------------------------------------------ reveal-run ---

int cmd_reveal_run(const GlobalOptions& global, const std::string& manifest_arg,
                   const std::string& reasoner_spec, const std::string& verifier_spec,
                   std::size_t n_paths, std::size_t k, std::size_t notes_per_case,
                   const std::string& out_arg, const std::string& record_reasoner,
                   const std::string& record_verifier) {
    std::string workdir = resolve_workdir(global);
    std::string manifest_path = manifest_arg;
    if (manifest_path.empty()) {
        fs::path preferred = fs::path(workdir) / "cohort" / "test_manifest.jsonl";
        manifest_path = fs::exists(preferred) ? preferred.string()
                                              : (fs::path(workdir) / "manifest.jsonl").string();
    }
    auto records = load_manifest_checked(manifest_path);
    pipeline::Corpus corpus = load_workdir_corpus(workdir);

    std::vector<reveal::CaseInput> cases;
    for (const auto& record : records) {
        std::vector<ingest::NoteExtraction> notes;
        for (const auto& visit : record.visits) {
            auto it = corpus.notes.find(visit.note_id);
            if (it == corpus.notes.end())
                throw InputError("patient " + record.patient_id + ": note '" + visit.note_id +
                                 "' not found in the corpus");
            notes.push_back(it->second);
        }
        notes = ingest::truncate_visits(ingest::sort_notes_by_visit(std::move(notes)),
                                        notes_per_case);
        json documents = json::array();
        for (const auto& note : notes) {
            std::string text;
            for (const auto& m : note.mentions) {
                if (!text.empty()) text += " ";
                text += m.text;
            }
            documents.push_back(
                {{"note_id", note.note_id},
                 {"date", note.visit_date ? json(note.visit_date->to_iso()) : json(nullptr)},
                 {"note_type", note.note_type},
                 {"text", text}});
        }
        json demographics{{"age", record.demographics.age},
                          {"gender", record.demographics.gender},
                          {"race", record.demographics.race}};
        if (record.demographics.ethnicity) demographics["ethnicity"] = *record.demographics.ethnicity;
        cases.push_back({record.patient_id, std::move(documents), std::move(demographics)});
    }

    auto reasoner = reveal::make_backend(reasoner_spec, record_reasoner);
    auto verifier = reveal::make_backend(verifier_spec, record_verifier);
    std::string audit_path = (fs::path(workdir) / "reveal_audit.jsonl").string();
    reveal::RunResult result =
        reveal::run_reveal(cases, *reasoner, *verifier, n_paths, k, audit_path);

    // PredictionSet rows: score is mapped to P(T2D)
    eval::PredictionSet predictions;
    std::map<std::string, const cohort::PatientRecord*> by_id;
    for (const auto& r : records) by_id[r.patient_id] = &r;
    for (const auto& c : result.cases) {
        if (!c.ok) {
            log_info("case " + c.case_id + " failed: " + c.error);
            continue;
        }
        const cohort::PatientRecord& record = *by_id.at(c.case_id);
        eval::PredictionEntry e;
        e.patient_id = c.case_id;
        e.y_true = record.label == cohort::CohortLabel::T2D ? 1 : 0;
        e.score = c.label ? c.score : 1.0 - c.score;
        e.groups["gender"] = record.demographics.gender;
        e.groups["race"] = record.demographics.race;
        if (record.demographics.ethnicity) e.groups["ethnicity"] = *record.demographics.ethnicity;
        if (e.y_true == 1) e.horizon_days = pipeline::horizon_days(record);
        predictions.entries.push_back(std::move(e));
    }
    predictions.apply_threshold();

    std::string out_path =
        out_arg.empty() ? (fs::path(workdir) / "reveal_predictions.csv").string() : out_arg;
    eval::save_predictions_csv(predictions, out_path);
    write_snapshot(workdir, "reveal-run",
                   json{{"manifest", manifest_path},
                        {"reasoner", reasoner_spec},
                        {"verifier", verifier_spec},
                        {"n_paths", n_paths},
                        {"k", k},
                        {"notes_per_case", notes_per_case}});
    log_info("labeled " + std::to_string(predictions.entries.size()) + " of " +
             std::to_string(cases.size()) + " cases; audit log at " + audit_path);
    return result.partial_failure ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Longitudinal risk prediction over per-note temporal graphs"};
    app.require_subcommand(1);

    GlobalOptions global;
    app.add_option("--workdir", global.workdir,
                   "Working directory (default $TRAJGRAPH_WORKDIR or .)")
        ->envname("TRAJGRAPH_WORKDIR");
    app.add_option("--seed", global.seed, "Global random seed");
    app.add_option("--log-level", global.log_level, "quiet|info|debug")
        ->check(CLI::IsMember({"quiet", "info", "debug"}));

    // synth
    synth::SynthConfig synth_config;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic cohort");
    synth_cmd->add_option("--n", synth_config.n_patients, "Number of patients");
    synth_cmd->add_option("--min-visits", synth_config.min_visits, "Minimum visits");
    synth_cmd->add_option("--max-visits", synth_config.max_visits, "Maximum visits");
    synth_cmd->add_option("--p-label", synth_config.p_label_given_order,
                          "P(T2D | event_a before event_b)");
    synth_cmd->add_option("--order-prob", synth_config.order_prob,
                          "Fraction of patients with event_a first");
    synth_cmd->add_option("--shift", synth_config.demographic_shift,
                          "Planted pre-match covariate SMD");
    synth_cmd->add_option("--min-noise", synth_config.min_noise_relations,
                          "Minimum noise relations per note");
    synth_cmd->add_option("--max-noise", synth_config.max_noise_relations,
                          "Maximum noise relations per note");
    synth_cmd->add_option("--kg-dim", synth_config.kg_dim, "Concept vector width");
    synth_cmd->add_option("--event-a", synth_config.event_a, "First motif event surface");
    synth_cmd->add_option("--event-b", synth_config.event_b, "Second motif event surface");

    // curate
    std::string curate_manifest;
    int buffer_days = 3, min_words = 100;
    bool match_descending = false;
    double test_fraction = 0.2;
    auto* curate_cmd =
        app.add_subcommand("curate", "Leakage-safe filtering, propensity matching");
    curate_cmd->add_option("--manifest", curate_manifest, "Input manifest (JSON lines)");
    curate_cmd->add_option("--buffer-days", buffer_days, "Pre-diagnosis exclusion buffer");
    curate_cmd->add_option("--min-words", min_words, "Minimum words per note");
    curate_cmd->add_option("--test-fraction", test_fraction,
                           "Stratified share of patients held out for the matched test set");
    curate_cmd->add_flag("--match-descending-score", match_descending,
                         "Process treated patients by descending propensity");

    // build-graphs
    auto* graphs_cmd =
        app.add_subcommand("build-graphs", "Reduce per-note temporal graphs and augment");

    // featurize
    FeatureFlags featurize_flags;
    bool featurize_use_text = true, featurize_use_kg = true;
    auto* feat_cmd = app.add_subcommand("featurize", "Assemble node feature files");
    featurize_flags.add_to(feat_cmd);
    feat_cmd->add_flag("--use-text-emb,!--no-use-text-emb", featurize_use_text,
                       "Fill the text/width slots");
    feat_cmd->add_flag("--use-kg-emb,!--no-use-kg-emb", featurize_use_kg,
                       "Fill the concept-vector slot");

    // train
    std::string train_manifest;
    FeatureFlags train_features;
    ModelFlags train_model;
    auto* train_cmd = app.add_subcommand("train", "Train the trajectory model");
    train_cmd->add_option("--manifest", train_manifest, "Training manifest");
    train_features.add_to(train_cmd);
    train_model.add_to(train_cmd);

    // predict
    std::string predict_manifest, predict_checkpoint, predict_out;
    FeatureFlags predict_features;
    ModelFlags predict_model;
    double predict_threshold = 0.5;
    auto* predict_cmd = app.add_subcommand("predict", "Score patients with a checkpoint");
    predict_cmd->add_option("--manifest", predict_manifest, "Manifest to score");
    predict_cmd->add_option("--checkpoint", predict_checkpoint, "Model checkpoint");
    predict_cmd->add_option("--out", predict_out, "Predictions CSV path");
    predict_cmd->add_option("--threshold", predict_threshold, "Hard-label threshold");
    predict_features.add_to(predict_cmd);
    predict_model.add_to(predict_cmd);

    // evaluate
    std::string eval_pred, eval_out;
    double eval_threshold = 0.5;
    std::vector<std::string> eval_compare;
    int eval_replicates = 10000;
    auto* eval_cmd = app.add_subcommand("evaluate", "Metrics report for a predictions file");
    eval_cmd->add_option("--pred", eval_pred, "Predictions CSV");
    eval_cmd->add_option("--out", eval_out, "Report directory");
    eval_cmd->add_option("--threshold", eval_threshold, "Hard-label threshold");
    eval_cmd->add_option("--compare", eval_compare,
                         "Two prediction files: run the significance comparison instead")
        ->expected(2);
    eval_cmd->add_option("--replicates", eval_replicates, "Bootstrap replicates");

    // horizon
    std::string horizon_pred, horizon_out;
    int window_days = 91;
    double horizon_threshold = 0.5;
    auto* horizon_cmd = app.add_subcommand("horizon", "AUC by prediction horizon window");
    horizon_cmd->add_option("--pred", horizon_pred, "Predictions CSV");
    horizon_cmd->add_option("--window-days", window_days, "Window width in days");
    horizon_cmd->add_option("--out", horizon_out, "Output CSV");
    horizon_cmd->add_option("--threshold", horizon_threshold, "Hard-label threshold");

    // fairness
    std::string fairness_pred, fairness_out;
    std::vector<std::string> fairness_attrs;
    double fairness_threshold = 0.5;
    auto* fairness_cmd = app.add_subcommand("fairness", "Group DPD/EOD tables");
    fairness_cmd->add_option("--pred", fairness_pred, "Predictions CSV");
    fairness_cmd->add_option("--attributes", fairness_attrs,
                             "Group attributes (default: all columns)");
    fairness_cmd->add_option("--out", fairness_out, "Output CSV");
    fairness_cmd->add_option("--threshold", fairness_threshold, "Hard-label threshold");

    // compare
    std::string compare_a, compare_b, compare_out;
    std::vector<std::string> compare_metrics;
    int compare_replicates = 10000;
    auto* compare_cmd =
        app.add_subcommand("compare", "Paired bootstrap significance between two models");
    compare_cmd->add_option("a", compare_a, "First predictions CSV")->required();
    compare_cmd->add_option("b", compare_b, "Second predictions CSV")->required();
    compare_cmd->add_option("--metrics", compare_metrics, "Metrics to compare");
    compare_cmd->add_option("--replicates", compare_replicates, "Bootstrap replicates");
    compare_cmd->add_option("--out", compare_out, "Output CSV");

    // reveal-run
    std::string reveal_manifest, reveal_reasoner, reveal_verifier, reveal_out;
    std::string reveal_record_reasoner, reveal_record_verifier;
    std::size_t n_paths = 10, top_k = 3, notes_per_case = 2;
    auto* reveal_cmd =
        app.add_subcommand("reveal-run", "Verifier-aided labeling over a manifest");
    reveal_cmd->add_option("--manifest", reveal_manifest, "Manifest of cases");
    reveal_cmd->add_option("--reasoner", reveal_reasoner,
                           "Backend spec: constant:<json> | scripted:<path> | command:<cmd>")
        ->required();
    reveal_cmd->add_option("--verifier", reveal_verifier, "Backend spec")->required();
    reveal_cmd->add_option("--n-paths", n_paths, "Reasoning paths per case");
    reveal_cmd->add_option("--k", top_k, "Top-k highest-confidence vote");
    reveal_cmd->add_option("--notes-per-case", notes_per_case, "Last N notes per case");
    reveal_cmd->add_option("--out", reveal_out, "Predictions CSV path");
    reveal_cmd->add_option("--record-reasoner", reveal_record_reasoner,
                           "Record reasoner exchanges to a replay file");
    reveal_cmd->add_option("--record-verifier", reveal_record_verifier,
                           "Record verifier exchanges to a replay file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;  // bad flags exit 1; --help exits 0
    }

    g_log_level = global.log_level == "quiet" ? 0 : global.log_level == "debug" ? 2 : 1;

    try {
        if (synth_cmd->parsed()) {
            synth_config.seed = global.seed;
            synth_config.seed_set = true;
            return cmd_synth(global, synth_config);
        }
        if (curate_cmd->parsed())
            return cmd_curate(global, curate_manifest, buffer_days, min_words,
                              match_descending, test_fraction);
        if (graphs_cmd->parsed()) return cmd_build_graphs(global);
        if (feat_cmd->parsed())
            return cmd_featurize(global, featurize_flags, featurize_use_text, featurize_use_kg);
        if (train_cmd->parsed())
            return cmd_train(global, train_manifest, train_features, train_model.config);
        if (predict_cmd->parsed())
            return cmd_predict(global, predict_manifest, predict_checkpoint, predict_out,
                               predict_features, predict_model.config, predict_threshold);
        if (eval_cmd->parsed())
            return cmd_evaluate(global, eval_pred, eval_out, eval_threshold, eval_compare,
                                eval_replicates);
        if (horizon_cmd->parsed())
            return cmd_horizon(global, horizon_pred, window_days, horizon_out,
                               horizon_threshold);
        if (fairness_cmd->parsed())
            return cmd_fairness(global, fairness_pred, fairness_attrs, fairness_out,
                                fairness_threshold);
        if (compare_cmd->parsed())
            return cmd_compare(global, compare_a, compare_b, compare_metrics,
                               compare_replicates, compare_out);
        if (reveal_cmd->parsed())
            return cmd_reveal_run(global, reveal_manifest, reveal_reasoner, reveal_verifier,
                                  n_paths, top_k, notes_per_case, reveal_out,
                                  reveal_record_reasoner, reveal_record_verifier);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
