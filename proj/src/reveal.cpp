#include "trajgraph/reveal.hpp"

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>

#include <csignal>
#include <sys/wait.h>
#include <unistd.h>

#include "trajgraph/common.hpp"

namespace trajgraph::reveal {

using nlohmann::json;

double normalize_confidence(double p_correct, double p_incorrect) {
    if (p_correct < 0.0 || p_incorrect < 0.0)
        throw InputError("confidence likelihoods must be non-negative");
    if (p_correct == 0.0 && p_incorrect == 0.0)
        throw InputError("confidence likelihoods are both zero");
    return p_correct / (p_correct + p_incorrect);
}

Aggregation aggregate(const std::vector<ReasoningPath>& paths,
                      const std::vector<VerifierJudgment>& judgments, std::size_t k) {
    if (paths.size() != judgments.size())
        throw InputError("aggregate: paths and judgments differ in count");
    if (k < 1) throw ConfigError("aggregate: k must be >= 1");
    if (k > paths.size())
        throw ConfigError("aggregate: k (" + std::to_string(k) + ") exceeds path count (" +
                          std::to_string(paths.size()) + ")");

    for (const auto& j : judgments)
        if (!(j.confidence >= 0.0 && j.confidence <= 1.0))
            throw InputError("aggregate: judgment confidence outside [0,1]");

    struct Ranked {
        const ReasoningPath* path;
        double confidence;
    };
    std::vector<Ranked> ranked;
    ranked.reserve(paths.size());
    for (const auto& p : paths) {
        const VerifierJudgment* match = nullptr;
        for (const auto& j : judgments) {
            if (j.path_id != p.path_id) continue;
            if (match)
                throw InputError("aggregate: duplicate judgment for path " +
                                 std::to_string(p.path_id));
            match = &j;
        }
        if (!match)
            throw InputError("aggregate: no judgment for path " + std::to_string(p.path_id));
        ranked.push_back({&p, match->confidence});
    }
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        return a.path->path_id < b.path->path_id;
    });

    double sum_true = 0.0, sum_false = 0.0;
    std::size_t votes_true = 0, votes_false = 0;
    for (std::size_t i = 0; i < k; ++i) {
        if (ranked[i].path->prediction) {
            ++votes_true;
            sum_true += ranked[i].confidence;
        } else {
            ++votes_false;
            sum_false += ranked[i].confidence;
        }
    }

    bool label;
    if (votes_true != votes_false) label = votes_true > votes_false;
    else if (sum_true != sum_false) label = sum_true > sum_false;
    else label = ranked.front().path->prediction;

    Aggregation out;
    out.label = label;
    double winner_sum = 0.0;
    std::size_t winner_count = 0;
    for (std::size_t i = 0; i < k; ++i) {
        if (ranked[i].path->prediction != label) continue;
        out.supporting.push_back(*ranked[i].path);
        winner_sum += ranked[i].confidence;
        ++winner_count;
    }
    out.score = winner_count == 0 ? 0.0 : winner_sum / static_cast<double>(winner_count);
    return out;
}

std::string request_key(const json& request) { return to_hex(fnv1a64(request.dump())); }

ScriptedBackend::ScriptedBackend(const std::string& replay_path) : path_(replay_path) {
    std::ifstream in(replay_path);
    if (!in) throw InputError("cannot open replay file " + replay_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw InputError(replay_path + ":" + std::to_string(line_no) + ": invalid JSON (" +
                             e.what() + ")");
        }
        if (!j.contains("key") || !j.contains("response"))
            throw InputError(replay_path + ":" + std::to_string(line_no) +
                             ": expected {key, response}");
        responses_[j.at("key").get<std::string>()] = j.at("response");
    }
}

json ScriptedBackend::call(const json& request) {
    auto it = responses_.find(request_key(request));
    if (it == responses_.end())
        throw InputError("replay file " + path_ + " has no response for request key " +
                         request_key(request));
    return it->second;
}

json ExternalCommandBackend::call(const json& request) {
    // a child that exits before draining stdin must not kill us
    static const bool sigpipe_ignored = [] {
        signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)sigpipe_ignored;

    int to_child[2], from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0)
        throw InputError("backend command: pipe failed: " + std::string(std::strerror(errno)));

    pid_t pid = fork();
    if (pid < 0)
        throw InputError("backend command: fork failed: " + std::string(std::strerror(errno)));
    if (pid == 0) {
        dup2(to_child[0], STDIN_FILENO);
        dup2(from_child[1], STDOUT_FILENO);
        close(to_child[0]);
        close(to_child[1]);
        close(from_child[0]);
        close(from_child[1]);
        execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);

    std::string payload = request.dump();
    payload.push_back('\n');
    std::size_t written = 0;
    while (written < payload.size()) {
        ssize_t n = write(to_child[1], payload.data() + written, payload.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            break;
        }
        written += static_cast<std::size_t>(n);
    }
    close(to_child[1]);

    std::string output;
    char buf[4096];
    for (;;) {
        ssize_t n = read(from_child[0], buf, sizeof buf);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        output.append(buf, static_cast<std::size_t>(n));
    }
    close(from_child[0]);

    int status = 0;
    waitpid(pid, &status, 0);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
        throw InputError("backend command '" + command_ + "' exited with status " +
                         std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1));
    try {
        return json::parse(output);
    } catch (const json::parse_error& e) {
        throw InputError("backend command '" + command_ + "' returned invalid JSON (" +
                         e.what() + ")");
    }
}

RecordingBackend::RecordingBackend(std::shared_ptr<Backend> inner, const std::string& record_path)
    : inner_(std::move(inner)), path_(record_path) {
    std::ofstream out(path_, std::ios::trunc);
    if (!out) throw InputError("cannot write replay file " + path_);
}

json RecordingBackend::call(const json& request) {
    json response = inner_->call(request);
    std::ofstream out(path_, std::ios::app);
    out << json{{"key", request_key(request)}, {"response", response}}.dump() << "\n";
    return response;
}

std::shared_ptr<Backend> make_backend(const std::string& spec, const std::string& record_path) {
    std::shared_ptr<Backend> backend;
    auto colon = spec.find(':');
    std::string kind = colon == std::string::npos ? spec : spec.substr(0, colon);
    std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
    if (kind == "constant") {
        try {
            backend = std::make_shared<ConstantBackend>(json::parse(arg));
        } catch (const json::parse_error& e) {
            throw ConfigError("constant backend needs a JSON argument: " + std::string(e.what()));
        }
    } else if (kind == "scripted") {
        backend = std::make_shared<ScriptedBackend>(arg);
    } else if (kind == "command") {
        backend = std::make_shared<ExternalCommandBackend>(arg);
    } else {
        throw ConfigError("unknown backend spec '" + spec +
                          "' (expected constant:, scripted:, or command:)");
    }
    if (!record_path.empty()) backend = std::make_shared<RecordingBackend>(backend, record_path);
    return backend;
}

namespace {

std::vector<ReasoningPath> parse_reasoner_response(const json& response) {
    if (!response.contains("paths") || !response.at("paths").is_array())
        throw InputError("reasoner response lacks a 'paths' array");
    std::vector<ReasoningPath> paths;
    int next_id = 0;
    for (const auto& jp : response.at("paths")) {
        ReasoningPath p;
        p.path_id = next_id++;
        if (!jp.contains("prediction")) throw InputError("reasoner path lacks 'prediction'");
        p.prediction = jp.at("prediction").get<bool>();
        p.explanation = jp.value("explanation", std::string{});
        if (jp.contains("l_true") && jp.contains("l_false") && !jp.at("l_true").is_null() &&
            !jp.at("l_false").is_null())
            p.label_likelihoods = {jp.at("l_true").get<double>(), jp.at("l_false").get<double>()};
        paths.push_back(std::move(p));
    }
    return paths;
}

double parse_verifier_response(const json& response) {
    if (response.contains("confidence")) {
        double c = response.at("confidence").get<double>();
        if (!(c >= 0.0 && c <= 1.0))
            throw InputError("verifier confidence outside [0,1]");
        return c;
    }
    if (response.contains("l_correct") && response.contains("l_incorrect"))
        return normalize_confidence(response.at("l_correct").get<double>(),
                                    response.at("l_incorrect").get<double>());
    throw InputError("verifier response has neither 'confidence' nor likelihood pair");
}

}  // namespace

RunResult run_reveal(const std::vector<CaseInput>& cases, Backend& reasoner, Backend& verifier,
                     std::size_t n_paths, std::size_t k, const std::string& audit_log_path) {
    if (k < 1 || k > n_paths) throw ConfigError("reveal: need 1 <= k <= n_paths");

    std::ofstream audit;
    if (!audit_log_path.empty()) {
        audit.open(audit_log_path, std::ios::trunc);
        if (!audit) throw InputError("cannot write audit log " + audit_log_path);
    }

    RunResult result;
    for (const auto& input : cases) {
        CaseResult cr;
        cr.case_id = input.case_id;
        json audit_entry{{"case_id", input.case_id}};
        try {
            json request{{"case_id", input.case_id},
                         {"documents", input.documents},
                         {"demographics", input.demographics},
                         {"n_samples", n_paths}};
            std::vector<ReasoningPath> paths = parse_reasoner_response(reasoner.call(request));
            if (paths.size() != n_paths)
                throw InputError("reasoner returned " + std::to_string(paths.size()) +
                                 " paths, expected " + std::to_string(n_paths));

            std::vector<VerifierJudgment> judgments;
            json audit_paths = json::array(), audit_judgments = json::array();
            for (const auto& p : paths) {
                json vreq{{"case_id", input.case_id},
                          {"documents", input.documents},
                          {"path", {{"prediction", p.prediction},
                                    {"explanation", p.explanation}}}};
                double confidence = parse_verifier_response(verifier.call(vreq));
                judgments.push_back({p.path_id, confidence});
                audit_paths.push_back({{"path_id", p.path_id},
                                       {"prediction", p.prediction},
                                       {"explanation", p.explanation}});
                audit_judgments.push_back({{"path_id", p.path_id}, {"confidence", confidence}});
            }

            Aggregation agg = aggregate(paths, judgments, k);
            cr.ok = true;
            cr.label = agg.label;
            cr.score = agg.score;
            audit_entry["paths"] = std::move(audit_paths);
            audit_entry["judgments"] = std::move(audit_judgments);
            audit_entry["label"] = agg.label;
            audit_entry["score"] = agg.score;
        } catch (const std::exception& e) {
            cr.ok = false;
            cr.error = e.what();
            result.partial_failure = true;
            audit_entry["error"] = cr.error;
        }
        if (audit.is_open()) audit << audit_entry.dump() << "\n";
        result.cases.push_back(std::move(cr));
    }
    return result;
}

}  // namespace trajgraph::reveal
