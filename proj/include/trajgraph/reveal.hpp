#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace trajgraph::reveal {

struct ReasoningPath {
    int path_id = 0;
    bool prediction = false;
    std::string explanation;
    std::optional<std::pair<double, double>> label_likelihoods;  // (l_true, l_false)
};

struct VerifierJudgment {
    int path_id = 0;
    double confidence = 0.0;  // in [0,1]
};

// p_correct / (p_correct + p_incorrect). Throws InputError when both are zero
// or either is negative.
double normalize_confidence(double p_correct, double p_incorrect);

struct Aggregation {
    bool label = false;
    std::vector<ReasoningPath> supporting;  // top-k paths voting for the label
    double score = 0.0;                     // mean confidence of the winning side
};

// Majority vote among the k highest-confidence paths (confidence ties keep
// the lower path_id). An even-k tie goes to the side with the larger summed
// confidence; an exact sum tie goes to the top-ranked path's label.
Aggregation aggregate(const std::vector<ReasoningPath>& paths,
                      const std::vector<VerifierJudgment>& judgments, std::size_t k);

// Reasoner/verifier adapter. Requests and responses are JSON documents; see
// the wire schema in the README.
class Backend {
public:
    virtual ~Backend() = default;
    virtual nlohmann::json call(const nlohmann::json& request) = 0;
};

// Fixed response for every request.
class ConstantBackend : public Backend {
public:
    explicit ConstantBackend(nlohmann::json response) : response_(std::move(response)) {}
    nlohmann::json call(const nlohmann::json&) override { return response_; }

private:
    nlohmann::json response_;
};

// Exact replay from a JSON-lines file of {key, response} records where key is
// the content hash of the canonical request.
class ScriptedBackend : public Backend {
public:
    explicit ScriptedBackend(const std::string& replay_path);
    nlohmann::json call(const nlohmann::json& request) override;

private:
    std::string path_;
    std::map<std::string, nlohmann::json> responses_;
};

// Spawns a shell command per request, writes the request JSON to its stdin,
// and parses its stdout as the response JSON.
class ExternalCommandBackend : public Backend {
public:
    explicit ExternalCommandBackend(std::string command) : command_(std::move(command)) {}
    nlohmann::json call(const nlohmann::json& request) override;

private:
    std::string command_;
};

// Wraps another backend and appends each exchange to a replay file usable by
// ScriptedBackend.
class RecordingBackend : public Backend {
public:
    RecordingBackend(std::shared_ptr<Backend> inner, const std::string& record_path);
    nlohmann::json call(const nlohmann::json& request) override;

private:
    std::shared_ptr<Backend> inner_;
    std::string path_;
};

std::string request_key(const nlohmann::json& request);

// Backend spec strings for the CLI: "constant:<json>", "scripted:<path>",
// "command:<shell command>". Optionally records exchanges to record_path.
std::shared_ptr<Backend> make_backend(const std::string& spec,
                                      const std::string& record_path = "");

struct CaseInput {
    std::string case_id;
    nlohmann::json documents;
    nlohmann::json demographics;
};

struct CaseResult {
    std::string case_id;
    bool ok = false;
    bool label = false;
    double score = 0.0;
    std::string error;
};

struct RunResult {
    std::vector<CaseResult> cases;
    bool partial_failure = false;
};

// Orchestrates generate -> verify -> aggregate per case. Backend failures
// mark the case failed and the run continues. When audit_log_path is set,
// every case appends one JSON line with all paths and judgments.
RunResult run_reveal(const std::vector<CaseInput>& cases, Backend& reasoner, Backend& verifier,
                     std::size_t n_paths, std::size_t k,
                     const std::string& audit_log_path = "");

}  // namespace trajgraph::reveal
