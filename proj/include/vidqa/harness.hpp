// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vidqa/backend.hpp"
#include "vidqa/controller.hpp"
#include "vidqa/media.hpp"

namespace vidqa::harness {

inline constexpr const char* kEngineVersion = "0.1.0";

struct QARecord {
    std::string id;
    std::string video_path;
    std::string question;
    std::vector<std::string> options; // exactly 4
    char gold = 'A';
    std::string domain;
    std::string task;
    double duration_s = 0.0;
};

/// Parse the documented JSON-array dataset format. Rejects duplicate ids
/// and malformed records with per-record diagnostics.
std::vector<QARecord> parse_dataset(const std::string& json_text);
std::vector<QARecord> load_dataset(const std::string& path);

struct SubsetPlan {
    std::map<std::pair<std::string, std::string>, long> cells; // (domain, task) -> n
    long budget = 0;
    std::uint64_t seed = 0;

    long domain_total(const std::string& domain) const;
    nlohmann::json to_json() const;
};

/// Two-stage stratified sampling: domain marginals matched exactly via
/// floor + largest remainder, then task allocation within each domain the
/// same way; per-cell draws are seeded and without replacement; a final
/// balancing pass may move at most 2 samples.
std::pair<SubsetPlan, std::vector<QARecord>> stratified_subset(
    const std::vector<QARecord>& records, long budget, std::uint64_t seed);

/// Repair a subset whose per-cell histogram drifted from the plan by
/// swapping at most `max_moves` records (deterministic cell order). Raises
/// when more moves would be needed.
std::vector<QARecord> rebalance_subset(const SubsetPlan& plan,
                                       const std::vector<QARecord>& all,
                                       std::vector<QARecord> subset,
                                       int max_moves = 2);

/// Duration buckets used in evaluation reports.
std::string duration_class(double duration_s); // short <=120s, medium <=900s

struct BackendSet {
    backend::ChatBackend* chat = nullptr;
    backend::ChatBackend* understanding = nullptr;
    backend::TranscribeBackend* transcription = nullptr;
    std::shared_ptr<void> owner; // keeps a per-record backend alive
};

/// Supplies backends per record: remote mode returns shared clients,
/// scripted mode builds a fresh transcript-backed set per record.
using BackendProvider = std::function<BackendSet(const QARecord&)>;

struct EvalConfig {
    controller::AgentConfig agent;
    int parallelism = 1;
    bool skip_missing_videos = false;
    std::string trace_dir; // empty disables trace files
};

struct EvalItem {
    std::string id;
    char gold = 0;
    char letter = 0; // 0 when no answer was produced
    bool correct = false;
    bool aborted = false;
    bool skipped = false;
    bool forced = false;
    int steps_used = 0;
    std::int64_t total_tokens = 0;
    std::string abort_reason;
    std::string domain;
    std::string duration_bucket;
};

struct EvalReport {
    std::vector<EvalItem> items;
    long scored = 0;
    long correct = 0;
    long skipped = 0;
    double accuracy_pct = 0.0;
    std::map<std::string, double> accuracy_by_domain;
    std::map<std::string, double> accuracy_by_duration;

    nlohmann::json to_json() const;
};

EvalReport evaluate(const std::vector<QARecord>& records,
                    const BackendProvider& provider, const EvalConfig& cfg);

// ---------------------------------------------------------------------------
// Trace logging and replay

struct Trace {
    nlohmann::json header;
    std::vector<nlohmann::json> events;
};

nlohmann::json trace_header(const controller::AgentConfig& cfg,
                            const media::VideoHandle& video,
                            const std::string& question,
                            const std::vector<std::string>& options);

std::string render_trace(const Trace& trace);
void write_trace(const std::string& path, const Trace& trace);
Trace parse_trace(const std::string& text);
Trace read_trace(const std::string& path);

/// Run one record end to end, producing its trace.
struct RunOutcome {
    controller::RunResult result;
    Trace trace;
    cost::TokenLedger ledger;
};
RunOutcome run_record(const QARecord& rec, const BackendSet& backends,
                      const controller::AgentConfig& cfg);

struct ReplayResult {
    controller::RunResult result;
    Trace trace;           // regenerated
    std::string rendered;  // regenerated bytes, comparable to the input
};

/// Re-execute a run from its trace with a transcript-backed backend built
/// from the call records. Checks the engine version and rejects truncated
/// traces (no final/abort record).
ReplayResult replay(const Trace& trace, bool strict = false);

} // namespace vidqa::harness
