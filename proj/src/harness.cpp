// SPDX-License-Identifier: Apache-2.0
#include "vidqa/harness.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "vidqa/assets.hpp"
#include "vidqa/errors.hpp"
#include "vidqa/image.hpp"

namespace vidqa::harness {

namespace {

char parse_gold(const nlohmann::json& rec, size_t index) {
    const auto& gold = rec.at("gold");
    if (!gold.is_string() || gold.get<std::string>().size() != 1) {
        throw ValidationError("record #" + std::to_string(index) +
                              ": gold must be a single letter A-D");
    }
    const char c = gold.get<std::string>()[0];
    if (c < 'A' || c > 'D') {
        throw ValidationError("record #" + std::to_string(index) +
                              ": gold must be a single letter A-D");
    }
    return c;
}

std::string require_string(const nlohmann::json& rec, const char* field,
                           size_t index) {
    if (!rec.contains(field) || !rec.at(field).is_string()) {
        throw ValidationError("record #" + std::to_string(index) +
                              ": missing or non-string field \"" + field + "\"");
    }
    return rec.at(field).get<std::string>();
}

/// floor(budget * w_i / W) plus largest-remainder distribution of the
/// leftover units; ties go to the earlier index.
std::vector<long> largest_remainder(const std::vector<long>& weights,
                                    long budget) {
    long total = 0;
    for (long w : weights) {
        total += w;
    }
    if (total <= 0) {
        throw Error("largest_remainder over empty weights");
    }
    std::vector<long> alloc(weights.size());
    std::vector<std::pair<long, size_t>> remainders; // (remainder, index)
    long assigned = 0;
    for (size_t i = 0; i < weights.size(); ++i) {
        alloc[i] = budget * weights[i] / total;
        assigned += alloc[i];
        remainders.emplace_back(budget * weights[i] % total, i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (long left = budget - assigned, i = 0; left > 0; --left, ++i) {
        alloc[remainders[static_cast<size_t>(i)].second] += 1;
    }
    return alloc;
}

std::uint64_t cell_seed(std::uint64_t seed, const std::string& domain,
                        const std::string& task) {
    const std::string key =
        std::to_string(seed) + '\x1f' + domain + '\x1f' + task;
    return std::stoull(fnv1a_hex(key), nullptr, 16);
}

/// First n entries of a seeded partial Fisher-Yates shuffle. Hand-rolled
/// index arithmetic keeps draws identical across platforms.
std::vector<size_t> draw_without_replacement(std::vector<size_t> pool, long n,
                                             std::mt19937_64& rng) {
    for (long i = 0; i < n; ++i) {
        const size_t j = static_cast<size_t>(i) +
                         static_cast<size_t>(rng() % (pool.size() - static_cast<size_t>(i)));
        std::swap(pool[static_cast<size_t>(i)], pool[j]);
    }
    pool.resize(static_cast<size_t>(n));
    return pool;
}

} // namespace

std::vector<QARecord> parse_dataset(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("dataset is not valid JSON: ") + e.what());
    }
    if (!doc.is_array()) {
        throw ValidationError("dataset must be a JSON array of records");
    }
    std::vector<QARecord> out;
    std::set<std::string> ids;
    for (size_t i = 0; i < doc.size(); ++i) {
        const auto& raw = doc[i];
        if (!raw.is_object()) {
            throw ValidationError("record #" + std::to_string(i) +
                                  ": not an object");
        }
        QARecord rec;
        rec.id = require_string(raw, "id", i);
        if (rec.id.empty() || rec.id.find('/') != std::string::npos) {
            throw ValidationError("record #" + std::to_string(i) +
                                  ": id must be non-empty and slash-free");
        }
        if (!ids.insert(rec.id).second) {
            throw ValidationError("record #" + std::to_string(i) +
                                  ": duplicate id \"" + rec.id + "\"");
        }
        rec.video_path = require_string(raw, "video_path", i);
        rec.question = require_string(raw, "question", i);
        if (!raw.contains("options") || !raw.at("options").is_array() ||
            raw.at("options").size() != 4) {
            throw ValidationError("record #" + std::to_string(i) +
                                  ": options must be an array of exactly 4 texts");
        }
        for (const auto& o : raw.at("options")) {
            if (!o.is_string()) {
                throw ValidationError("record #" + std::to_string(i) +
                                      ": options must be strings");
            }
            rec.options.push_back(o.get<std::string>());
        }
        rec.gold = parse_gold(raw, i);
        rec.domain = require_string(raw, "domain", i);
        rec.task = require_string(raw, "task", i);
        if (!raw.contains("duration_s") || !raw.at("duration_s").is_number()) {
            throw ValidationError("record #" + std::to_string(i) +
                                  ": missing numeric field \"duration_s\"");
        }
        rec.duration_s = raw.at("duration_s").get<double>();
        if (rec.duration_s < 0) {
            throw ValidationError("record #" + std::to_string(i) +
                                  ": duration_s must be nonnegative");
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<QARecord> load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open dataset file: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_dataset(buf.str());
}

long SubsetPlan::domain_total(const std::string& domain) const {
    long total = 0;
    for (const auto& [key, n] : cells) {
        if (key.first == domain) {
            total += n;
        }
    }
    return total;
}

nlohmann::json SubsetPlan::to_json() const {
    nlohmann::json j;
    j["budget"] = budget;
    j["seed"] = seed;
    auto arr = nlohmann::json::array();
    for (const auto& [key, n] : cells) {
        arr.push_back({{"domain", key.first}, {"task", key.second}, {"n", n}});
    }
    j["cells"] = arr;
    return j;
}

std::pair<SubsetPlan, std::vector<QARecord>> stratified_subset(
    const std::vector<QARecord>& records, long budget, std::uint64_t seed) {
    if (budget < 0 || static_cast<size_t>(budget) > records.size()) {
        throw ValidationError("subset budget " + std::to_string(budget) +
                              " exceeds population " +
                              std::to_string(records.size()));
    }

    // Lexicographically ordered strata: domain -> task -> record indices.
    std::map<std::string, std::map<std::string, std::vector<size_t>>> strata;
    for (size_t i = 0; i < records.size(); ++i) {
        strata[records[i].domain][records[i].task].push_back(i);
    }

    SubsetPlan plan;
    plan.budget = budget;
    plan.seed = seed;

    std::vector<std::string> domains;
    std::vector<long> domain_counts;
    for (const auto& [domain, tasks] : strata) {
        long count = 0;
        for (const auto& [task, members] : tasks) {
            count += static_cast<long>(members.size());
        }
        domains.push_back(domain);
        domain_counts.push_back(count);
    }

    const std::vector<long> domain_alloc = largest_remainder(domain_counts, budget);

    std::vector<size_t> selected;
    for (size_t di = 0; di < domains.size(); ++di) {
        const auto& tasks = strata[domains[di]];
        std::vector<std::string> task_names;
        std::vector<long> task_counts;
        for (const auto& [task, members] : tasks) {
            task_names.push_back(task);
            task_counts.push_back(static_cast<long>(members.size()));
        }
        const std::vector<long> task_alloc =
            largest_remainder(task_counts, domain_alloc[di]);
        for (size_t ti = 0; ti < task_names.size(); ++ti) {
            plan.cells[{domains[di], task_names[ti]}] = task_alloc[ti];
            if (task_alloc[ti] < 1) {
                continue;
            }
            std::mt19937_64 rng(cell_seed(seed, domains[di], task_names[ti]));
            const auto picks = draw_without_replacement(
                tasks.at(task_names[ti]), task_alloc[ti], rng);
            selected.insert(selected.end(), picks.begin(), picks.end());
        }
    }

    std::sort(selected.begin(), selected.end());
    std::vector<QARecord> subset;
    subset.reserve(selected.size());
    for (size_t idx : selected) {
        subset.push_back(records[idx]);
    }

    subset = rebalance_subset(plan, records, std::move(subset));
    return {std::move(plan), std::move(subset)};
}

std::vector<QARecord> rebalance_subset(const SubsetPlan& plan,
                                       const std::vector<QARecord>& all,
                                       std::vector<QARecord> subset,
                                       int max_moves) {
    using CellKey = std::pair<std::string, std::string>;
    std::map<CellKey, long> achieved;
    std::set<std::string> chosen_ids;
    for (const auto& rec : subset) {
        achieved[{rec.domain, rec.task}] += 1;
        chosen_ids.insert(rec.id);
    }

    std::map<CellKey, long> deficit; // plan minus achieved, nonzero cells only
    for (const auto& [key, n] : plan.cells) {
        const long d = n - achieved[key];
        if (d != 0) {
            deficit[key] = d;
        }
    }
    for (const auto& [key, n] : achieved) {
        if (!plan.cells.count(key) && n > 0) {
            deficit[key] = -n;
        }
    }
    if (deficit.empty()) {
        return subset;
    }

    long moves = 0;
    for (const auto& [key, d] : deficit) {
        moves += std::max<long>(d, 0);
    }
    if (moves > max_moves) {
        throw Error("subset rebalance needs " + std::to_string(moves) +
                    " moves; limit is " + std::to_string(max_moves));
    }

    // Drop surplus members (last occurrences first), then fill deficits with
    // the earliest unselected records of each short cell.
    for (auto& [key, d] : deficit) {
        while (d < 0) {
            for (auto it = subset.rbegin(); it != subset.rend(); ++it) {
                if (it->domain == key.first && it->task == key.second) {
                    chosen_ids.erase(it->id);
                    subset.erase(std::next(it).base());
                    break;
                }
            }
            ++d;
        }
    }
    for (auto& [key, d] : deficit) {
        while (d > 0) {
            bool found = false;
            for (const auto& rec : all) {
                if (rec.domain == key.first && rec.task == key.second &&
                    !chosen_ids.count(rec.id)) {
                    chosen_ids.insert(rec.id);
                    found = true;
                    break;
                }
            }
            if (!found) {
                throw Error("cannot rebalance: no candidates left for cell (" +
                            key.first + ", " + key.second + ")");
            }
            --d;
        }
    }

    std::vector<QARecord> rebuilt;
    rebuilt.reserve(chosen_ids.size());
    for (const auto& rec : all) {
        if (chosen_ids.count(rec.id)) {
            rebuilt.push_back(rec);
        }
    }
    return rebuilt;
}

std::string duration_class(double duration_s) {
    if (duration_s <= 120.0) {
        return "short";
    }
    if (duration_s <= 900.0) {
        return "medium";
    }
    return "long";
}

// ---------------------------------------------------------------------------
// Traces

nlohmann::json trace_header(const controller::AgentConfig& cfg,
                            const media::VideoHandle& video,
                            const std::string& question,
                            const std::vector<std::string>& options) {
    nlohmann::json h;
    h["type"] = "header";
    h["engine_version"] = kEngineVersion;
    h["config"] = cfg.to_json();
    h["video"] = {{"path", video.path},
                  {"total_frames", video.total_frames},
                  {"fps", video.fps},
                  {"duration_s", video.duration_s},
                  {"has_audio", video.has_audio}};
    h["question"] = question;
    h["options"] = options;
    nlohmann::json digests;
    for (const char* asset :
         {assets::kAgentSystemPrompt, assets::kAgentUserPrompt,
          assets::kSceneCaptionPrompt, assets::kClipAnalyzerPrompt,
          assets::kForcedAnswerSuffix, assets::kToolSchemas}) {
        digests[asset] = assets::asset_digest(asset);
    }
    h["asset_digests"] = digests;
    h["trace_id"] = controller::trace_id_for(video.path, question, options);
    return h;
}

std::string render_trace(const Trace& trace) {
    std::string out = trace.header.dump() + "\n";
    for (const auto& e : trace.events) {
        out += e.dump() + "\n";
    }
    return out;
}

void write_trace(const std::string& path, const Trace& trace) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) {
        std::filesystem::create_directories(p.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw TraceError("cannot write trace file: " + path);
    }
    out << render_trace(trace);
}

Trace parse_trace(const std::string& text) {
    Trace trace;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw TraceError("malformed trace line " + std::to_string(lineno) +
                             ": " + e.what());
        }
        if (lineno == 1) {
            if (rec.value("type", "") != "header") {
                throw TraceError("trace does not start with a header record");
            }
            trace.header = std::move(rec);
        } else {
            trace.events.push_back(std::move(rec));
        }
    }
    if (trace.header.is_null()) {
        throw TraceError("empty trace");
    }
    return trace;
}

Trace read_trace(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw TraceError("cannot open trace file: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_trace(buf.str());
}

RunOutcome run_record(const QARecord& rec, const BackendSet& backends,
                      const controller::AgentConfig& cfg) {
    auto& decoder = media::decoder_for(rec.video_path);
    const media::VideoHandle video = media::probe_video(decoder, rec.video_path);

    controller::RunContext ctx;
    ctx.decoder = &decoder;
    ctx.chat = backends.chat;
    ctx.understanding = backends.understanding;
    ctx.transcription = backends.transcription;
    ctx.cfg = cfg;

    RunOutcome out;
    out.result = controller::run(video, rec.question, rec.options, ctx, out.ledger);
    out.trace.header = trace_header(cfg, video, rec.question, rec.options);
    out.trace.events = out.result.events;
    return out;
}

ReplayResult replay(const Trace& trace, bool strict) {
    const std::string version = trace.header.value("engine_version", "");
    if (version != kEngineVersion) {
        throw TraceError("engine version mismatch: trace \"" + version +
                         "\", engine \"" + kEngineVersion + "\"");
    }
    if (trace.events.empty()) {
        throw TraceError("trace truncation: no event records");
    }
    const std::string last_type = trace.events.back().value("type", "");
    if (last_type != "final" && last_type != "abort") {
        throw TraceError("trace truncation: missing final record");
    }

    std::string script;
    for (const auto& e : trace.events) {
        if (e.value("type", "") != "call") {
            continue;
        }
        nlohmann::json entry = e;
        entry.erase("type");
        script += entry.dump() + "\n";
    }
    backend::ScriptedBackend scripted =
        backend::ScriptedBackend::from_jsonl(script, strict);

    const controller::AgentConfig cfg =
        controller::AgentConfig::from_json(trace.header.at("config"));
    const std::string question = trace.header.at("question").get<std::string>();
    const std::vector<std::string> options =
        trace.header.at("options").get<std::vector<std::string>>();
    const std::string video_path =
        trace.header.at("video").at("path").get<std::string>();

    auto& decoder = media::decoder_for(video_path);
    const media::VideoHandle video = media::probe_video(decoder, video_path);

    controller::RunContext ctx;
    ctx.decoder = &decoder;
    ctx.chat = &scripted;
    ctx.understanding = &scripted;
    ctx.transcription = &scripted;
    ctx.cfg = cfg;

    ReplayResult out;
    cost::TokenLedger ledger;
    out.result = controller::run(video, question, options, ctx, ledger);
    out.trace.header = trace_header(cfg, video, question, options);
    out.trace.events = out.result.events;
    out.rendered = render_trace(out.trace);
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

EvalItem evaluate_one(const QARecord& rec, const BackendProvider& provider,
                      const EvalConfig& cfg) {
    EvalItem item;
    item.id = rec.id;
    item.gold = rec.gold;
    item.domain = rec.domain;
    item.duration_bucket = duration_class(rec.duration_s);

    try {
        media::probe_video(media::decoder_for(rec.video_path), rec.video_path);
    } catch (const MediaError& e) {
        if (cfg.skip_missing_videos) {
            item.skipped = true;
            item.abort_reason = e.what();
            return item;
        }
        item.aborted = true;
        item.abort_reason = e.what();
        return item;
    }

    try {
        const BackendSet backends = provider(rec);
        RunOutcome outcome = run_record(rec, backends, cfg.agent);
        item.total_tokens = cost::tally(outcome.ledger).grand_total;
        if (!cfg.trace_dir.empty()) {
            write_trace(cfg.trace_dir + "/" + rec.id + ".jsonl", outcome.trace);
        }
        if (outcome.result.answer.has_value()) {
            item.letter = outcome.result.answer->letter;
            item.forced = outcome.result.answer->forced;
            item.steps_used = outcome.result.answer->steps_used;
            item.correct = item.letter == rec.gold;
        } else {
            item.aborted = true;
            item.abort_reason = outcome.result.abort_reason;
        }
    } catch (const Error& e) {
        item.aborted = true;
        item.abort_reason = e.what();
    }
    return item;
}

} // namespace

nlohmann::json EvalReport::to_json() const {
    nlohmann::json j;
    j["scored"] = scored;
    j["correct"] = correct;
    j["skipped"] = skipped;
    j["accuracy_pct"] = accuracy_pct;
    j["accuracy_by_domain"] = accuracy_by_domain;
    j["accuracy_by_duration"] = accuracy_by_duration;
    auto arr = nlohmann::json::array();
    for (const auto& item : items) {
        nlohmann::json ji;
        ji["id"] = item.id;
        ji["gold"] = std::string(1, item.gold);
        ji["letter"] = item.letter ? std::string(1, item.letter) : "";
        ji["correct"] = item.correct;
        ji["aborted"] = item.aborted;
        ji["skipped"] = item.skipped;
        ji["forced"] = item.forced;
        ji["steps_used"] = item.steps_used;
        ji["total_tokens"] = item.total_tokens;
        if (!item.abort_reason.empty()) {
            ji["abort_reason"] = item.abort_reason;
        }
        ji["domain"] = item.domain;
        ji["duration_bucket"] = item.duration_bucket;
        arr.push_back(std::move(ji));
    }
    j["items"] = arr;
    return j;
}

EvalReport evaluate(const std::vector<QARecord>& records,
                    const BackendProvider& provider, const EvalConfig& cfg) {
    if (records.empty()) {
        throw ValidationError("empty record list");
    }

    EvalReport report;
    report.items.resize(records.size());

    const int nthreads =
        std::max(1, std::min<int>(cfg.parallelism,
                                  static_cast<int>(records.size())));
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (size_t i = next.fetch_add(1); i < records.size();
             i = next.fetch_add(1)) {
            report.items[i] = evaluate_one(records[i], provider, cfg);
        }
    };
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(nthreads));
        for (int i = 0; i < nthreads; ++i) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
    }

    std::map<std::string, std::pair<long, long>> by_domain;   // correct, scored
    std::map<std::string, std::pair<long, long>> by_duration; // correct, scored
    for (const auto& item : report.items) {
        if (item.skipped) {
            report.skipped += 1;
            continue;
        }
        report.scored += 1;
        by_domain[item.domain].second += 1;
        by_duration[item.duration_bucket].second += 1;
        if (item.correct) {
            report.correct += 1;
            by_domain[item.domain].first += 1;
            by_duration[item.duration_bucket].first += 1;
        }
    }
    if (report.scored > 0) {
        report.accuracy_pct =
            100.0 * static_cast<double>(report.correct) /
            static_cast<double>(report.scored);
    }
    for (const auto& [domain, counts] : by_domain) {
        report.accuracy_by_domain[domain] =
            100.0 * static_cast<double>(counts.first) /
            static_cast<double>(counts.second);
    }
    for (const auto& [bucket, counts] : by_duration) {
        report.accuracy_by_duration[bucket] =
            100.0 * static_cast<double>(counts.first) /
            static_cast<double>(counts.second);
    }
    return report;
}

} // namespace vidqa::harness
