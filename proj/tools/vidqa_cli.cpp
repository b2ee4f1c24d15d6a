// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vidqa/backend.hpp"
#include "vidqa/controller.hpp"
#include "vidqa/costmodel.hpp"
#include "vidqa/errors.hpp"
#include "vidqa/harness.hpp"
#include "vidqa/media.hpp"

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw vidqa::Error("cannot open file: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

vidqa::controller::AgentConfig load_config(const std::string& path) {
    if (path.empty()) {
        return {};
    }
    return vidqa::controller::AgentConfig::from_json(
        nlohmann::json::parse(slurp(path)));
}

struct BackendChoice {
    std::string mode = "remote"; // remote | scripted
    std::string transcript;      // scripted: single file
    std::string transcript_dir;  // scripted bench: per-record <id>.jsonl
};

vidqa::harness::BackendSet make_backends(const BackendChoice& choice,
                                         const std::string& transcript_path) {
    vidqa::harness::BackendSet set;
    if (choice.mode == "scripted") {
        auto scripted = std::make_shared<vidqa::backend::ScriptedBackend>(
            vidqa::backend::ScriptedBackend::from_file(transcript_path));
        set.chat = scripted.get();
        set.understanding = scripted.get();
        set.transcription = scripted.get();
        set.owner = scripted;
    } else {
        auto remote = std::make_shared<vidqa::backend::RemoteBackend>(
            vidqa::backend::remote_config_from_env());
        set.chat = remote.get();
        set.understanding = remote.get();
        set.transcription = remote.get();
        set.owner = remote;
    }
    return set;
}

int cmd_run(const std::string& video_path, const std::string& question,
            const std::vector<std::string>& options,
            const std::string& config_path, const std::string& trace_path,
            const BackendChoice& choice) {
    const auto cfg = load_config(config_path);
    const auto backends = make_backends(choice, choice.transcript);

    vidqa::harness::QARecord rec;
    rec.id = "cli";
    rec.video_path = video_path;
    rec.question = question;
    rec.options = options;

    const auto outcome = vidqa::harness::run_record(rec, backends, cfg);
    if (!trace_path.empty()) {
        vidqa::harness::write_trace(trace_path, outcome.trace);
    }
    if (!outcome.result.answer.has_value()) {
        std::cerr << "run aborted: " << outcome.result.abort_reason << "\n";
        return 2;
    }
    std::cout << outcome.result.answer->letter << "\n";
    return 0;
}

int cmd_estimate_cost(double duration_s, double fps_sampled, long long tpf,
                      int steps, long long per_step) {
    const auto dvd = vidqa::cost::estimate_dvd(duration_s, fps_sampled, tpf);
    const auto arm = vidqa::cost::estimate_arm(steps, per_step);
    const auto cmp = vidqa::cost::compare(dvd, arm);
    nlohmann::json report;
    report["dvd"] = {{"total_tokens", dvd.total_tokens}, {"inputs", dvd.inputs}};
    report["arm"] = {{"total_tokens", arm.total_tokens},
                     {"inputs", arm.inputs},
                     {"upper_bound", arm.upper_bound}};
    report["comparison"] = cmp.to_json();
    std::cout << report.dump(2) << "\n";
    return 0;
}

int cmd_sample_subset(const std::string& dataset_path, long budget,
                      unsigned long long seed, const std::string& out_path) {
    const auto records = vidqa::harness::load_dataset(dataset_path);
    const auto [plan, subset] =
        vidqa::harness::stratified_subset(records, budget, seed);
    nlohmann::json out;
    out["plan"] = plan.to_json();
    auto ids = nlohmann::json::array();
    for (const auto& rec : subset) {
        ids.push_back(rec.id);
    }
    out["ids"] = ids;
    std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw vidqa::Error("cannot write subset file: " + out_path);
    }
    f << out.dump(2) << "\n";
    std::cout << "subset of " << subset.size() << " written to " << out_path
              << "\n";
    return 0;
}

int cmd_bench(const std::string& dataset_path, const std::string& subset_path,
              const std::string& config_path, const std::string& out_dir,
              const BackendChoice& choice, int parallelism,
              bool skip_missing) {
    auto records = vidqa::harness::load_dataset(dataset_path);
    if (!subset_path.empty()) {
        const auto subset_doc = nlohmann::json::parse(slurp(subset_path));
        std::set<std::string> keep;
        for (const auto& id : subset_doc.at("ids")) {
            keep.insert(id.get<std::string>());
        }
        std::vector<vidqa::harness::QARecord> filtered;
        for (auto& rec : records) {
            if (keep.count(rec.id)) {
                filtered.push_back(std::move(rec));
            }
        }
        records = std::move(filtered);
    }

    vidqa::harness::EvalConfig cfg;
    cfg.agent = load_config(config_path);
    cfg.parallelism = parallelism;
    cfg.skip_missing_videos = skip_missing;
    cfg.trace_dir = out_dir + "/traces";

    vidqa::harness::BackendProvider provider =
        [&](const vidqa::harness::QARecord& rec) {
            const std::string transcript =
                choice.mode == "scripted"
                    ? choice.transcript_dir + "/" + rec.id + ".jsonl"
                    : "";
            return make_backends(choice, transcript);
        };

    const auto report = vidqa::harness::evaluate(records, provider, cfg);

    std::filesystem::create_directories(out_dir);
    const std::string report_path = out_dir + "/report.json";
    std::ofstream f(report_path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw vidqa::Error("cannot write report: " + report_path);
    }
    f << report.to_json().dump(2) << "\n";
    std::printf("accuracy %.1f%% (%ld/%ld scored, %ld skipped)\n",
                report.accuracy_pct, report.correct, report.scored,
                report.skipped);
    std::cout << "report written to " << report_path << "\n";
    return 0;
}

int cmd_replay(const std::string& trace_path, bool strict) {
    const std::string original = slurp(trace_path);
    const auto trace = vidqa::harness::parse_trace(original);
    const auto replayed = vidqa::harness::replay(trace, strict);
    const bool identical = replayed.rendered == original;
    if (!replayed.result.answer.has_value()) {
        std::cerr << "replayed run aborted: " << replayed.result.abort_reason
                  << "\n";
        return 2;
    }
    std::cout << "letter=" << replayed.result.answer->letter
              << " forced=" << (replayed.result.answer->forced ? "yes" : "no")
              << " byte_identical=" << (identical ? "yes" : "no") << "\n";
    return identical ? 0 : 3;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Agentic long-video question answering engine"};
    app.require_subcommand(1);

    BackendChoice choice;

    // run
    auto* run = app.add_subcommand("run", "Answer one question about one video");
    std::string video_path, question, config_path, trace_path;
    std::vector<std::string> options;
    run->add_option("--video", video_path, "Video path or synthetic: descriptor")
        ->required();
    run->add_option("--question", question, "Question text")->required();
    run->add_option("--options", options, "The four answer options")
        ->delimiter(',')
        ->expected(4)
        ->required();
    run->add_option("--config", config_path, "Agent config JSON file");
    run->add_option("--trace", trace_path, "Trace JSONL output path");
    run->add_option("--backend", choice.mode, "remote or scripted")
        ->check(CLI::IsMember({"remote", "scripted"}));
    run->add_option("--transcript", choice.transcript,
                    "Scripted-mode transcript JSONL");

    // estimate-cost
    auto* est = app.add_subcommand("estimate-cost",
                                   "Token cost of dense sampling vs the loop");
    double duration_s = 1800.0, fps_sampled = 2.0;
    long long tpf = 1105, per_step = 8000;
    int steps = 10;
    est->add_option("--duration-s", duration_s, "Video duration in seconds");
    est->add_option("--fps-sampled", fps_sampled, "Dense sampling rate");
    est->add_option("--tokens-per-frame", tpf, "Visual tokens per frame");
    est->add_option("--steps", steps, "Loop step budget");
    est->add_option("--per-step", per_step, "Token budget per step");

    // sample-subset
    auto* sub = app.add_subcommand("sample-subset",
                                   "Stratified subset of a dataset");
    std::string dataset_path, out_path = "subset.json";
    long budget = 200;
    unsigned long long seed = 0;
    sub->add_option("--dataset", dataset_path, "Dataset JSON file")->required();
    sub->add_option("--budget", budget, "Subset size");
    sub->add_option("--seed", seed, "RNG seed");
    sub->add_option("--out", out_path, "Output subset file");

    // bench
    auto* bench = app.add_subcommand("bench", "Evaluate a dataset");
    std::string bench_dataset, subset_path, bench_config, out_dir = "bench-out";
    int parallelism = 1;
    bool skip_missing = false;
    bench->add_option("--dataset", bench_dataset, "Dataset JSON file")
        ->required();
    bench->add_option("--subset-plan", subset_path,
                      "Subset file from sample-subset");
    bench->add_option("--config", bench_config, "Agent config JSON file");
    bench->add_option("--out", out_dir, "Output directory");
    bench->add_option("--backend", choice.mode, "remote or scripted")
        ->check(CLI::IsMember({"remote", "scripted"}));
    bench->add_option("--transcript-dir", choice.transcript_dir,
                      "Scripted-mode directory of <id>.jsonl transcripts");
    bench->add_option("--parallelism", parallelism, "Concurrent runs");
    bench->add_flag("--skip-missing-videos", skip_missing,
                    "Exclude records whose video cannot be probed");

    // replay
    auto* replay = app.add_subcommand("replay", "Re-execute a recorded trace");
    std::string replay_trace;
    bool strict = false;
    replay->add_option("--trace", replay_trace, "Trace JSONL file")->required();
    replay->add_flag("--strict", strict, "Also pin request digests");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            return cmd_run(video_path, question, options, config_path,
                           trace_path, choice);
        }
        if (est->parsed()) {
            return cmd_estimate_cost(duration_s, fps_sampled, tpf, steps,
                                     per_step);
        }
        if (sub->parsed()) {
            return cmd_sample_subset(dataset_path, budget, seed, out_path);
        }
        if (bench->parsed()) {
            return cmd_bench(bench_dataset, subset_path, bench_config, out_dir,
                             choice, parallelism, skip_missing);
        }
        if (replay->parsed()) {
            return cmd_replay(replay_trace, strict);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
