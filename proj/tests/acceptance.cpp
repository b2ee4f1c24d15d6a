// SPDX-License-Identifier: Apache-2.0
// Acceptance gate: ten release criteria, one pass/fail line each. All
// tolerances are pinned here as exact integers/strings plus a wall-clock
// limit per criterion.
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "support.hpp"
#include "vidqa/assets.hpp"
#include "vidqa/controller.hpp"
#include "vidqa/costmodel.hpp"
#include "vidqa/harness.hpp"
#include "vidqa/media.hpp"
#include "vidqa/memory.hpp"
#include "vidqa/tools.hpp"

using namespace vidqa;
using testsupport::to_jsonl;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

Outcome ok() { return {true, ""}; }

Outcome fail(std::string detail) { return {false, std::move(detail)}; }

const std::string kVideo240 =
    "synthetic:frames=240,fps=24,width=64,height=48";

// ---------------------------------------------------------------------------
// Shared scripted-run generator for the loop and memory criteria. Runs mix
// valid tools, invalid tools (schema, range, and JSON failures), optional
// early answers, and never-answering transcripts that exhaust the budget.

struct GeneratedRun {
    std::string jsonl;
    int answer_step = 0; // 0 means the run never answers and must be forced
    char expected = 0;
};

GeneratedRun generate_run(std::uint64_t seed, bool never_answers) {
    std::mt19937_64 rng(seed);
    const std::vector<std::pair<std::string, char>> answers = {
        {"A", 'A'},
        {"b", 'B'},
        {"(C)", 'C'},
        {"Answer: D.", 'D'},
        {"I think it is a.", 'A'},
        {"The answer is B, clearly.", 'B'},
        {"d", 'D'}};

    GeneratedRun out;
    out.answer_step = never_answers ? 0 : 1 + static_cast<int>(rng() % 10);

    std::vector<nlohmann::json> entries;
    for (int t = 1; t <= 10; ++t) {
        if (t == out.answer_step) {
            const auto& [text, letter] = answers[rng() % answers.size()];
            entries.push_back(testsupport::script_text(t, "controller", text));
            out.expected = letter;
            break;
        }
        if (rng() % 10 < 6) {
            // Valid tool call plus its scripted tool-internal response.
            const long s = static_cast<long>(rng() % 200);
            const long e = s + static_cast<long>(rng() % (240 - s));
            switch (rng() % 3) {
            case 0:
                entries.push_back(testsupport::script_tool_call(
                    t, "scene_snapper",
                    testsupport::scene_args(s, e, (rng() % 2) ? 30 : 60)));
                entries.push_back(testsupport::script_text(
                    t, "understanding",
                    "scene " + std::to_string(t) + ": a busy street"));
                break;
            case 1: {
                entries.push_back(testsupport::script_tool_call(
                    t, "audio_transcripter", testsupport::audio_args(s, e)));
                const double fs = static_cast<double>(rng() % 80) / 10.0;
                entries.push_back(testsupport::script_segments(
                    t, nlohmann::json::array({{{"start_s", fs},
                                               {"end_s", fs + 1.5},
                                               {"text", "crowd noise"}}})));
                break;
            }
            default:
                entries.push_back(testsupport::script_tool_call(
                    t, "clip_analyzer",
                    testsupport::clip_args(s, e, "what changes here?")));
                entries.push_back(testsupport::script_text(
                    t, "understanding",
                    "Answer: nothing decisive\nConfidence: 0.4"));
                break;
            }
        } else {
            // Invalid call: rejected before or during dispatch, run continues.
            switch (rng() % 5) {
            case 0:
                entries.push_back(testsupport::script_tool_call(
                    t, "scene_snapper", testsupport::scene_args(0, 100, 45)));
                break;
            case 1:
                entries.push_back(testsupport::script_tool_call(
                    t, "scene_snapper",
                    {{"frame_ranges",
                      nlohmann::json::array(
                          {{{"start_frame", 0}, {"end_frame", 50}}})}}));
                break;
            case 2:
                entries.push_back(testsupport::script_tool_call(
                    t, "scene_snapper", testsupport::scene_args(500, 900)));
                break;
            case 3:
                entries.push_back(testsupport::script_tool_call(
                    t, "frame_grabber", {{"reason", "grab frames"}}));
                break;
            default:
                entries.push_back(testsupport::script_tool_call(
                    t, "scene_snapper", nlohmann::json("{oops")));
                break;
            }
        }
    }

    const auto& [text, letter] = answers[rng() % answers.size()];
    entries.push_back(testsupport::script_text(11, "controller", text));
    if (out.answer_step == 0) {
        out.expected = letter;
    }
    out.jsonl = to_jsonl(entries);
    return out;
}

// ---------------------------------------------------------------------------

Outcome criterion_cost_worked_example() {
    const auto dvd = cost::estimate_dvd(1800.0, 2.0, 1105);
    const auto arm = cost::estimate_arm(10, 8000);
    const auto cmp = cost::compare(dvd, arm);
    if (dvd.total_tokens != 3978000) {
        return fail("dense estimate " + std::to_string(dvd.total_tokens) +
                    " != 3978000");
    }
    if (arm.total_tokens != 80000) {
        return fail("agent estimate " + std::to_string(arm.total_tokens) +
                    " != 80000");
    }
    if (cmp.ratio_text != "1/50") {
        return fail("ratio rendered \"" + cmp.ratio_text + "\" != \"1/50\"");
    }
    return ok();
}

Outcome criterion_tokens_per_frame() {
    const auto tokens = cost::tokens_per_frame(6, 170, 85);
    if (tokens != 1105) {
        return fail("tokens_per_frame(6,170,85) = " + std::to_string(tokens) +
                    " != 1105");
    }
    return ok();
}

Outcome criterion_measured_ratio() {
    cost::CostEstimate dense;
    dense.total_tokens = 64210000;
    cost::CostEstimate agent;
    agent.total_tokens = 1890000;
    const auto cmp = cost::compare(dense, agent);
    if (cmp.ratio_text != "1/34") {
        return fail("ratio rendered \"" + cmp.ratio_text + "\" != \"1/34\"");
    }
    return ok();
}

Outcome criterion_loop_termination() {
    for (int i = 0; i < 200; ++i) {
        const GeneratedRun gen = generate_run(4000 + i, i % 5 == 0);
        const auto run = testsupport::run_scripted(kVideo240, gen.jsonl);
        const std::string tag = "run " + std::to_string(i);

        if (!run.result.answer.has_value()) {
            return fail(tag + " aborted: " + run.result.abort_reason);
        }
        const auto& ans = *run.result.answer;
        if (ans.letter < 'A' || ans.letter > 'D') {
            return fail(tag + " produced letter '" +
                        std::string(1, ans.letter) + "'");
        }
        if (ans.letter != gen.expected) {
            return fail(tag + " answered " + std::string(1, ans.letter) +
                        ", scripted " + std::string(1, gen.expected));
        }

        int loop_calls = 0;
        int forced_calls = 0;
        for (const auto& ev : run.result.events) {
            if (ev.value("type", "") != "call" ||
                ev.value("role", "") != "controller") {
                continue;
            }
            (ev.value("step", 0) <= 10 ? loop_calls : forced_calls) += 1;
        }
        if (loop_calls > 10) {
            return fail(tag + " made " + std::to_string(loop_calls) +
                        " loop calls");
        }
        if (forced_calls > 1) {
            return fail(tag + " made " + std::to_string(forced_calls) +
                        " forced calls");
        }
        if (gen.answer_step == 0) {
            if (!ans.forced || ans.steps_used != 10 || forced_calls != 1) {
                return fail(tag + " should have been forced after 10 steps");
            }
        } else {
            if (ans.forced || ans.steps_used != gen.answer_step ||
                forced_calls != 0) {
                return fail(tag + " expected a free answer at step " +
                            std::to_string(gen.answer_step));
            }
        }
    }
    return ok();
}

Outcome criterion_memory_invariants() {
    for (int i = 0; i < 200; ++i) {
        const GeneratedRun gen = generate_run(9000 + i, i % 4 == 0);
        const std::string tag = "run " + std::to_string(i);

        struct LongTermView {
            std::vector<media::FrameRange> intervals;
            int set_at = 0;
            size_t mosaics = 0;
            bool operator==(const LongTermView&) const = default;
        };
        LongTermView prev{{{0, 239}}, 0, 5}; // initial memory over the video
        std::string violation;

        controller::RunHooks hooks;
        hooks.on_step = [&](const controller::LoopState& s) {
            if (!violation.empty()) {
                return;
            }
            if (!s.mem.short_term.empty()) {
                violation = "short-term pool not empty after step " +
                            std::to_string(s.t - 1);
                return;
            }
            const auto& lt = s.mem.long_term;
            const LongTermView cur{lt.intervals, lt.set_at_iteration,
                                   lt.mosaics.size()};
            const auto& acted = s.mem.working.back();
            const bool scene_ok = acted.chosen_action == "scene_snapper" &&
                                  acted.error.empty();
            if (cur != prev && !scene_ok) {
                violation = "long-term changed by " + acted.chosen_action;
            }
            if (cur == prev && scene_ok) {
                violation = "scene_snapper left long-term untouched";
            }
            prev = cur;
        };

        const auto run = testsupport::run_scripted(
            kVideo240, gen.jsonl, "What happens?",
            {"one", "two", "three", "four"}, {}, hooks);
        if (!violation.empty()) {
            return fail(tag + ": " + violation);
        }
        if (!run.result.answer.has_value()) {
            return fail(tag + " aborted: " + run.result.abort_reason);
        }
        if (!run.result.mem.short_term.empty()) {
            return fail(tag + ": short-term pool not empty at the end");
        }

        size_t think_steps = 0;
        size_t successful = 0;
        for (const auto& ev : run.result.events) {
            if (ev.value("type", "") != "step") {
                continue;
            }
            think_steps += 1;
            if (ev.value("action", "") == "tool_call" && !ev.contains("error")) {
                successful += 1;
            }
        }
        if (run.result.mem.working.size() != think_steps) {
            return fail(tag + ": |working| " +
                        std::to_string(run.result.mem.working.size()) +
                        " != think steps " + std::to_string(think_steps));
        }
        if (run.result.mem.results.size() != successful) {
            return fail(tag + ": |results| " +
                        std::to_string(run.result.mem.results.size()) +
                        " != successful dispatches " +
                        std::to_string(successful));
        }
    }
    return ok();
}

Outcome criterion_mosaic_sampling_oracles() {
    // Grid count for every frame count up to 300.
    for (int n = 1; n <= 300; ++n) {
        std::vector<media::FrameImage> frames;
        frames.reserve(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            media::FrameImage f;
            f.global_index = i;
            f.pixels = std::make_shared<Image>(9, 6, Rgb{10, 20, 30});
            f.short_edge_px = 6;
            frames.push_back(std::move(f));
        }
        const auto grids = media::compose_mosaics(frames);
        const size_t want = static_cast<size_t>((n + 5) / 6);
        if (grids.size() != want) {
            return fail("n=" + std::to_string(n) + " built " +
                        std::to_string(grids.size()) + " grids, want " +
                        std::to_string(want));
        }
    }

    // Proportional allocation against the brute-force largest-remainder
    // oracle on 1,000 random range sets.
    std::mt19937_64 rng(606060);
    for (int iter = 0; iter < 1000; ++iter) {
        const size_t count = 1 + rng() % 6;
        std::vector<media::FrameRange> ranges;
        for (size_t i = 0; i < count; ++i) {
            const long s = static_cast<long>(rng() % 5000);
            ranges.push_back({s, s + static_cast<long>(rng() % 400)});
        }
        const long n = 1 + static_cast<long>(rng() % 300);
        const auto got = media::allocate_across_ranges(ranges, n);
        const auto want = testsupport::allocation_oracle(ranges, n);
        if (got != want) {
            return fail("allocation mismatch on iteration " +
                        std::to_string(iter));
        }
    }

    // Uniform sampling against the closed-form round-half-up oracle.
    const auto frozen = media::uniform_sample_indices({0, 59}, 6);
    if (frozen != std::vector<long>{0, 12, 24, 35, 47, 59}) {
        return fail("frozen sampling case diverged");
    }
    for (int iter = 0; iter < 2000; ++iter) {
        const long s = static_cast<long>(rng() % 10000);
        const media::FrameRange range{s, s + static_cast<long>(rng() % 2000)};
        const long k = 1 + static_cast<long>(rng() % 160);
        const auto got = media::uniform_sample_indices(range, k);
        const auto want = testsupport::sampling_oracle(range, k);
        if (got != want) {
            return fail("sampling mismatch on iteration " +
                        std::to_string(iter));
        }
    }
    return ok();
}

Outcome criterion_schema_fidelity() {
    const auto schemas = tools::ToolSchemas::load();
    if (schemas.serialize() != assets::load_asset(assets::kToolSchemas)) {
        return fail("serialized schemas differ from the golden asset");
    }

    const std::string bad_enum =
        testsupport::scene_args(0, 100, 45).dump();
    try {
        tools::validate_call("scene_snapper", bad_enum, schemas);
        return fail("num_frames=45 was accepted");
    } catch (const ValidationError&) {
    }

    nlohmann::json no_reason = testsupport::scene_args(0, 100, 30);
    no_reason.erase("reason");
    try {
        tools::validate_call("scene_snapper", no_reason.dump(), schemas);
        return fail("missing \"reason\" was accepted");
    } catch (const ValidationError&) {
    }
    return ok();
}

Outcome criterion_stratified_sampler() {
    std::mt19937_64 rng(880088);
    const std::vector<std::string> domain_names = {"sports", "news",  "vlog",
                                                   "film",   "howto", "lecture"};
    const std::vector<std::string> task_names = {"counting", "ordering",
                                                 "speaker", "causal"};
    for (int iter = 0; iter < 500; ++iter) {
        std::vector<harness::QARecord> population;
        const size_t domains = 2 + rng() % 5;
        for (size_t d = 0; d < domains; ++d) {
            const size_t tasks = 1 + rng() % 4;
            for (size_t t = 0; t < tasks; ++t) {
                const size_t members = 1 + rng() % 30;
                for (size_t m = 0; m < members; ++m) {
                    harness::QARecord rec;
                    rec.id = domain_names[d] + "-" + task_names[t] + "-" +
                             std::to_string(m);
                    rec.video_path = kVideo240;
                    rec.question = "q";
                    rec.options = {"a", "b", "c", "d"};
                    rec.gold = 'A';
                    rec.domain = domain_names[d];
                    rec.task = task_names[t];
                    rec.duration_s = 10.0;
                    population.push_back(std::move(rec));
                }
            }
        }
        const long W = static_cast<long>(population.size());
        const long budget = 1 + static_cast<long>(rng() % W);
        const std::uint64_t seed = rng();
        const std::string tag = "corpus " + std::to_string(iter);

        auto [plan, subset] = harness::stratified_subset(population, budget, seed);
        if (static_cast<long>(subset.size()) != budget) {
            return fail(tag + ": subset size " +
                        std::to_string(subset.size()) + " != budget " +
                        std::to_string(budget));
        }

        std::map<std::string, long> pop_by_domain;
        std::map<std::string, long> got_by_domain;
        for (const auto& rec : population) {
            pop_by_domain[rec.domain] += 1;
        }
        for (const auto& rec : subset) {
            got_by_domain[rec.domain] += 1;
        }
        for (const auto& [domain, w] : pop_by_domain) {
            const double target = static_cast<double>(budget) *
                                  static_cast<double>(w) /
                                  static_cast<double>(W);
            const long got = got_by_domain.count(domain)
                                 ? got_by_domain.at(domain)
                                 : 0;
            if (std::abs(static_cast<double>(got) - target) > 1.0) {
                return fail(tag + ": domain " + domain + " drew " +
                            std::to_string(got) + ", target " +
                            std::to_string(target));
            }
        }

        auto [plan2, subset2] = harness::stratified_subset(population, budget, seed);
        std::set<std::string> first_ids, second_ids;
        for (const auto& r : subset) {
            first_ids.insert(r.id);
        }
        for (const auto& r : subset2) {
            second_ids.insert(r.id);
        }
        if (first_ids != second_ids || plan.to_json() != plan2.to_json()) {
            return fail(tag + ": same seed produced a different subset");
        }
    }
    return ok();
}

Outcome criterion_replay_determinism() {
    const GeneratedRun gen = generate_run(123457, false);
    harness::QARecord rec;
    rec.id = "acceptance-replay";
    rec.video_path = kVideo240;
    rec.question = "What happens?";
    rec.options = {"one", "two", "three", "four"};
    rec.gold = 'A';
    rec.domain = "synthetic";
    rec.task = "probe";
    rec.duration_s = 10.0;

    auto scripted = backend::ScriptedBackend::from_jsonl(gen.jsonl);
    harness::BackendSet set;
    set.chat = &scripted;
    set.understanding = &scripted;
    set.transcription = &scripted;

    const harness::RunOutcome outcome =
        harness::run_record(rec, set, controller::AgentConfig{});
    if (!outcome.result.answer.has_value()) {
        return fail("source run aborted: " + outcome.result.abort_reason);
    }
    const char letter = outcome.result.answer->letter;
    const std::string original = harness::render_trace(outcome.trace);

    const harness::ReplayResult first = harness::replay(outcome.trace, true);
    if (first.rendered != original) {
        return fail("first replay diverged from the recorded trace");
    }
    if (!first.result.answer.has_value() ||
        first.result.answer->letter != letter) {
        return fail("first replay changed the final letter");
    }

    const harness::ReplayResult second =
        harness::replay(harness::parse_trace(first.rendered), true);
    if (second.rendered != original) {
        return fail("second replay diverged from the recorded trace");
    }
    if (!second.result.answer.has_value() ||
        second.result.answer->letter != letter) {
        return fail("second replay changed the final letter");
    }
    return ok();
}

Outcome criterion_ledger_consistency() {
    std::vector<nlohmann::json> entries;
    for (int t = 1; t <= 10; ++t) {
        entries.push_back(testsupport::script_tool_call(
            t, "scene_snapper", testsupport::scene_args(0, 119, 30), 3000,
            100));
        entries.push_back(testsupport::script_text(
            t, "understanding", "scene " + std::to_string(t), 4000, 200));
    }
    entries.push_back(testsupport::script_text(11, "controller", "C", 6300,
                                               100));

    std::int64_t scripted_total = 0;
    for (const auto& e : entries) {
        scripted_total += e.at("usage").at("prompt_tokens").get<std::int64_t>() +
                          e.at("usage").at("completion_tokens").get<std::int64_t>();
    }

    const auto run = testsupport::run_scripted(kVideo240, to_jsonl(entries));
    if (!run.result.answer.has_value()) {
        return fail("fixture run aborted: " + run.result.abort_reason);
    }
    if (!run.result.answer->forced || run.result.answer->steps_used != 10) {
        return fail("fixture run was not forced after 10 steps");
    }

    const auto totals = cost::tally(run.ledger);
    if (totals.grand_total != scripted_total) {
        return fail("tally " + std::to_string(totals.grand_total) +
                    " != scripted usage sum " +
                    std::to_string(scripted_total));
    }
    const auto bound = cost::estimate_arm(10, 8000);
    if (totals.grand_total > bound.total_tokens) {
        return fail("tally " + std::to_string(totals.grand_total) +
                    " exceeds the per-run bound " +
                    std::to_string(bound.total_tokens));
    }
    return ok();
}

struct Criterion {
    int number;
    const char* label;
    double limit_s;
    Outcome (*fn)();
};

} // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "cost model worked example", 1.0, criterion_cost_worked_example},
        {2, "per-frame tokenization", 1.0, criterion_tokens_per_frame},
        {3, "measured ratio rendering", 1.0, criterion_measured_ratio},
        {4, "loop termination and forced answer", 30.0,
         criterion_loop_termination},
        {5, "memory invariants", 30.0, criterion_memory_invariants},
        {6, "mosaic and sampling oracles", 10.0,
         criterion_mosaic_sampling_oracles},
        {7, "schema fidelity", 1.0, criterion_schema_fidelity},
        {8, "stratified sampler", 30.0, criterion_stratified_sampler},
        {9, "replay determinism", 10.0, criterion_replay_determinism},
        {10, "ledger consistency", 5.0, criterion_ledger_consistency},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = c.fn();
        } catch (const std::exception& e) {
            outcome = fail(std::string("unexpected exception: ") + e.what());
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                          t0)
                .count();
        if (outcome.pass && elapsed > c.limit_s) {
            outcome = fail("exceeded the " + std::to_string(c.limit_s) +
                           " s budget");
        }
        if (!outcome.pass) {
            failures += 1;
        }
        std::printf("[%s] C%d: %s (%.2fs)%s%s\n",
                    outcome.pass ? "PASS" : "FAIL", c.number, c.label, elapsed,
                    outcome.detail.empty() ? "" : " - ",
                    outcome.detail.c_str());
    }
    return failures == 0 ? 0 : 1;
}
