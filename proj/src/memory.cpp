// SPDX-License-Identifier: Apache-2.0
#include "vidqa/memory.hpp"

#include <algorithm>

namespace vidqa::tools {

std::string to_string(OutputKind kind) {
    switch (kind) {
        case OutputKind::Caption: return "caption";
        case OutputKind::Transcript: return "transcript";
        case OutputKind::Analysis: return "analysis";
    }
    return "unknown";
}

nlohmann::json ToolOutput::to_json() const {
    nlohmann::json j;
    j["kind"] = to_string(kind);
    switch (kind) {
        case OutputKind::Caption:
            j["caption"] = caption;
            break;
        case OutputKind::Transcript: {
            auto arr = nlohmann::json::array();
            for (const auto& seg : segments)
                arr.push_back({{"start_frame", seg.range.start_frame},
                               {"end_frame", seg.range.end_frame},
                               {"text", seg.text}});
            j["segments"] = arr;
            break;
        }
        case OutputKind::Analysis:
            j["answer"] = answer;
            j["confidence"] = confidence;
            break;
    }
    if (!notes.empty()) j["notes"] = notes;
    return j;
}

} // namespace vidqa::tools

namespace vidqa::memory {

const std::vector<long>& allowed_sampling_counts() {
    static const std::vector<long> counts = {30, 60, 90, 150};
    return counts;
}

HierMemory init_memory(media::MediaDecoder& decoder, const media::VideoHandle& handle,
                       long initial_sample) {
    const auto& allowed = allowed_sampling_counts();
    if (std::find(allowed.begin(), allowed.end(), initial_sample) == allowed.end())
        throw ValidationError("not in allowed sampling set: " + std::to_string(initial_sample));

    media::FrameRange whole{0, handle.total_frames - 1};
    auto indices = media::uniform_sample_indices(whole, initial_sample);
    auto frames = media::extract_frames(decoder, handle, indices, media::kShortEdgeCoarse);
    for (auto& f : frames) f = media::overlay_index(f);

    HierMemory mem;
    mem.long_term.intervals = {whole};
    mem.long_term.mosaics = media::compose_mosaics(frames);
    mem.long_term.set_at_iteration = 0;
    return mem;
}

namespace {

bool covered(long index, const std::vector<media::FrameRange>& intervals) {
    for (const auto& r : intervals)
        if (index >= r.start_frame && index <= r.end_frame) return true;
    return false;
}

} // namespace

HierMemory set_long_term(HierMemory mem, std::vector<media::FrameRange> intervals,
                         std::vector<media::MosaicGrid> mosaics, int iteration) {
    if (intervals.empty()) throw Error("set_long_term requires at least one interval");
    for (const auto& r : intervals) media::validate_range(r);
    for (const auto& grid : mosaics)
        for (long idx : grid.member_indices)
            if (!covered(idx, intervals))
                throw Error("mosaic member " + std::to_string(idx) +
                            " lies outside the long-term interval(s)");
    mem.long_term.intervals = std::move(intervals);
    mem.long_term.mosaics = std::move(mosaics);
    mem.long_term.set_at_iteration = iteration;
    return mem;
}

HierMemory stage_short_term(HierMemory mem, std::vector<media::FrameImage> frames,
                            std::optional<media::AudioSegment> audio, int iteration) {
    if (!mem.short_term.empty()) throw Error("staging into a non-empty short-term pool");
    mem.short_term.frames = std::move(frames);
    mem.short_term.audio = std::move(audio);
    mem.short_term.staged_at_iteration = iteration;
    return mem;
}

HierMemory clear_short_term(HierMemory mem) {
    mem.short_term.frames.clear();
    mem.short_term.audio.reset();
    return mem;
}

HierMemory append_result(HierMemory mem, ResultEntry entry) {
    if (!mem.results.empty() && entry.iteration < mem.results.back().iteration)
        throw Error("iteration regression in result memory");
    mem.results.push_back(std::move(entry));
    return mem;
}

HierMemory append_trace(HierMemory mem, TraceEntry entry) {
    if (!mem.working.empty() && entry.iteration < mem.working.back().iteration)
        throw Error("iteration regression in working memory");
    mem.working.push_back(std::move(entry));
    return mem;
}

namespace {

nlohmann::json ranges_json(const std::vector<media::FrameRange>& ranges) {
    auto arr = nlohmann::json::array();
    for (const auto& r : ranges) arr.push_back({r.start_frame, r.end_frame});
    return arr;
}

} // namespace

nlohmann::json snapshot_json(const HierMemory& mem) {
    nlohmann::json j;
    nlohmann::json lt;
    lt["intervals"] = ranges_json(mem.long_term.intervals);
    auto indices = nlohmann::json::array();
    for (const auto& grid : mem.long_term.mosaics)
        for (long idx : grid.member_indices) indices.push_back(idx);
    lt["frame_indices"] = indices;
    lt["set_at_iteration"] = mem.long_term.set_at_iteration;
    j["long_term"] = lt;

    auto results = nlohmann::json::array();
    for (const auto& entry : mem.results) {
        nlohmann::json r;
        r["iteration"] = entry.iteration;
        r["intervals"] = ranges_json(entry.intervals);
        r["tool"] = entry.tool;
        r["output"] = entry.output.to_json();
        results.push_back(r);
    }
    j["results"] = results;

    auto working = nlohmann::json::array();
    for (const auto& entry : mem.working) {
        nlohmann::json w;
        w["iteration"] = entry.iteration;
        w["reasoning"] = entry.reasoning;
        w["action"] = entry.chosen_action;
        w["params"] = entry.params_digest;
        if (!entry.error.empty()) w["error"] = entry.error;
        working.push_back(w);
    }
    j["working"] = working;
    return j;
}

std::string render_snapshot(const HierMemory& mem) { return snapshot_json(mem).dump(); }

} // namespace vidqa::memory
