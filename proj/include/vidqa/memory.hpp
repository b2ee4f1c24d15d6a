// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vidqa/media.hpp"
#include "vidqa/tool_output.hpp"

namespace vidqa::memory {

/// Snapshot of the agent's current base frame interval(s): index-stamped
/// mosaics over the temporally focused segment. Replaced wholesale, never
/// merged.
struct LongTermPool {
    std::vector<media::FrameRange> intervals;
    std::vector<media::MosaicGrid> mosaics;
    int set_at_iteration = 0;
};

/// Transient workspace for fine-grained probing. Empty at the start and end
/// of every controller iteration.
struct ShortTermPool {
    std::vector<media::FrameImage> frames;
    std::optional<media::AudioSegment> audio;
    int staged_at_iteration = 0;

    bool empty() const { return frames.empty() && !audio.has_value(); }
};

/// One completed tool call: when it ran, what it looked at, what came back.
struct ResultEntry {
    int iteration = 0;
    std::vector<media::FrameRange> intervals;
    std::string tool;
    tools::ToolOutput output;
};

/// One think step: the rationale behind a chosen action. `error` is set when
/// the action was rejected or failed, which surfaces the message to the
/// model on the next observation.
struct TraceEntry {
    int iteration = 0;
    std::string reasoning;
    std::string chosen_action;
    std::string params_digest;
    std::string error;
};

/// The three-tier memory. Single-writer: one instance belongs to one run.
struct HierMemory {
    LongTermPool long_term;
    ShortTermPool short_term;
    std::vector<ResultEntry> results;
    std::vector<TraceEntry> working;
};

const std::vector<long>& allowed_sampling_counts(); // {30, 60, 90, 150}

/// Build the initial memory: the long-term pool covers the whole video with
/// `initial_sample` stamped frames mosaicked; everything else is empty.
HierMemory init_memory(media::MediaDecoder& decoder, const media::VideoHandle& handle,
                       long initial_sample);

/// Replace the long-term snapshot. Mosaic member indices must lie within the
/// new intervals.
HierMemory set_long_term(HierMemory mem, std::vector<media::FrameRange> intervals,
                         std::vector<media::MosaicGrid> mosaics, int iteration);

/// Staging requires an empty pool; clearing is an idempotent no-op.
HierMemory stage_short_term(HierMemory mem, std::vector<media::FrameImage> frames,
                            std::optional<media::AudioSegment> audio, int iteration);
HierMemory clear_short_term(HierMemory mem);

/// Append-only growth; iteration numbers may not regress.
HierMemory append_result(HierMemory mem, ResultEntry entry);
HierMemory append_trace(HierMemory mem, TraceEntry entry);

/// Canonical snapshot rendered into the controller prompt: long-term
/// interval(s) and sampled indices (no raster data), result entries, and
/// working traces. Byte-identical for equal memory states.
nlohmann::json snapshot_json(const HierMemory& mem);
std::string render_snapshot(const HierMemory& mem);

} // namespace vidqa::memory
