// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vidqa/backend.hpp"
#include "vidqa/media.hpp"
#include "vidqa/memory.hpp"
#include "vidqa/tool_output.hpp"

namespace vidqa::tools {

inline constexpr const char* kSceneSnapper = "scene_snapper";
inline constexpr const char* kAudioTranscripter = "audio_transcripter";
inline constexpr const char* kClipAnalyzer = "clip_analyzer";

struct ToolSchema {
    std::string name;
    std::string description;
    nlohmann::ordered_json parameter_schema;
};

/// The shipped function-calling schema list. `serialize` reproduces the
/// asset bytes exactly, which the golden test pins.
class ToolSchemas {
public:
    static ToolSchemas load();
    static ToolSchemas from_json_text(const std::string& text);

    std::string serialize() const;
    const ToolSchema& find(const std::string& name) const;
    const nlohmann::ordered_json& raw() const { return raw_; }
    std::vector<std::string> names() const;

private:
    nlohmann::ordered_json raw_ = nlohmann::ordered_json::array();
    std::vector<ToolSchema> parsed_;
};

/// A validated, typed tool invocation. `ranges` holds frame_ranges for the
/// range-list tools and the single frame_range for clip_analyzer.
struct ToolCall {
    std::string name;
    std::vector<media::FrameRange> ranges;
    long num_frames = 30; // scene_snapper only
    std::string question; // clip_analyzer only
    std::string reason;

    std::string params_digest() const;
};

/// Check a raw model call against the shipped schemas. Enum values,
/// defaults, and required fields are read from the schema document itself.
/// Video-length bounds are deliberately NOT checked here; see
/// clamp_call_ranges.
ToolCall validate_call(const std::string& name, const std::string& arguments_json,
                       const ToolSchemas& schemas);

/// Clamp ranges that extend past the last frame (warning note); a range
/// entirely outside the video is a ToolError so the model can self-correct.
std::pair<ToolCall, std::vector<std::string>> clamp_call_ranges(
    ToolCall call, long total_frames);

struct AnalysisParse {
    std::string answer;
    double confidence = 0.0;
    std::vector<std::string> warnings;
};

/// Extract the last "Answer:" / "Confidence:" lines, case-insensitive.
/// Missing answer raises ToolError("unparseable analysis ..."); missing or
/// malformed confidence degrades to 0.0 with a warning; out-of-range values
/// are clamped with a warning.
AnalysisParse parse_analysis(const std::string& text);

struct ToolContext {
    media::MediaDecoder* decoder = nullptr;
    media::VideoHandle video;
    backend::ChatBackend* understanding = nullptr;
    backend::TranscribeBackend* transcription = nullptr;
    cost::TokenLedger* ledger = nullptr;
    long n2 = 10;             // clip_analyzer sample count
    std::string options_text; // the run's lettered options block
};

using ToolResult = std::pair<ToolOutput, memory::HierMemory>;

ToolResult run_scene_snapper(const ToolCall& call, memory::HierMemory mem,
                             const ToolContext& ctx, int iteration);
ToolResult run_audio_transcripter(const ToolCall& call, memory::HierMemory mem,
                                  const ToolContext& ctx, int iteration);
ToolResult run_clip_analyzer(const ToolCall& call, memory::HierMemory mem,
                             const ToolContext& ctx, int iteration);

/// Route a validated call to its tool. Exactly one ResultEntry is appended
/// and the short-term pool is empty on return.
ToolResult dispatch(const ToolCall& call, memory::HierMemory mem,
                    const ToolContext& ctx, int iteration);

} // namespace vidqa::tools
