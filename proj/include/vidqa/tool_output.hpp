// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vidqa/media.hpp"

namespace vidqa::tools {

enum class OutputKind { Caption, Transcript, Analysis };

std::string to_string(OutputKind kind);

struct TranscriptSegment {
    media::FrameRange range;
    std::string text;
};

/// Typed result of one understanding-tool call. Exactly the fields of the
/// kind are meaningful; `notes` carries controller-visible warnings such as
/// range clamps or missing audio.
struct ToolOutput {
    OutputKind kind = OutputKind::Caption;
    std::string caption;                      // Caption
    std::vector<TranscriptSegment> segments;  // Transcript
    std::string answer;                       // Analysis
    double confidence = 0.0;                  // Analysis
    std::vector<std::string> notes;

    nlohmann::json to_json() const;
};

} // namespace vidqa::tools
