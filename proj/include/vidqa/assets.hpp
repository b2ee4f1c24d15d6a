// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>

namespace vidqa::assets {

// Versioned prompt/schema asset filenames.
inline constexpr const char* kAgentSystemPrompt = "agent_system_prompt.txt";
inline constexpr const char* kAgentUserPrompt = "agent_user_prompt.txt";
inline constexpr const char* kSceneCaptionPrompt = "scene_caption_prompt.txt";
inline constexpr const char* kClipAnalyzerPrompt = "clip_analyzer_prompt.txt";
inline constexpr const char* kForcedAnswerSuffix = "forced_answer_suffix.txt";
inline constexpr const char* kToolSchemas = "tool_schemas.json";

/// Asset directory: $VIDQA_ASSET_DIR if set, otherwise the build-time
/// default (the repo's assets/ directory).
std::string asset_dir();

std::string load_asset(const std::string& name);

/// FNV-1a digest of the asset file contents (hex).
std::string asset_digest(const std::string& name);

/// Substitute {placeholder} markers in a single pass over the template.
/// Keys are the literal text between braces, e.g. "duration:.1f" or
/// "len(frame_paths)"; substituted values are never re-scanned. Unknown
/// placeholders raise.
std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& vars);

std::string format_fixed(double value, int decimals);

} // namespace vidqa::assets
