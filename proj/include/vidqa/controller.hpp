// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vidqa/backend.hpp"
#include "vidqa/costmodel.hpp"
#include "vidqa/media.hpp"
#include "vidqa/memory.hpp"
#include "vidqa/tools.hpp"

namespace vidqa::controller {

struct AgentConfig {
    int step_budget = 10;
    long n2 = 10;
    long initial_sample = 30;            // must be in {30, 60, 90, 150}
    long per_step_token_budget = 8000;   // advisory, not enforced
    std::string controller_model;
    std::string understanding_model;
    std::string transcription_model;
    double temperature = 0.0;
    int max_tokens = 2048;

    nlohmann::json to_json() const;
    static AgentConfig from_json(const nlohmann::json& j);
};

struct Action {
    enum class Kind { Tool, Answer };
    Kind kind = Kind::Tool;
    tools::ToolCall tool; // Kind::Tool, post-validation
    char letter = 0;      // Kind::Answer
};

struct LoopState {
    int t = 1;
    memory::HierMemory mem;
    std::string question;
    std::vector<std::string> options;
    bool finished = false;
    char letter = 0;
};

struct FinalAnswer {
    char letter = 0;
    bool forced = false;
    int steps_used = 0;
    std::string trace_id;
};

struct RunResult {
    std::optional<FinalAnswer> answer; // empty on abort
    std::string abort_reason;          // non-empty on abort
    std::vector<nlohmann::json> events;
    memory::HierMemory mem;
};

struct RunHooks {
    /// Called after every completed loop step with the post-step state.
    std::function<void(const LoopState&)> on_step;
};

struct RunContext {
    media::MediaDecoder* decoder = nullptr;
    backend::ChatBackend* chat = nullptr;               // controller role
    backend::ChatBackend* understanding = nullptr;      // tool-internal vision
    backend::TranscribeBackend* transcription = nullptr;
    tools::ToolSchemas schemas;                         // loaded lazily if empty
    AgentConfig cfg;
    RunHooks hooks;
};

/// Decorators that append one replayable "call" record per backend
/// interaction. Records carry the same field names the scripted backend
/// consumes, so a trace can be replayed by feeding its call records back.
class RecordingChat : public backend::ChatBackend {
public:
    RecordingChat(backend::ChatBackend& inner, std::vector<nlohmann::json>& events)
        : inner_(inner), events_(events) {}
    backend::ChatResponse chat(const backend::ChatRequest& req, int step,
                               cost::TokenLedger& ledger) override;

private:
    backend::ChatBackend& inner_;
    std::vector<nlohmann::json>& events_;
};

class RecordingTranscribe : public backend::TranscribeBackend {
public:
    RecordingTranscribe(backend::TranscribeBackend& inner,
                        std::vector<nlohmann::json>& events)
        : inner_(inner), events_(events) {}

protected:
    std::vector<backend::TranscriptItem> do_transcribe(
        const media::AudioSegment& seg, int step,
        cost::TokenLedger& ledger) override;

private:
    backend::TranscribeBackend& inner_;
    std::vector<nlohmann::json>& events_;
};

struct Prompts {
    std::string system;
    std::string user;
    std::vector<backend::Attachment> attachments;
};

/// "A. ...\nB. ...\nC. ...\nD. ..." block used in prompts.
std::string options_block(const std::vector<std::string>& options);

/// Stable run identifier derived from the video path, question, and options.
std::string trace_id_for(const std::string& video_path, const std::string& question,
                         const std::vector<std::string>& options);

/// Pure function of (assets, video info, memory state, question, options):
/// equal states produce byte-equal prompts.
Prompts build_prompts(const LoopState& state, const media::VideoHandle& video);

/// First standalone A-D letter in the text, case-insensitive. Tokens are
/// maximal alphanumeric runs, so "(b)", "B.", and "Answer: B" all yield B.
/// Raises Error("unparseable final answer ...") when no letter is found.
char parse_answer(const std::string& text);

/// One observe-think-act-memorize iteration. The chat context is rebuilt
/// from scratch each call; nothing is carried between steps except memory.
std::pair<Action, LoopState> step(LoopState state, const media::VideoHandle& video,
                                  RunContext& ctx, cost::TokenLedger& ledger,
                                  std::vector<nlohmann::json>& events);

/// Full Algorithm-1 run: init memory, loop up to the step budget, force a
/// letter-only answer if the budget is exhausted.
RunResult run(const media::VideoHandle& video, const std::string& question,
              const std::vector<std::string>& options, RunContext& ctx,
              cost::TokenLedger& ledger);

} // namespace vidqa::controller
