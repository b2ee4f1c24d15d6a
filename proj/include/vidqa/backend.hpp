// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vidqa/costmodel.hpp"
#include "vidqa/errors.hpp"
#include "vidqa/media.hpp"

namespace vidqa::backend {

/// Model-call roles. Each role can be routed to a different model.
inline constexpr const char* kRoleController = "controller";
inline constexpr const char* kRoleUnderstanding = "understanding";
inline constexpr const char* kRoleTranscription = "transcription";

struct Attachment {
    std::string media_type; // "image/png"
    std::vector<uint8_t> bytes;
    std::string digest; // content digest, used for replay keying
};

struct ChatRequest {
    std::string role; // controller | understanding
    std::string system;
    std::string user;
    std::vector<Attachment> images;
    nlohmann::json tool_schemas = nlohmann::json::array();
    double temperature = 0.0;
    int max_tokens = 2048;

    /// Digest over all request content; strict replay pins against it.
    std::string digest() const;
};

struct ToolCallPayload {
    std::string name;
    std::string arguments_json;
};

struct ChatResponse {
    enum class Kind { Text, ToolCall };
    Kind kind = Kind::Text;
    std::string text;
    ToolCallPayload call;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
};

struct TranscriptItem {
    double start_s = 0.0; // global video time
    double end_s = 0.0;
    std::string text;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse chat(const ChatRequest& req, int step,
                              cost::TokenLedger& ledger) = 0;
};

/// Template-method base: the public entry point enforces the 25 MB payload
/// cap locally before any adapter logic runs.
class TranscribeBackend {
public:
    virtual ~TranscribeBackend() = default;
    std::vector<TranscriptItem> transcribe(const media::AudioSegment& seg,
                                           int step,
                                           cost::TokenLedger& ledger);

protected:
    virtual std::vector<TranscriptItem> do_transcribe(
        const media::AudioSegment& seg, int step,
        cost::TokenLedger& ledger) = 0;
};

/// Map a time offset within the concatenated clip audio back to global
/// video seconds using the segment's source spans.
double clip_time_to_global(const std::vector<std::pair<double, double>>& spans_s,
                           double clip_t);

/// Digest of a transcription request (encoding tag + payload bytes), the
/// transcription analogue of ChatRequest::digest.
std::string audio_request_digest(const media::AudioSegment& seg);

/// Deterministic offline adapter driven by a JSONL script. Entries are
/// keyed by (step, role); looking the same key up twice returns the same
/// response. Missing keys, role mismatches, and (in strict mode) request
/// digest mismatches raise ScriptError.
///
/// Entry shapes:
///   {"step":1,"role":"controller","kind":"tool_call","name":"...",
///    "arguments":{...},"usage":{"prompt_tokens":5000,"completion_tokens":200}}
///   {"step":1,"role":"understanding","kind":"text","text":"...","usage":{...}}
///   {"step":2,"role":"transcription","segments":[
///        {"start_s":31.0,"end_s":33.5,"text":"hello"}],"usage":{...}}
/// Optional per-entry "expect_digest" pins the request digest when strict.
class ScriptedBackend : public ChatBackend, public TranscribeBackend {
public:
    static ScriptedBackend from_jsonl(const std::string& text, bool strict = false);
    static ScriptedBackend from_file(const std::string& path, bool strict = false);

    ChatResponse chat(const ChatRequest& req, int step,
                      cost::TokenLedger& ledger) override;

    /// Entries never looked up; nonzero after a run usually means a
    /// mis-keyed fixture.
    std::size_t unused_entries() const;

protected:
    std::vector<TranscriptItem> do_transcribe(const media::AudioSegment& seg,
                                              int step,
                                              cost::TokenLedger& ledger) override;

private:
    struct Entry {
        nlohmann::json raw;
        bool used = false;
    };
    const Entry& lookup(int step, const std::string& role);
    static void record_usage(const nlohmann::json& raw, int step,
                             const std::string& role, int image_count,
                             cost::TokenLedger& ledger);

    std::map<std::pair<int, std::string>, Entry> entries_;
    bool strict_ = false;
};

struct RemoteConfig {
    std::string base_url; // e.g. http://127.0.0.1:8080 or https://host
    std::string api_key;
    std::map<std::string, std::string> models; // role -> model id
    int max_retries = 2;
    int connect_timeout_s = 10;
    int read_timeout_s = 120;
};

/// Read VIDQA_API_BASE, VIDQA_API_KEY, VIDQA_MODEL_CONTROLLER,
/// VIDQA_MODEL_UNDERSTANDING, VIDQA_MODEL_TRANSCRIPTION.
RemoteConfig remote_config_from_env();

/// Request/response mapping for the chat-completions function-calling
/// convention, split out from transport so they are testable offline.
nlohmann::json build_chat_body(const ChatRequest& req, const std::string& model);
ChatResponse parse_chat_response(const nlohmann::json& body);
std::vector<TranscriptItem> parse_transcription_response(
    const nlohmann::json& body,
    const std::vector<std::pair<double, double>>& spans_s);

/// HTTP adapter speaking the chat-completions convention for chat and the
/// audio-transcriptions convention for transcribe. Retries transient
/// failures (transport, 429, 5xx) with exponential backoff; auth failures
/// are fatal.
class RemoteBackend : public ChatBackend, public TranscribeBackend {
public:
    explicit RemoteBackend(RemoteConfig cfg);

    ChatResponse chat(const ChatRequest& req, int step,
                      cost::TokenLedger& ledger) override;

protected:
    std::vector<TranscriptItem> do_transcribe(const media::AudioSegment& seg,
                                              int step,
                                              cost::TokenLedger& ledger) override;

private:
    nlohmann::json post_json(const std::string& path, const nlohmann::json& body);
    std::string model_for(const std::string& role) const;

    RemoteConfig cfg_;
};

} // namespace vidqa::backend
