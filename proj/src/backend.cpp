// SPDX-License-Identifier: Apache-2.0
#include "vidqa/backend.hpp"

#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "vidqa/image.hpp"

namespace vidqa::backend {

namespace {

void append_field(std::string& buf, const std::string& field) {
    buf += field;
    buf += '\x1f';
}

} // namespace

std::string ChatRequest::digest() const {
    std::string buf;
    append_field(buf, role);
    append_field(buf, system);
    append_field(buf, user);
    for (const auto& img : images) {
        append_field(buf, img.media_type);
        append_field(buf, img.digest);
    }
    append_field(buf, tool_schemas.dump());
    char params[64];
    std::snprintf(params, sizeof params, "t=%.6f;m=%d", temperature, max_tokens);
    append_field(buf, params);
    return fnv1a_hex(buf);
}

std::vector<TranscriptItem> TranscribeBackend::transcribe(
    const media::AudioSegment& seg, int step, cost::TokenLedger& ledger) {
    if (seg.byte_size() > media::kAudioByteCap) {
        throw BackendError("audio payload exceeds transcription size cap (" +
                               std::to_string(seg.byte_size()) + " > " +
                               std::to_string(media::kAudioByteCap) + " bytes)",
                           false);
    }
    return do_transcribe(seg, step, ledger);
}

std::string audio_request_digest(const media::AudioSegment& seg) {
    std::string buf;
    append_field(buf, seg.encoding);
    buf.append(seg.data.begin(), seg.data.end());
    return fnv1a_hex(buf);
}

double clip_time_to_global(const std::vector<std::pair<double, double>>& spans_s,
                           double clip_t) {
    if (spans_s.empty()) {
        throw Error("clip_time_to_global with no source spans");
    }
    double consumed = 0.0;
    for (const auto& [g0, g1] : spans_s) {
        const double len = g1 - g0;
        if (clip_t <= consumed + len) {
            return g0 + (clip_t - consumed);
        }
        consumed += len;
    }
    return spans_s.back().second;
}

// ---------------------------------------------------------------------------
// ScriptedBackend

ScriptedBackend ScriptedBackend::from_jsonl(const std::string& text, bool strict) {
    ScriptedBackend b;
    b.strict_ = strict;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        nlohmann::json raw;
        try {
            raw = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ScriptError("script line " + std::to_string(lineno) +
                              ": invalid JSON: " + e.what());
        }
        if (!raw.contains("step") || !raw.contains("role")) {
            throw ScriptError("script line " + std::to_string(lineno) +
                              ": missing step or role");
        }
        const auto key = std::make_pair(raw["step"].get<int>(),
                                        raw["role"].get<std::string>());
        if (!b.entries_.emplace(key, Entry{raw, false}).second) {
            throw ScriptError("script line " + std::to_string(lineno) +
                              ": duplicate entry for step " +
                              std::to_string(key.first) + " role " + key.second);
        }
    }
    return b;
}

ScriptedBackend ScriptedBackend::from_file(const std::string& path, bool strict) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ScriptError("cannot open script file: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_jsonl(buf.str(), strict);
}

const ScriptedBackend::Entry& ScriptedBackend::lookup(int step,
                                                      const std::string& role) {
    const auto it = entries_.find(std::make_pair(step, role));
    if (it == entries_.end()) {
        throw ScriptError("script has no entry for step " +
                          std::to_string(step) + " role " + role);
    }
    it->second.used = true;
    return it->second;
}

void ScriptedBackend::record_usage(const nlohmann::json& raw, int step,
                                   const std::string& role, int image_count,
                                   cost::TokenLedger& ledger) {
    cost::LedgerEntry e;
    e.step = step;
    e.role = role;
    e.image_count = image_count;
    if (raw.contains("usage")) {
        const auto& u = raw["usage"];
        e.prompt_tokens = u.value("prompt_tokens", 0);
        e.completion_tokens = u.value("completion_tokens", 0);
    }
    ledger.add(e);
}

ChatResponse ScriptedBackend::chat(const ChatRequest& req, int step,
                                   cost::TokenLedger& ledger) {
    const Entry& entry = lookup(step, req.role);
    const auto& raw = entry.raw;
    if (strict_ && raw.contains("expect_digest") &&
        raw["expect_digest"].get<std::string>() != req.digest()) {
        throw ScriptError("request digest mismatch at step " +
                          std::to_string(step) + " role " + req.role +
                          ": expected " + raw["expect_digest"].get<std::string>() +
                          ", got " + req.digest());
    }
    ChatResponse resp;
    const std::string kind = raw.value("kind", "text");
    if (kind == "tool_call") {
        resp.kind = ChatResponse::Kind::ToolCall;
        resp.call.name = raw.value("name", "");
        if (resp.call.name.empty()) {
            throw ScriptError("tool_call entry without a name at step " +
                              std::to_string(step));
        }
        const auto& args = raw.contains("arguments") ? raw["arguments"]
                                                     : nlohmann::json::object();
        resp.call.arguments_json = args.is_string()
                                       ? args.get<std::string>()
                                       : args.dump();
    } else if (kind == "text") {
        resp.kind = ChatResponse::Kind::Text;
        resp.text = raw.value("text", "");
    } else {
        throw ScriptError("unknown script entry kind: " + kind);
    }
    if (raw.contains("usage")) {
        resp.prompt_tokens = raw["usage"].value("prompt_tokens", 0);
        resp.completion_tokens = raw["usage"].value("completion_tokens", 0);
    }
    record_usage(raw, step, req.role, static_cast<int>(req.images.size()), ledger);
    return resp;
}

std::vector<TranscriptItem> ScriptedBackend::do_transcribe(
    const media::AudioSegment& seg, int step, cost::TokenLedger& ledger) {
    const Entry& entry = lookup(step, kRoleTranscription);
    const auto& raw = entry.raw;
    if (strict_ && raw.contains("expect_digest") &&
        raw["expect_digest"].get<std::string>() != audio_request_digest(seg)) {
        throw ScriptError("audio digest mismatch at step " + std::to_string(step) +
                          ": expected " + raw["expect_digest"].get<std::string>() +
                          ", got " + audio_request_digest(seg));
    }
    std::vector<TranscriptItem> items;
    for (const auto& s : raw.value("segments", nlohmann::json::array())) {
        TranscriptItem item;
        item.start_s = s.at("start_s").get<double>();
        item.end_s = s.at("end_s").get<double>();
        item.text = s.at("text").get<std::string>();
        items.push_back(std::move(item));
    }
    (void)seg;
    record_usage(raw, step, kRoleTranscription, 0, ledger);
    return items;
}

std::size_t ScriptedBackend::unused_entries() const {
    std::size_t n = 0;
    for (const auto& [key, entry] : entries_) {
        if (!entry.used) {
            ++n;
        }
    }
    return n;
}

// ---------------------------------------------------------------------------
// RemoteBackend

RemoteConfig remote_config_from_env() {
    RemoteConfig cfg;
    if (const char* v = std::getenv("VIDQA_API_BASE")) {
        cfg.base_url = v;
    }
    if (const char* v = std::getenv("VIDQA_API_KEY")) {
        cfg.api_key = v;
    }
    const std::pair<const char*, const char*> role_envs[] = {
        {kRoleController, "VIDQA_MODEL_CONTROLLER"},
        {kRoleUnderstanding, "VIDQA_MODEL_UNDERSTANDING"},
        {kRoleTranscription, "VIDQA_MODEL_TRANSCRIPTION"},
    };
    for (const auto& [role, env] : role_envs) {
        if (const char* v = std::getenv(env)) {
            cfg.models[role] = v;
        }
    }
    return cfg;
}

nlohmann::json build_chat_body(const ChatRequest& req, const std::string& model) {
    nlohmann::json body;
    body["model"] = model;
    body["temperature"] = req.temperature;
    body["max_tokens"] = req.max_tokens;

    nlohmann::json messages = nlohmann::json::array();
    messages.push_back({{"role", "system"}, {"content", req.system}});

    if (req.images.empty()) {
        messages.push_back({{"role", "user"}, {"content", req.user}});
    } else {
        nlohmann::json parts = nlohmann::json::array();
        parts.push_back({{"type", "text"}, {"text", req.user}});
        for (const auto& img : req.images) {
            const std::string payload(img.bytes.begin(), img.bytes.end());
            const std::string url = "data:" + img.media_type + ";base64," +
                                    httplib::detail::base64_encode(payload);
            parts.push_back({{"type", "image_url"},
                             {"image_url", {{"url", url}}}});
        }
        messages.push_back({{"role", "user"}, {"content", parts}});
    }
    body["messages"] = messages;

    if (!req.tool_schemas.empty()) {
        body["tools"] = req.tool_schemas;
        body["tool_choice"] = "auto";
    }
    return body;
}

ChatResponse parse_chat_response(const nlohmann::json& body) {
    ChatResponse resp;
    const auto& choices = body.at("choices");
    if (!choices.is_array() || choices.empty()) {
        throw BackendError("chat response has no choices", false);
    }
    const auto& message = choices.at(0).at("message");
    if (message.contains("tool_calls") && !message["tool_calls"].empty()) {
        const auto& call = message["tool_calls"].at(0).at("function");
        resp.kind = ChatResponse::Kind::ToolCall;
        resp.call.name = call.at("name").get<std::string>();
        const auto& args = call.at("arguments");
        resp.call.arguments_json = args.is_string() ? args.get<std::string>()
                                                    : args.dump();
    } else {
        resp.kind = ChatResponse::Kind::Text;
        if (message.contains("content") && message["content"].is_string()) {
            resp.text = message["content"].get<std::string>();
        }
    }
    if (body.contains("usage")) {
        resp.prompt_tokens = body["usage"].value("prompt_tokens", 0);
        resp.completion_tokens = body["usage"].value("completion_tokens", 0);
    }
    return resp;
}

std::vector<TranscriptItem> parse_transcription_response(
    const nlohmann::json& body,
    const std::vector<std::pair<double, double>>& spans_s) {
    std::vector<TranscriptItem> items;
    if (!body.contains("segments")) {
        return items;
    }
    for (const auto& s : body["segments"]) {
        TranscriptItem item;
        item.start_s = clip_time_to_global(spans_s, s.at("start").get<double>());
        item.end_s = clip_time_to_global(spans_s, s.at("end").get<double>());
        item.text = s.at("text").get<std::string>();
        items.push_back(std::move(item));
    }
    return items;
}

RemoteBackend::RemoteBackend(RemoteConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.base_url.empty()) {
        throw BackendError("remote backend requires a base URL", false);
    }
}

std::string RemoteBackend::model_for(const std::string& role) const {
    const auto it = cfg_.models.find(role);
    if (it == cfg_.models.end()) {
        throw BackendError("no model configured for role: " + role, false);
    }
    return it->second;
}

nlohmann::json RemoteBackend::post_json(const std::string& path,
                                        const nlohmann::json& body) {
    const std::string payload = body.dump();
    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(
                std::chrono::milliseconds(500 * (1 << (attempt - 1))));
        }
        httplib::Client client(cfg_.base_url);
        client.set_connection_timeout(cfg_.connect_timeout_s, 0);
        client.set_read_timeout(cfg_.read_timeout_s, 0);
        httplib::Headers headers;
        if (!cfg_.api_key.empty()) {
            headers.emplace("Authorization", "Bearer " + cfg_.api_key);
        }
        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 401 || res->status == 403) {
            throw BackendError("authentication failed (HTTP " +
                                   std::to_string(res->status) + ")",
                               false);
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw BackendError("HTTP " + std::to_string(res->status) + ": " +
                                   res->body,
                               false);
        }
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(std::string("malformed response JSON: ") +
                                   e.what(),
                               false);
        }
    }
    throw BackendError("request failed after " +
                           std::to_string(cfg_.max_retries + 1) +
                           " attempts: " + last_error,
                       true);
}

ChatResponse RemoteBackend::chat(const ChatRequest& req, int step,
                                 cost::TokenLedger& ledger) {
    const auto body = build_chat_body(req, model_for(req.role));
    const auto resp_body = post_json("/v1/chat/completions", body);
    ChatResponse resp = parse_chat_response(resp_body);
    cost::LedgerEntry e;
    e.step = step;
    e.role = req.role;
    e.prompt_tokens = resp.prompt_tokens;
    e.completion_tokens = resp.completion_tokens;
    e.image_count = static_cast<int>(req.images.size());
    ledger.add(e);
    return resp;
}

std::vector<TranscriptItem> RemoteBackend::do_transcribe(
    const media::AudioSegment& seg, int step, cost::TokenLedger& ledger) {
    const std::string model = model_for(kRoleTranscription);
    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(
                std::chrono::milliseconds(500 * (1 << (attempt - 1))));
        }
        httplib::Client client(cfg_.base_url);
        client.set_connection_timeout(cfg_.connect_timeout_s, 0);
        client.set_read_timeout(cfg_.read_timeout_s, 0);
        httplib::Headers headers;
        if (!cfg_.api_key.empty()) {
            headers.emplace("Authorization", "Bearer " + cfg_.api_key);
        }
        httplib::MultipartFormDataItems items = {
            {"model", model, "", ""},
            {"response_format", "verbose_json", "", ""},
            {"file", std::string(seg.data.begin(), seg.data.end()),
             "audio." + seg.encoding.substr(0, seg.encoding.find('-')),
             "application/octet-stream"},
        };
        auto res = client.Post("/v1/audio/transcriptions", headers, items);
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 401 || res->status == 403) {
            throw BackendError("authentication failed (HTTP " +
                                   std::to_string(res->status) + ")",
                               false);
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw BackendError("HTTP " + std::to_string(res->status) + ": " +
                                   res->body,
                               false);
        }
        nlohmann::json body;
        try {
            body = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(std::string("malformed response JSON: ") +
                                   e.what(),
                               false);
        }
        auto items_out = parse_transcription_response(body, seg.spans_s);
        cost::LedgerEntry le;
        le.step = step;
        le.role = kRoleTranscription;
        if (body.contains("usage")) {
            le.prompt_tokens = body["usage"].value("prompt_tokens", 0);
            le.completion_tokens = body["usage"].value("completion_tokens", 0);
        }
        ledger.add(le);
        return items_out;
    }
    throw BackendError("transcription failed after " +
                           std::to_string(cfg_.max_retries + 1) +
                           " attempts: " + last_error,
                       true);
}

} // namespace vidqa::backend
