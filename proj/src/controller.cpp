// SPDX-License-Identifier: Apache-2.0
#include "vidqa/controller.hpp"

#include <cctype>

#include "vidqa/assets.hpp"
#include "vidqa/errors.hpp"
#include "vidqa/image.hpp"

namespace vidqa::controller {

namespace {

nlohmann::json usage_json(std::int64_t prompt, std::int64_t completion) {
    return {{"prompt_tokens", prompt}, {"completion_tokens", completion}};
}

} // namespace

nlohmann::json AgentConfig::to_json() const {
    nlohmann::json j;
    j["step_budget"] = step_budget;
    j["n2"] = n2;
    j["initial_sample"] = initial_sample;
    j["per_step_token_budget"] = per_step_token_budget;
    j["controller_model"] = controller_model;
    j["understanding_model"] = understanding_model;
    j["transcription_model"] = transcription_model;
    j["temperature"] = temperature;
    j["max_tokens"] = max_tokens;
    return j;
}

AgentConfig AgentConfig::from_json(const nlohmann::json& j) {
    AgentConfig cfg;
    cfg.step_budget = j.value("step_budget", cfg.step_budget);
    cfg.n2 = j.value("n2", cfg.n2);
    cfg.initial_sample = j.value("initial_sample", cfg.initial_sample);
    cfg.per_step_token_budget =
        j.value("per_step_token_budget", cfg.per_step_token_budget);
    cfg.controller_model = j.value("controller_model", cfg.controller_model);
    cfg.understanding_model =
        j.value("understanding_model", cfg.understanding_model);
    cfg.transcription_model =
        j.value("transcription_model", cfg.transcription_model);
    cfg.temperature = j.value("temperature", cfg.temperature);
    cfg.max_tokens = j.value("max_tokens", cfg.max_tokens);
    return cfg;
}

backend::ChatResponse RecordingChat::chat(const backend::ChatRequest& req,
                                          int step,
                                          cost::TokenLedger& ledger) {
    backend::ChatResponse resp = inner_.chat(req, step, ledger);
    nlohmann::json rec;
    rec["type"] = "call";
    rec["step"] = step;
    rec["role"] = req.role;
    rec["expect_digest"] = req.digest();
    if (resp.kind == backend::ChatResponse::Kind::ToolCall) {
        rec["kind"] = "tool_call";
        rec["name"] = resp.call.name;
        nlohmann::json args;
        try {
            args = nlohmann::json::parse(resp.call.arguments_json);
        } catch (const nlohmann::json::exception&) {
            args = resp.call.arguments_json; // keep malformed payloads as-is
        }
        rec["arguments"] = args;
    } else {
        rec["kind"] = "text";
        rec["text"] = resp.text;
    }
    rec["usage"] = usage_json(resp.prompt_tokens, resp.completion_tokens);
    events_.push_back(std::move(rec));
    return resp;
}

std::vector<backend::TranscriptItem> RecordingTranscribe::do_transcribe(
    const media::AudioSegment& seg, int step, cost::TokenLedger& ledger) {
    const std::size_t before = ledger.entries().size();
    auto items = inner_.transcribe(seg, step, ledger);
    nlohmann::json rec;
    rec["type"] = "call";
    rec["step"] = step;
    rec["role"] = backend::kRoleTranscription;
    rec["expect_digest"] = backend::audio_request_digest(seg);
    auto segments = nlohmann::json::array();
    for (const auto& item : items) {
        segments.push_back({{"start_s", item.start_s},
                            {"end_s", item.end_s},
                            {"text", item.text}});
    }
    rec["segments"] = segments;
    std::int64_t prompt = 0, completion = 0;
    if (ledger.entries().size() > before) {
        prompt = ledger.entries().back().prompt_tokens;
        completion = ledger.entries().back().completion_tokens;
    }
    rec["usage"] = usage_json(prompt, completion);
    events_.push_back(std::move(rec));
    return items;
}

std::string trace_id_for(const std::string& video_path, const std::string& question,
                         const std::vector<std::string>& options) {
    std::string key = video_path + '\x1f' + question;
    for (const auto& o : options) {
        key += '\x1f' + o;
    }
    return fnv1a_hex(key);
}

std::string options_block(const std::vector<std::string>& options) {
    std::string out;
    for (size_t i = 0; i < options.size(); ++i) {
        out += static_cast<char>('A' + i);
        out += ". ";
        out += options[i];
        if (i + 1 < options.size()) {
            out += '\n';
        }
    }
    return out;
}

Prompts build_prompts(const LoopState& state, const media::VideoHandle& video) {
    Prompts p;
    p.system = assets::load_asset(assets::kAgentSystemPrompt);
    p.user = assets::render_template(
        assets::load_asset(assets::kAgentUserPrompt),
        {{"total_frames", std::to_string(video.total_frames)},
         {"duration:.1f", assets::format_fixed(video.duration_s, 1)},
         {"fps:.2f", assets::format_fixed(video.fps, 2)},
         {"memory_json", memory::render_snapshot(state.mem)},
         {"question_text", state.question},
         {"question_text_with_options", options_block(state.options)}});
    for (const auto& m : state.mem.long_term.mosaics) {
        backend::Attachment a;
        a.media_type = "image/png";
        a.bytes = m.png ? *m.png : encode_png(*m.canvas);
        a.digest = m.digest.empty() ? fnv1a_hex(a.bytes.data(), a.bytes.size())
                                    : m.digest;
        p.attachments.push_back(std::move(a));
    }
    return p;
}

char parse_answer(const std::string& text) {
    size_t i = 0;
    while (i < text.size()) {
        if (std::isalnum(static_cast<unsigned char>(text[i]))) {
            size_t j = i;
            while (j < text.size() &&
                   std::isalnum(static_cast<unsigned char>(text[j]))) {
                ++j;
            }
            if (j - i == 1) {
                const char c = static_cast<char>(
                    std::toupper(static_cast<unsigned char>(text[i])));
                if (c >= 'A' && c <= 'D') {
                    return c;
                }
            }
            i = j;
        } else {
            ++i;
        }
    }
    throw Error("unparseable final answer: \"" + text + "\"");
}

namespace {

backend::ChatRequest controller_request(const Prompts& p,
                                        const RunContext& ctx,
                                        bool offer_tools) {
    backend::ChatRequest req;
    req.role = backend::kRoleController;
    req.system = p.system;
    req.user = p.user;
    req.images = p.attachments;
    req.tool_schemas = offer_tools
                           ? nlohmann::json::parse(ctx.schemas.raw().dump())
                           : nlohmann::json::array();
    req.temperature = ctx.cfg.temperature;
    req.max_tokens = ctx.cfg.max_tokens;
    return req;
}

} // namespace

std::pair<Action, LoopState> step(LoopState state, const media::VideoHandle& video,
                                  RunContext& ctx, cost::TokenLedger& ledger,
                                  std::vector<nlohmann::json>& events) {
    if (state.finished) {
        throw Error("step called on a finished run");
    }

    const Prompts p = build_prompts(state, video);
    const backend::ChatRequest req = controller_request(p, ctx, true);
    const backend::ChatResponse resp = ctx.chat->chat(req, state.t, ledger);

    Action action;
    nlohmann::json step_rec;
    step_rec["type"] = "step";
    step_rec["step"] = state.t;

    if (resp.kind == backend::ChatResponse::Kind::ToolCall) {
        memory::TraceEntry te;
        te.iteration = state.t;
        te.chosen_action = resp.call.name;
        te.params_digest = fnv1a_hex(resp.call.arguments_json);
        step_rec["action"] = "tool_call";
        step_rec["name"] = resp.call.name;
        try {
            tools::ToolCall call = tools::validate_call(
                resp.call.name, resp.call.arguments_json, ctx.schemas);
            te.reasoning = call.reason;
            te.params_digest = call.params_digest();
            action.kind = Action::Kind::Tool;
            action.tool = call;

            tools::ToolContext tctx;
            tctx.decoder = ctx.decoder;
            tctx.video = video;
            tctx.understanding = ctx.understanding;
            tctx.transcription = ctx.transcription;
            tctx.ledger = &ledger;
            tctx.n2 = ctx.cfg.n2;
            tctx.options_text = options_block(state.options);

            auto [out, mem2] = tools::dispatch(call, state.mem, tctx, state.t);
            state.mem = std::move(mem2);
        } catch (const ValidationError& e) {
            te.error = e.what();
            step_rec["error"] = te.error;
        } catch (const ToolError& e) {
            te.error = e.what();
            step_rec["error"] = te.error;
        }
        state.mem = memory::append_trace(std::move(state.mem), te);
    } else {
        // A plain text response is an answer attempt; an unparseable one
        // aborts the run rather than consuming a step.
        const char letter = parse_answer(resp.text);
        action.kind = Action::Kind::Answer;
        action.letter = letter;
        memory::TraceEntry te;
        te.iteration = state.t;
        te.chosen_action = "answer";
        te.reasoning = resp.text;
        state.mem = memory::append_trace(std::move(state.mem), te);
        state.finished = true;
        state.letter = letter;
        step_rec["action"] = "answer";
        step_rec["letter"] = std::string(1, letter);
    }

    step_rec["memory_digest"] = fnv1a_hex(memory::render_snapshot(state.mem));
    events.push_back(std::move(step_rec));
    state.t += 1;
    return {action, std::move(state)};
}

RunResult run(const media::VideoHandle& video, const std::string& question,
              const std::vector<std::string>& options, RunContext& ctx,
              cost::TokenLedger& ledger) {
    if (options.size() != 4) {
        throw ValidationError("expected exactly 4 answer options, got " +
                              std::to_string(options.size()));
    }
    if (ctx.cfg.step_budget < 1) {
        throw ValidationError("step budget must be at least 1");
    }
    if (ctx.schemas.raw().empty()) {
        ctx.schemas = tools::ToolSchemas::load();
    }

    RunResult result;

    RecordingChat rec_chat(*ctx.chat, result.events);
    RecordingChat rec_under(*ctx.understanding, result.events);
    RecordingTranscribe rec_trans(*ctx.transcription, result.events);
    RunContext inner = ctx;
    inner.chat = &rec_chat;
    inner.understanding = &rec_under;
    inner.transcription = &rec_trans;

    LoopState state;
    state.question = question;
    state.options = options;

    const std::string trace_id = trace_id_for(video.path, question, options);

    try {
        state.mem = memory::init_memory(*ctx.decoder, video,
                                        ctx.cfg.initial_sample);

        while (!state.finished && state.t <= ctx.cfg.step_budget) {
            auto [action, next] = step(state, video, inner, ledger,
                                       result.events);
            state = std::move(next);
            if (ctx.hooks.on_step) {
                ctx.hooks.on_step(state);
            }
        }

        FinalAnswer ans;
        ans.trace_id = trace_id;
        if (state.finished) {
            ans.letter = state.letter;
            ans.forced = false;
            ans.steps_used = state.t - 1;
        } else {
            const Prompts p = build_prompts(state, video);
            Prompts forced = p;
            forced.user += assets::load_asset(assets::kForcedAnswerSuffix);
            const backend::ChatRequest req =
                controller_request(forced, ctx, false);
            const backend::ChatResponse resp =
                rec_chat.chat(req, state.t, ledger);
            if (resp.kind != backend::ChatResponse::Kind::Text) {
                throw Error("forced answer returned a tool call");
            }
            ans.letter = parse_answer(resp.text);
            ans.forced = true;
            ans.steps_used = ctx.cfg.step_budget;
        }

        nlohmann::json final_rec;
        final_rec["type"] = "final";
        final_rec["letter"] = std::string(1, ans.letter);
        final_rec["forced"] = ans.forced;
        final_rec["steps_used"] = ans.steps_used;
        final_rec["total_tokens"] = cost::tally(ledger).grand_total;
        result.events.push_back(std::move(final_rec));
        result.answer = ans;
    } catch (const Error& e) {
        result.abort_reason = e.what();
        nlohmann::json abort_rec;
        abort_rec["type"] = "abort";
        abort_rec["step"] = state.t;
        abort_rec["reason"] = result.abort_reason;
        result.events.push_back(std::move(abort_rec));
    }

    result.mem = std::move(state.mem);
    return result;
}

} // namespace vidqa::controller
