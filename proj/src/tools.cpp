// SPDX-License-Identifier: Apache-2.0
#include "vidqa/tools.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

#include "vidqa/assets.hpp"
#include "vidqa/errors.hpp"
#include "vidqa/image.hpp"

namespace vidqa::tools {

namespace {

long seconds_to_frame(double seconds, double fps) {
    return static_cast<long>(std::floor(seconds * fps + 0.5));
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return "";
    }
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string range_text(const media::FrameRange& r) {
    return "[" + std::to_string(r.start_frame) + ", " +
           std::to_string(r.end_frame) + "]";
}

backend::Attachment to_attachment(const Image& img) {
    backend::Attachment a;
    a.media_type = "image/png";
    a.bytes = encode_png(img);
    a.digest = fnv1a_hex(a.bytes.data(), a.bytes.size());
    return a;
}

media::FrameRange hull_of(const std::vector<media::FrameRange>& ranges) {
    media::FrameRange hull = ranges.front();
    for (const auto& r : ranges) {
        hull.start_frame = std::min(hull.start_frame, r.start_frame);
        hull.end_frame = std::max(hull.end_frame, r.end_frame);
    }
    return hull;
}

/// One text-only chat turn against the understanding backend, with image
/// attachments. Tool outputs must come back as plain text.
std::string understanding_text(const ToolContext& ctx, const std::string& prompt,
                               std::vector<backend::Attachment> images,
                               int iteration) {
    backend::ChatRequest req;
    req.role = backend::kRoleUnderstanding;
    req.user = prompt;
    req.images = std::move(images);
    backend::ChatResponse resp =
        ctx.understanding->chat(req, iteration, *ctx.ledger);
    if (resp.kind != backend::ChatResponse::Kind::Text) {
        throw ToolError("understanding backend returned a tool call instead of text");
    }
    return resp.text;
}

const nlohmann::ordered_json& require_field(const nlohmann::ordered_json& obj,
                                            const std::string& field) {
    const auto it = obj.find(field);
    if (it == obj.end()) {
        throw ValidationError("missing required field: " + field);
    }
    return *it;
}

media::FrameRange parse_range_object(const nlohmann::ordered_json& obj,
                                     const nlohmann::ordered_json& item_schema) {
    if (!obj.is_object()) {
        throw ValidationError("frame range must be an object");
    }
    for (const auto& req : item_schema.at("required")) {
        if (!obj.contains(req.get<std::string>())) {
            throw ValidationError("missing required field: " +
                                  req.get<std::string>());
        }
    }
    const auto& start = obj.at("start_frame");
    const auto& end = obj.at("end_frame");
    if (!start.is_number_integer() || !end.is_number_integer()) {
        throw ValidationError("frame indices must be integers");
    }
    media::FrameRange r{start.get<long>(), end.get<long>()};
    media::validate_range(r);
    return r;
}

} // namespace

// ---------------------------------------------------------------------------
// ToolSchemas

ToolSchemas ToolSchemas::load() {
    return from_json_text(assets::load_asset(assets::kToolSchemas));
}

ToolSchemas ToolSchemas::from_json_text(const std::string& text) {
    ToolSchemas s;
    s.raw_ = nlohmann::ordered_json::parse(text);
    if (!s.raw_.is_array()) {
        throw Error("tool schema document must be a JSON array");
    }
    for (const auto& entry : s.raw_) {
        const auto& fn = entry.at("function");
        ToolSchema schema;
        schema.name = fn.at("name").get<std::string>();
        schema.description = fn.at("description").get<std::string>();
        schema.parameter_schema = fn.at("parameters");
        s.parsed_.push_back(std::move(schema));
    }
    return s;
}

std::string ToolSchemas::serialize() const {
    return raw_.dump(2) + "\n";
}

const ToolSchema& ToolSchemas::find(const std::string& name) const {
    for (const auto& s : parsed_) {
        if (s.name == name) {
            return s;
        }
    }
    throw ValidationError("unknown tool: " + name);
}

std::vector<std::string> ToolSchemas::names() const {
    std::vector<std::string> out;
    out.reserve(parsed_.size());
    for (const auto& s : parsed_) {
        out.push_back(s.name);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Validation

std::string ToolCall::params_digest() const {
    nlohmann::json j;
    j["name"] = name;
    auto arr = nlohmann::json::array();
    for (const auto& r : ranges) {
        arr.push_back({r.start_frame, r.end_frame});
    }
    j["ranges"] = arr;
    j["num_frames"] = num_frames;
    j["question"] = question;
    j["reason"] = reason;
    return fnv1a_hex(j.dump());
}

ToolCall validate_call(const std::string& name, const std::string& arguments_json,
                       const ToolSchemas& schemas) {
    const ToolSchema& schema = schemas.find(name);

    nlohmann::ordered_json args;
    try {
        args = nlohmann::ordered_json::parse(arguments_json);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed arguments JSON: ") + e.what());
    }
    if (!args.is_object()) {
        throw ValidationError("arguments must be a JSON object");
    }

    for (const auto& req : schema.parameter_schema.at("required")) {
        if (!args.contains(req.get<std::string>())) {
            throw ValidationError("missing required field: " +
                                  req.get<std::string>());
        }
    }

    ToolCall call;
    call.name = name;

    const auto& props = schema.parameter_schema.at("properties");

    const auto& reason = require_field(args, "reason");
    if (!reason.is_string() || trim(reason.get<std::string>()).empty()) {
        throw ValidationError("reason must be a non-empty string");
    }
    call.reason = reason.get<std::string>();

    if (props.contains("frame_ranges")) {
        const auto& ranges = require_field(args, "frame_ranges");
        if (!ranges.is_array() || ranges.empty()) {
            throw ValidationError("frame_ranges must be a non-empty array");
        }
        const auto& item_schema = props.at("frame_ranges").at("items");
        for (const auto& r : ranges) {
            call.ranges.push_back(parse_range_object(r, item_schema));
        }
    }

    if (props.contains("frame_range")) {
        const auto& range = require_field(args, "frame_range");
        call.ranges.push_back(parse_range_object(range, props.at("frame_range")));
    }

    if (props.contains("num_frames")) {
        const auto& spec = props.at("num_frames");
        if (args.contains("num_frames")) {
            const auto& nf = args.at("num_frames");
            if (!nf.is_number_integer()) {
                throw ValidationError("num_frames must be an integer");
            }
            const long value = nf.get<long>();
            bool allowed = false;
            for (const auto& v : spec.at("enum")) {
                allowed = allowed || v.get<long>() == value;
            }
            if (!allowed) {
                throw ValidationError("num_frames outside enum " +
                                      spec.at("enum").dump());
            }
            call.num_frames = value;
        } else {
            call.num_frames = spec.at("default").get<long>();
        }
    }

    if (props.contains("question")) {
        const auto& q = require_field(args, "question");
        if (!q.is_string()) {
            throw ValidationError("question must be a string");
        }
        call.question = q.get<std::string>();
    }

    return call;
}

std::pair<ToolCall, std::vector<std::string>> clamp_call_ranges(
    ToolCall call, long total_frames) {
    std::vector<std::string> notes;
    for (auto& r : call.ranges) {
        if (r.start_frame >= total_frames) {
            throw ToolError("frame range " + range_text(r) +
                            " is fully outside the video (frames 0.." +
                            std::to_string(total_frames - 1) + ")");
        }
        if (r.end_frame >= total_frames) {
            const media::FrameRange requested = r;
            r.end_frame = total_frames - 1;
            notes.push_back("clamped range " + range_text(requested) + " to " +
                            range_text(r));
        }
    }
    return {std::move(call), std::move(notes)};
}

// ---------------------------------------------------------------------------
// Analysis response parsing

AnalysisParse parse_analysis(const std::string& text) {
    std::optional<std::string> answer;
    std::optional<std::string> confidence_text;

    size_t pos = 0;
    while (pos <= text.size()) {
        const size_t eol = text.find('\n', pos);
        const std::string line =
            text.substr(pos, eol == std::string::npos ? std::string::npos
                                                      : eol - pos);
        const std::string stripped = trim(line);
        const std::string low = lower(stripped);
        if (low.rfind("answer:", 0) == 0) {
            answer = trim(stripped.substr(7));
        } else if (low.rfind("confidence:", 0) == 0) {
            confidence_text = trim(stripped.substr(11));
        }
        if (eol == std::string::npos) {
            break;
        }
        pos = eol + 1;
    }

    if (!answer.has_value()) {
        throw ToolError("unparseable analysis: no \"Answer:\" line in response");
    }

    AnalysisParse out;
    out.answer = *answer;
    if (!confidence_text.has_value()) {
        out.confidence = 0.0;
        out.warnings.push_back("missing confidence; defaulting to 0.0");
        return out;
    }
    const char* begin = confidence_text->c_str();
    char* end = nullptr;
    const double value = std::strtod(begin, &end);
    if (end == begin) {
        out.confidence = 0.0;
        out.warnings.push_back("unparseable confidence \"" + *confidence_text +
                               "\"; defaulting to 0.0");
        return out;
    }
    if (value < 0.0 || value > 1.0) {
        out.confidence = std::clamp(value, 0.0, 1.0);
        out.warnings.push_back("confidence " + *confidence_text +
                               " out of range; clamped to " +
                               (value < 0.0 ? std::string("0.0")
                                            : std::string("1.0")));
        return out;
    }
    out.confidence = value;
    return out;
}

// ---------------------------------------------------------------------------
// Tools

ToolResult run_scene_snapper(const ToolCall& raw_call, memory::HierMemory mem,
                             const ToolContext& ctx, int iteration) {
    auto [call, notes] = clamp_call_ranges(raw_call, ctx.video.total_frames);

    const std::vector<long> alloc =
        media::allocate_across_ranges(call.ranges, call.num_frames);
    std::vector<long> indices;
    for (size_t i = 0; i < call.ranges.size(); ++i) {
        if (alloc[i] < 1) {
            continue;
        }
        const auto sampled = media::uniform_sample_indices(call.ranges[i], alloc[i]);
        indices.insert(indices.end(), sampled.begin(), sampled.end());
    }

    std::vector<media::FrameImage> frames = media::extract_frames(
        *ctx.decoder, ctx.video, indices, media::kShortEdgeCoarse);
    for (auto& f : frames) {
        f = media::overlay_index(f);
    }
    std::vector<media::MosaicGrid> mosaics = media::compose_mosaics(frames);

    const media::FrameRange hull = hull_of(call.ranges);
    const std::string prompt = assets::render_template(
        assets::load_asset(assets::kSceneCaptionPrompt),
        {{"len(frame_paths)", std::to_string(frames.size())},
         {"start_frame", std::to_string(hull.start_frame)},
         {"end_frame", std::to_string(hull.end_frame)}});

    std::vector<backend::Attachment> images;
    images.reserve(mosaics.size());
    for (const auto& m : mosaics) {
        backend::Attachment a;
        a.media_type = "image/png";
        a.bytes = m.png ? *m.png : encode_png(*m.canvas);
        a.digest = m.digest.empty() ? fnv1a_hex(a.bytes.data(), a.bytes.size())
                                    : m.digest;
        images.push_back(std::move(a));
    }

    ToolOutput out;
    out.kind = OutputKind::Caption;
    out.notes = notes;
    out.caption = understanding_text(ctx, prompt, std::move(images), iteration);

    mem = memory::set_long_term(std::move(mem), call.ranges, mosaics, iteration);

    memory::ResultEntry entry;
    entry.iteration = iteration;
    entry.intervals = call.ranges;
    entry.tool = kSceneSnapper;
    entry.output = out;
    mem = memory::append_result(std::move(mem), std::move(entry));
    return {out, std::move(mem)};
}

ToolResult run_audio_transcripter(const ToolCall& raw_call, memory::HierMemory mem,
                                  const ToolContext& ctx, int iteration) {
    auto [call, notes] = clamp_call_ranges(raw_call, ctx.video.total_frames);

    ToolOutput out;
    out.kind = OutputKind::Transcript;
    out.notes = notes;

    if (!ctx.video.has_audio) {
        out.notes.push_back("no audio track; nothing to transcribe");
    } else {
        media::AudioSegment seg =
            media::extract_audio(*ctx.decoder, ctx.video, call.ranges);
        if (seg.truncated) {
            out.notes.push_back(
                "audio truncated to fit the transcription size cap");
        }
        mem = memory::stage_short_term(std::move(mem), {}, seg, iteration);

        const auto items = ctx.transcription->transcribe(seg, iteration, *ctx.ledger);

        const media::FrameRange hull = hull_of(call.ranges);
        for (const auto& item : items) {
            media::FrameRange r{seconds_to_frame(item.start_s, ctx.video.fps),
                                seconds_to_frame(item.end_s, ctx.video.fps)};
            r.start_frame = std::clamp(r.start_frame, hull.start_frame, hull.end_frame);
            r.end_frame = std::clamp(r.end_frame, r.start_frame, hull.end_frame);
            out.segments.push_back({r, item.text});
        }
        mem = memory::clear_short_term(std::move(mem));
    }

    memory::ResultEntry entry;
    entry.iteration = iteration;
    entry.intervals = call.ranges;
    entry.tool = kAudioTranscripter;
    entry.output = out;
    mem = memory::append_result(std::move(mem), std::move(entry));
    return {out, std::move(mem)};
}

ToolResult run_clip_analyzer(const ToolCall& raw_call, memory::HierMemory mem,
                             const ToolContext& ctx, int iteration) {
    auto [call, notes] = clamp_call_ranges(raw_call, ctx.video.total_frames);
    const media::FrameRange range = call.ranges.front();

    const std::vector<long> indices = media::uniform_sample_indices(range, ctx.n2);
    std::vector<media::FrameImage> frames = media::extract_frames(
        *ctx.decoder, ctx.video, indices, media::kShortEdgeFine);
    for (auto& f : frames) {
        f = media::overlay_index(f);
    }

    mem = memory::stage_short_term(std::move(mem), frames, std::nullopt, iteration);

    const std::string prompt = assets::render_template(
        assets::load_asset(assets::kClipAnalyzerPrompt),
        {{"len(frame_paths)", std::to_string(frames.size())},
         {"start_frame", std::to_string(range.start_frame)},
         {"end_frame", std::to_string(range.end_frame)},
         {"question_text", call.question},
         {"question_text_with_options", ctx.options_text}});

    std::vector<backend::Attachment> images;
    images.reserve(frames.size());
    for (const auto& f : frames) {
        images.push_back(to_attachment(*f.pixels));
    }

    ToolOutput out;
    out.kind = OutputKind::Analysis;
    out.notes = notes;
    const std::string text =
        understanding_text(ctx, prompt, std::move(images), iteration);
    try {
        AnalysisParse parsed = parse_analysis(text);
        out.answer = parsed.answer;
        out.confidence = parsed.confidence;
        out.notes.insert(out.notes.end(), parsed.warnings.begin(),
                         parsed.warnings.end());
    } catch (const ToolError& e) {
        // A malformed analysis is still an observation: the failure text is
        // recorded so the controller can see it and retry.
        out.answer = "";
        out.confidence = 0.0;
        out.notes.push_back(e.what());
    }

    mem = memory::clear_short_term(std::move(mem));

    memory::ResultEntry entry;
    entry.iteration = iteration;
    entry.intervals = call.ranges;
    entry.tool = kClipAnalyzer;
    entry.output = out;
    mem = memory::append_result(std::move(mem), std::move(entry));
    return {out, std::move(mem)};
}

ToolResult dispatch(const ToolCall& call, memory::HierMemory mem,
                    const ToolContext& ctx, int iteration) {
    if (call.name == kSceneSnapper) {
        return run_scene_snapper(call, std::move(mem), ctx, iteration);
    }
    if (call.name == kAudioTranscripter) {
        return run_audio_transcripter(call, std::move(mem), ctx, iteration);
    }
    if (call.name == kClipAnalyzer) {
        return run_clip_analyzer(call, std::move(mem), ctx, iteration);
    }
    throw Error("dispatch of unknown tool: " + call.name);
}

} // namespace vidqa::tools
