// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "vidqa/backend.hpp"
#include "vidqa/controller.hpp"
#include "vidqa/harness.hpp"
#include "vidqa/image.hpp"
#include "vidqa/media.hpp"

namespace testsupport {

// ---------------------------------------------------------------------------
// Scripted transcript builders

inline nlohmann::json usage(std::int64_t prompt, std::int64_t completion) {
    return {{"prompt_tokens", prompt}, {"completion_tokens", completion}};
}

inline nlohmann::json script_tool_call(int step, const std::string& name,
                                       nlohmann::json args,
                                       std::int64_t prompt = 5000,
                                       std::int64_t completion = 120) {
    return {{"step", step},          {"role", "controller"},
            {"kind", "tool_call"},   {"name", name},
            {"arguments", std::move(args)}, {"usage", usage(prompt, completion)}};
}

inline nlohmann::json script_text(int step, const std::string& role,
                                  const std::string& text,
                                  std::int64_t prompt = 4000,
                                  std::int64_t completion = 60) {
    return {{"step", step},
            {"role", role},
            {"kind", "text"},
            {"text", text},
            {"usage", usage(prompt, completion)}};
}

inline nlohmann::json script_segments(int step, nlohmann::json segments,
                                      std::int64_t prompt = 0,
                                      std::int64_t completion = 30) {
    return {{"step", step},
            {"role", "transcription"},
            {"segments", std::move(segments)},
            {"usage", usage(prompt, completion)}};
}

inline std::string to_jsonl(const std::vector<nlohmann::json>& entries) {
    std::string out;
    for (const auto& e : entries) {
        out += e.dump() + "\n";
    }
    return out;
}

inline nlohmann::json scene_args(long start, long end, long num_frames = 30) {
    return {{"frame_ranges",
             nlohmann::json::array(
                 {{{"start_frame", start}, {"end_frame", end}}})},
            {"num_frames", num_frames},
            {"reason", "look at the segment"}};
}

inline nlohmann::json audio_args(long start, long end) {
    return {{"frame_ranges",
             nlohmann::json::array(
                 {{{"start_frame", start}, {"end_frame", end}}})},
            {"reason", "listen to the segment"}};
}

inline nlohmann::json clip_args(long start, long end, const std::string& q) {
    return {{"frame_range", {{"start_frame", start}, {"end_frame", end}}},
            {"question", q},
            {"reason", "probe the segment"}};
}

// ---------------------------------------------------------------------------
// Scripted end-to-end run

inline std::string synthetic_path(long frames, double fps = 24.0, int w = 320,
                                  int h = 240, long audio_bitrate = 256000) {
    return "synthetic:frames=" + std::to_string(frames) +
           ",fps=" + std::to_string(fps) + ",width=" + std::to_string(w) +
           ",height=" + std::to_string(h) +
           ",audio_bitrate=" + std::to_string(audio_bitrate);
}

struct ScriptedRun {
    vidqa::controller::RunResult result;
    vidqa::cost::TokenLedger ledger;
};

inline ScriptedRun run_scripted(const std::string& video_path,
                                const std::string& jsonl,
                                const std::string& question = "What happens?",
                                std::vector<std::string> options =
                                    {"one", "two", "three", "four"},
                                vidqa::controller::AgentConfig cfg = {},
                                vidqa::controller::RunHooks hooks = {}) {
    auto scripted = vidqa::backend::ScriptedBackend::from_jsonl(jsonl);
    auto& decoder = vidqa::media::decoder_for(video_path);
    const auto video = vidqa::media::probe_video(decoder, video_path);
    vidqa::controller::RunContext ctx;
    ctx.decoder = &decoder;
    ctx.chat = &scripted;
    ctx.understanding = &scripted;
    ctx.transcription = &scripted;
    ctx.cfg = cfg;
    ctx.hooks = std::move(hooks);
    ScriptedRun out;
    out.result = vidqa::controller::run(video, question, options, ctx, out.ledger);
    return out;
}

// ---------------------------------------------------------------------------
// Stamp decoding (template match against the shipped glyph font)

inline std::optional<int> match_glyph(const vidqa::Image& img, int x, int y,
                                      int scale) {
    std::array<uint8_t, 7> rows{};
    for (int row = 0; row < 7; ++row) {
        for (int col = 0; col < 5; ++col) {
            const int px = x + col * scale + scale / 2;
            const int py = y + row * scale + scale / 2;
            if (px >= img.width() || py >= img.height()) {
                return std::nullopt;
            }
            const vidqa::Rgb c = img.at(px, py);
            if (c.r == 255 && c.g == 255 && c.b == 255) {
                rows[static_cast<size_t>(row)] |=
                    static_cast<uint8_t>(1 << (4 - col));
            }
        }
    }
    for (int d = 0; d <= 9; ++d) {
        if (rows == vidqa::digit_glyph(d)) {
            return d;
        }
    }
    return std::nullopt;
}

/// Read back the digits stamped at (x, y). Empty result means no glyph
/// matched at the first position.
inline std::string decode_stamp(const vidqa::Image& img, int x, int y,
                                int scale) {
    std::string out;
    for (int ci = 0;; ++ci) {
        const auto digit = match_glyph(img, x + ci * 6 * scale, y, scale);
        if (!digit.has_value()) {
            break;
        }
        out += static_cast<char>('0' + *digit);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Minimal PNG reader for round-trip checks (filter-0 truecolor only)

struct DecodedPng {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels; // interleaved RGB
};

inline uint32_t read_u32_be(const std::vector<uint8_t>& b, size_t pos) {
    return (static_cast<uint32_t>(b[pos]) << 24) |
           (static_cast<uint32_t>(b[pos + 1]) << 16) |
           (static_cast<uint32_t>(b[pos + 2]) << 8) |
           static_cast<uint32_t>(b[pos + 3]);
}

inline DecodedPng decode_png(const std::vector<uint8_t>& bytes) {
    const std::vector<uint8_t> sig = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (bytes.size() < 8 || !std::equal(sig.begin(), sig.end(), bytes.begin())) {
        throw std::runtime_error("bad png signature");
    }
    DecodedPng out;
    std::vector<uint8_t> idat;
    size_t pos = 8;
    while (pos + 12 <= bytes.size()) {
        const uint32_t len = read_u32_be(bytes, pos);
        const std::string type(bytes.begin() + pos + 4, bytes.begin() + pos + 8);
        const uLong crc =
            crc32(0L, bytes.data() + pos + 4, static_cast<uInt>(len + 4));
        if (static_cast<uint32_t>(crc) != read_u32_be(bytes, pos + 8 + len)) {
            throw std::runtime_error("png crc mismatch in " + type);
        }
        if (type == "IHDR") {
            out.width = static_cast<int>(read_u32_be(bytes, pos + 8));
            out.height = static_cast<int>(read_u32_be(bytes, pos + 12));
            if (bytes[pos + 16] != 8 || bytes[pos + 17] != 2) {
                throw std::runtime_error("unsupported png format");
            }
        } else if (type == "IDAT") {
            idat.insert(idat.end(), bytes.begin() + pos + 8,
                        bytes.begin() + pos + 8 + len);
        } else if (type == "IEND") {
            break;
        }
        pos += 12 + len;
    }
    const size_t stride = static_cast<size_t>(out.width) * 3;
    std::vector<uint8_t> raw((stride + 1) * static_cast<size_t>(out.height));
    uLongf raw_len = raw.size();
    if (uncompress(raw.data(), &raw_len, idat.data(),
                   static_cast<uLong>(idat.size())) != Z_OK ||
        raw_len != raw.size()) {
        throw std::runtime_error("png inflate failed");
    }
    out.pixels.reserve(stride * static_cast<size_t>(out.height));
    for (int y = 0; y < out.height; ++y) {
        const size_t row = static_cast<size_t>(y) * (stride + 1);
        if (raw[row] != 0) {
            throw std::runtime_error("unexpected png filter type");
        }
        out.pixels.insert(out.pixels.end(), raw.begin() + row + 1,
                          raw.begin() + row + 1 + stride);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Independent rounding/allocation oracles

/// round(num/den) half up via explicit quotient/remainder, num >= 0, den > 0.
inline long round_half_up_frac(long num, long den) {
    const long q = num / den;
    const long r = num % den;
    return q + (2 * r >= den ? 1 : 0);
}

/// Largest-remainder allocation by repeated selection: give every range its
/// floor share, then hand out leftover units one at a time to the unserved
/// range with the largest remainder (earliest index on ties).
inline std::vector<long> allocation_oracle(
    const std::vector<vidqa::media::FrameRange>& ranges, long n) {
    long total = 0;
    for (const auto& r : ranges) {
        total += r.length();
    }
    std::vector<long> out(ranges.size());
    std::vector<long> rem(ranges.size());
    long used = 0;
    for (size_t i = 0; i < ranges.size(); ++i) {
        out[i] = n * ranges[i].length() / total;
        rem[i] = n * ranges[i].length() % total;
        used += out[i];
    }
    std::vector<bool> served(ranges.size(), false);
    for (long left = n - used; left > 0; --left) {
        size_t best = ranges.size();
        for (size_t i = 0; i < ranges.size(); ++i) {
            if (served[i]) {
                continue;
            }
            if (best == ranges.size() || rem[i] > rem[best]) {
                best = i;
            }
        }
        served[best] = true;
        out[best] += 1;
    }
    return out;
}

inline std::vector<long> sampling_oracle(const vidqa::media::FrameRange& range,
                                         long k) {
    const long len = range.length();
    std::vector<long> out;
    if (len <= k) {
        for (long i = 0; i < len; ++i) {
            out.push_back(range.start_frame + i);
        }
        return out;
    }
    if (k == 1) {
        return {range.start_frame};
    }
    for (long i = 0; i < k; ++i) {
        const long idx =
            range.start_frame + round_half_up_frac(i * (len - 1), k - 1);
        if (out.empty() || out.back() != idx) {
            out.push_back(idx);
        }
    }
    return out;
}

} // namespace testsupport
