// SPDX-License-Identifier: Apache-2.0
#include "vidqa/media.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace vidqa::media {

void validate_range(const FrameRange& r) {
    if (r.start_frame < 0)
        throw ValidationError("malformed range (negative start): [" + std::to_string(r.start_frame) +
                              ", " + std::to_string(r.end_frame) + "]");
    if (r.start_frame > r.end_frame)
        throw ValidationError("malformed range (start > end): [" + std::to_string(r.start_frame) +
                              ", " + std::to_string(r.end_frame) + "]");
}

VideoHandle probe_video(MediaDecoder& decoder, const std::string& path) {
    VideoInfo info = decoder.probe(path);
    if (info.total_frames < 1) throw MediaError("zero-frame stream: " + path);
    if (info.fps <= 0.0) throw MediaError("no video track: " + path);
    VideoHandle h{path, info.total_frames, info.fps, info.duration_s, info.has_audio};
    if (std::fabs(h.duration_s - h.total_frames / h.fps) > 1.0 / h.fps)
        throw MediaError("inconsistent duration metadata: " + path);
    return h;
}

std::vector<long> allocate_across_ranges(const std::vector<FrameRange>& ranges, long n) {
    if (n < 1) throw ValidationError("frame count must be >= 1");
    if (ranges.empty()) throw ValidationError("empty range list");
    for (const auto& r : ranges) validate_range(r);

    long total_len = 0;
    for (const auto& r : ranges) total_len += r.length();

    std::vector<long> counts(ranges.size(), 0);
    std::vector<std::pair<long, size_t>> remainders; // (n*len mod total, index)
    long assigned = 0;
    for (size_t i = 0; i < ranges.size(); ++i) {
        long num = n * ranges[i].length();
        counts[i] = num / total_len;
        assigned += counts[i];
        remainders.emplace_back(num % total_len, i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (long r = n - assigned, j = 0; r > 0; --r, ++j) counts[remainders[j].second] += 1;
    return counts;
}

std::vector<long> uniform_sample_indices(const FrameRange& range, long k) {
    if (k < 1) throw ValidationError("sample count must be >= 1");
    validate_range(range);
    const long len = range.length();
    std::vector<long> out;
    if (len <= k) {
        out.resize(len);
        std::iota(out.begin(), out.end(), range.start_frame);
        return out;
    }
    if (k == 1) return {range.start_frame};
    out.reserve(k);
    for (long i = 0; i < k; ++i) {
        // round-half-up of i*(len-1)/(k-1) in exact integer arithmetic
        long idx = range.start_frame + (2 * i * (len - 1) + (k - 1)) / (2 * (k - 1));
        if (out.empty() || out.back() != idx) out.push_back(idx);
    }
    return out;
}

std::vector<FrameImage> extract_frames(MediaDecoder& decoder, const VideoHandle& handle,
                                       const std::vector<long>& indices, int short_edge) {
    if (short_edge != kShortEdgeCoarse && short_edge != kShortEdgeFine)
        throw MediaError("unsupported short_edge value: " + std::to_string(short_edge));
    std::vector<FrameImage> out;
    out.reserve(indices.size());
    for (long idx : indices) {
        if (idx < 0 || idx >= handle.total_frames)
            throw MediaError("frame index out of bounds: " + std::to_string(idx));
        Image native = decoder.decode_frame(handle.path, idx);
        auto resized = std::make_shared<Image>(resize_short_edge(native, short_edge));
        out.push_back({idx, std::move(resized), short_edge});
    }
    return out;
}

FrameImage overlay_index(const FrameImage& frame) {
    if (!frame.pixels) throw MediaError("overlay_index on empty frame");
    auto stamped = std::make_shared<Image>(*frame.pixels);
    int scale = stamp_scale_for(frame.short_edge_px > 0 ? frame.short_edge_px
                                                        : std::min(stamped->width(), stamped->height()));
    stamp_digits(*stamped, std::to_string(frame.global_index), 4, 4, scale);
    return {frame.global_index, std::move(stamped), frame.short_edge_px};
}

std::vector<MosaicGrid> compose_mosaics(const std::vector<FrameImage>& frames) {
    if (frames.empty()) throw MediaError("cannot compose mosaics from empty input");
    int cell_w = 0, cell_h = 0;
    for (const auto& f : frames) {
        cell_w = std::max(cell_w, f.pixels->width());
        cell_h = std::max(cell_h, f.pixels->height());
    }
    std::vector<MosaicGrid> grids;
    grids.reserve((frames.size() + kMosaicCapacity - 1) / kMosaicCapacity);
    for (size_t base = 0; base < frames.size(); base += kMosaicCapacity) {
        auto canvas = std::make_shared<Image>(cell_w * kMosaicCols, cell_h * kMosaicRows);
        MosaicGrid grid;
        for (size_t j = base; j < std::min(frames.size(), base + kMosaicCapacity); ++j) {
            size_t cell = j - base;
            int cx = static_cast<int>(cell % kMosaicCols) * cell_w;
            int cy = static_cast<int>(cell / kMosaicCols) * cell_h;
            blit(*canvas, *frames[j].pixels, cx, cy);
            grid.member_indices.push_back(frames[j].global_index);
        }
        grid.canvas = std::move(canvas);
        grid.png = std::make_shared<const std::vector<uint8_t>>(
            encode_png(*grid.canvas));
        grid.digest = fnv1a_hex(grid.png->data(), grid.png->size());
        grids.push_back(std::move(grid));
    }
    return grids;
}

AudioSegment extract_audio(MediaDecoder& decoder, const VideoHandle& handle,
                           const std::vector<FrameRange>& ranges) {
    if (ranges.empty()) throw ValidationError("empty range list");
    for (const auto& r : ranges) validate_range(r);
    if (!handle.has_audio) throw MediaError("no audio track: " + handle.path);

    std::vector<std::pair<double, double>> spans;
    spans.reserve(ranges.size());
    for (const auto& r : ranges) {
        double a = r.start_frame / handle.fps;
        double b = std::min((r.end_frame + 1) / handle.fps, handle.duration_s);
        if (b > a) spans.emplace_back(a, b);
    }
    if (spans.empty()) throw MediaError("audio ranges collapse to zero duration");

    constexpr long kMinBitrate = 32000;
    long bitrate = std::max(decoder.native_audio_bitrate(handle.path), kMinBitrate);
    std::vector<uint8_t> data = decoder.extract_audio(handle.path, spans, bitrate);
    while (data.size() > kAudioByteCap && bitrate / 2 >= kMinBitrate) {
        bitrate /= 2;
        data = decoder.extract_audio(handle.path, spans, bitrate);
    }

    bool truncated = false;
    auto fitted = spans;
    while (data.size() > kAudioByteCap) {
        truncated = true;
        double have = 0.0;
        for (const auto& s : fitted) have += s.second - s.first;
        double keep = have * static_cast<double>(kAudioByteCap) / static_cast<double>(data.size());
        std::vector<std::pair<double, double>> cut;
        double acc = 0.0;
        for (const auto& s : fitted) {
            double dur = s.second - s.first;
            if (acc + dur <= keep) {
                cut.push_back(s);
                acc += dur;
            } else {
                double left = keep - acc;
                if (left > 1e-6) cut.emplace_back(s.first, s.first + left);
                break;
            }
        }
        if (cut.empty()) throw MediaError("audio cannot be reduced under the 25 MB cap");
        fitted = std::move(cut);
        data = decoder.extract_audio(handle.path, fitted, bitrate);
    }

    AudioSegment seg;
    seg.ranges = ranges;
    seg.spans_s = fitted;
    seg.data = std::move(data);
    seg.encoding = decoder.audio_encoding_tag(bitrate);
    seg.truncated = truncated;
    return seg;
}

// ---------------------------------------------------------------------------
// SyntheticDecoder

namespace {

struct SyntheticSpec {
    long frames = 0;
    double fps = 30.0;
    int width = 640;
    int height = 360;
    long audio_bitrate = 256000; // 0 = no audio track
};

SyntheticSpec parse_synthetic(const std::string& path) {
    const std::string prefix = "synthetic:";
    if (path.rfind(prefix, 0) != 0) throw MediaError("unreadable file: " + path);
    SyntheticSpec spec;
    bool have_frames = false;
    std::stringstream ss(path.substr(prefix.size()));
    std::string kv;
    while (std::getline(ss, kv, ',')) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw MediaError("unreadable file: " + path);
        std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
        try {
            if (key == "frames") {
                spec.frames = std::stol(val);
                have_frames = true;
            } else if (key == "fps") {
                spec.fps = std::stod(val);
            } else if (key == "width") {
                spec.width = std::stoi(val);
            } else if (key == "height") {
                spec.height = std::stoi(val);
            } else if (key == "audio_bitrate") {
                spec.audio_bitrate = std::stol(val);
            } else {
                throw MediaError("unreadable file: " + path);
            }
        } catch (const std::logic_error&) {
            throw MediaError("unreadable file: " + path);
        }
    }
    if (!have_frames || spec.fps <= 0.0 || spec.width < 1 || spec.height < 1)
        throw MediaError("unreadable file: " + path);
    return spec;
}

} // namespace

bool SyntheticDecoder::matches(const std::string& path) { return path.rfind("synthetic:", 0) == 0; }

Rgb SyntheticDecoder::index_fill(long index) {
    return {static_cast<uint8_t>(index % 256), static_cast<uint8_t>((index / 256) % 256),
            static_cast<uint8_t>((index / 65536) % 256)};
}

long SyntheticDecoder::decode_index_fill(Rgb c) {
    return static_cast<long>(c.r) + 256L * c.g + 65536L * c.b;
}

VideoInfo SyntheticDecoder::probe(const std::string& path) {
    SyntheticSpec spec = parse_synthetic(path);
    return {spec.frames, spec.fps, spec.frames / spec.fps, spec.audio_bitrate > 0};
}

Image SyntheticDecoder::decode_frame(const std::string& path, long index) {
    SyntheticSpec spec = parse_synthetic(path);
    if (index < 0 || index >= spec.frames)
        throw MediaError("decode failure at frame " + std::to_string(index));
    return Image(spec.width, spec.height, index_fill(index));
}

std::vector<uint8_t> SyntheticDecoder::extract_audio(
    const std::string& path, const std::vector<std::pair<double, double>>& spans_s,
    long bitrate_bps) {
    SyntheticSpec spec = parse_synthetic(path);
    if (spec.audio_bitrate <= 0) throw MediaError("no audio track: " + path);
    double total_s = 0.0;
    for (const auto& s : spans_s) total_s += std::max(0.0, s.second - s.first);
    auto size = static_cast<size_t>(std::llround(total_s * bitrate_bps / 8.0));
    std::vector<uint8_t> out(size);
    uint64_t x = 0x9E3779B97F4A7C15ull ^ static_cast<uint64_t>(bitrate_bps);
    for (size_t i = 0; i < size; ++i) {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        out[i] = static_cast<uint8_t>(x);
    }
    return out;
}

long SyntheticDecoder::native_audio_bitrate(const std::string& path) {
    return parse_synthetic(path).audio_bitrate;
}

std::string SyntheticDecoder::audio_encoding_tag(long bitrate_bps) const {
    return "synthetic-" + std::to_string(bitrate_bps / 1000) + "k";
}

// ---------------------------------------------------------------------------
// ShellDecoder (ffprobe/ffmpeg subprocesses)

namespace {

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'')
            out += "'\\''";
        else
            out += c;
    }
    out += "'";
    return out;
}

int run_capture(const std::string& cmd, std::vector<uint8_t>& out) {
    out.clear();
    FILE* pipe = popen((cmd + " 2>/dev/null").c_str(), "r");
    if (!pipe) return -1;
    uint8_t buf[65536];
    size_t n;
    while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) out.insert(out.end(), buf, buf + n);
    return pclose(pipe);
}

bool ffmpeg_available() {
    static const bool ok = [] {
        std::vector<uint8_t> sink;
        return run_capture("ffmpeg -version", sink) == 0 && run_capture("ffprobe -version", sink) == 0;
    }();
    return ok;
}

double parse_rate(const std::string& rate) {
    auto slash = rate.find('/');
    if (slash == std::string::npos) return std::stod(rate);
    double num = std::stod(rate.substr(0, slash));
    double den = std::stod(rate.substr(slash + 1));
    return den > 0 ? num / den : 0.0;
}

Image parse_ppm(const std::vector<uint8_t>& bytes) {
    size_t pos = 0;
    auto token = [&]() {
        std::string t;
        while (pos < bytes.size()) {
            char c = static_cast<char>(bytes[pos]);
            if (c == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                if (!t.empty()) break;
                ++pos;
            } else {
                t += c;
                ++pos;
            }
        }
        return t;
    };
    if (token() != "P6") throw MediaError("decoder produced no frame");
    int w = std::stoi(token());
    int h = std::stoi(token());
    int maxval = std::stoi(token());
    ++pos; // single whitespace after header
    if (maxval != 255 || w < 1 || h < 1) throw MediaError("unsupported frame format");
    if (bytes.size() - pos < static_cast<size_t>(w) * h * 3)
        throw MediaError("decoder produced a short frame");
    Image img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            size_t i = pos + (static_cast<size_t>(y) * w + x) * 3;
            img.set(x, y, {bytes[i], bytes[i + 1], bytes[i + 2]});
        }
    return img;
}

} // namespace

VideoInfo ShellDecoder::probe(const std::string& path) {
    std::lock_guard<std::mutex> lock(mu_);
    if (!ffmpeg_available()) throw MediaError("media decoder unavailable (ffmpeg/ffprobe not found)");
    std::vector<uint8_t> out;
    std::string cmd = "ffprobe -v error -print_format json -show_streams -show_format " + shell_quote(path);
    if (run_capture(cmd, out) != 0) throw MediaError("unreadable file: " + path);

    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(out.begin(), out.end());
    } catch (const nlohmann::json::exception&) {
        throw MediaError("unreadable file: " + path);
    }

    VideoInfo info;
    bool have_video = false;
    for (const auto& stream : doc.value("streams", nlohmann::json::array())) {
        std::string type = stream.value("codec_type", "");
        if (type == "video" && !have_video) {
            have_video = true;
            info.fps = parse_rate(stream.value("r_frame_rate", "0/1"));
            if (stream.contains("nb_frames") && stream["nb_frames"].is_string() &&
                stream["nb_frames"] != "N/A")
                info.total_frames = std::stol(stream["nb_frames"].get<std::string>());
        } else if (type == "audio") {
            info.has_audio = true;
        }
    }
    if (!have_video) throw MediaError("no video track: " + path);
    if (doc.contains("format") && doc["format"].contains("duration"))
        info.duration_s = std::stod(doc["format"]["duration"].get<std::string>());
    if (info.total_frames == 0 && info.fps > 0)
        info.total_frames = static_cast<long>(std::llround(info.duration_s * info.fps));
    if (info.total_frames > 0 && info.duration_s == 0.0 && info.fps > 0)
        info.duration_s = info.total_frames / info.fps;
    return info;
}

Image ShellDecoder::decode_frame(const std::string& path, long index) {
    std::lock_guard<std::mutex> lock(mu_);
    if (!ffmpeg_available()) throw MediaError("media decoder unavailable (ffmpeg/ffprobe not found)");
    VideoInfo info;
    {
        // probe() locks mu_, so inline the minimal fps lookup here
        std::vector<uint8_t> out;
        std::string cmd =
            "ffprobe -v error -select_streams v:0 -show_entries stream=r_frame_rate "
            "-print_format json " + shell_quote(path);
        if (run_capture(cmd, out) != 0) throw MediaError("unreadable file: " + path);
        auto doc = nlohmann::json::parse(out.begin(), out.end(), nullptr, false);
        if (doc.is_discarded() || doc["streams"].empty()) throw MediaError("no video track: " + path);
        info.fps = parse_rate(doc["streams"][0].value("r_frame_rate", "0/1"));
    }
    if (info.fps <= 0) throw MediaError("no video track: " + path);
    char ts[64];
    std::snprintf(ts, sizeof(ts), "%.6f", index / info.fps);
    std::vector<uint8_t> out;
    std::string cmd = "ffmpeg -v error -ss " + std::string(ts) + " -i " + shell_quote(path) +
                      " -frames:v 1 -f image2pipe -vcodec ppm -";
    if (run_capture(cmd, out) != 0 || out.empty())
        throw MediaError("decode failure at frame " + std::to_string(index));
    return parse_ppm(out);
}

std::vector<uint8_t> ShellDecoder::extract_audio(
    const std::string& path, const std::vector<std::pair<double, double>>& spans_s,
    long bitrate_bps) {
    std::lock_guard<std::mutex> lock(mu_);
    if (!ffmpeg_available()) throw MediaError("media decoder unavailable (ffmpeg/ffprobe not found)");
    std::vector<uint8_t> all;
    for (const auto& span : spans_s) {
        char a[64], b[64];
        std::snprintf(a, sizeof(a), "%.6f", span.first);
        std::snprintf(b, sizeof(b), "%.6f", span.second);
        std::vector<uint8_t> out;
        std::string cmd = "ffmpeg -v error -ss " + std::string(a) + " -to " + std::string(b) +
                          " -i " + shell_quote(path) + " -vn -b:a " + std::to_string(bitrate_bps) +
                          " -f mp3 -";
        if (run_capture(cmd, out) != 0) throw MediaError("audio extraction failed: " + path);
        all.insert(all.end(), out.begin(), out.end());
    }
    return all;
}

long ShellDecoder::native_audio_bitrate(const std::string&) {
    return 192000; // default mp3 re-encode rate; halved as needed by the cap logic
}

std::string ShellDecoder::audio_encoding_tag(long bitrate_bps) const {
    return "mp3-" + std::to_string(bitrate_bps / 1000) + "k";
}

MediaDecoder& decoder_for(const std::string& path) {
    static SyntheticDecoder synthetic;
    static ShellDecoder shell;
    if (SyntheticDecoder::matches(path)) return synthetic;
    return shell;
}

} // namespace vidqa::media
