// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vidqa/errors.hpp"
#include "vidqa/image.hpp"

namespace vidqa::media {

/// Hard cap on audio payloads handed to the transcription backend.
constexpr uint64_t kAudioByteCap = 25ull * 1024 * 1024;

/// Frame short edges used by the two visual pipelines.
constexpr int kShortEdgeCoarse = 256;
constexpr int kShortEdgeFine = 512;

/// Mosaic layout: 3 columns x 2 rows, row-major.
constexpr int kMosaicCols = 3;
constexpr int kMosaicRows = 2;
constexpr int kMosaicCapacity = kMosaicCols * kMosaicRows;

struct VideoHandle {
    std::string path;
    long total_frames = 0;
    double fps = 0.0;
    double duration_s = 0.0;
    bool has_audio = false;
};

/// Inclusive global frame interval [start_frame, end_frame].
struct FrameRange {
    long start_frame = 0;
    long end_frame = 0;

    long length() const { return end_frame - start_frame + 1; }
    bool operator==(const FrameRange&) const = default;
};

struct FrameImage {
    long global_index = 0;
    ImagePtr pixels;
    int short_edge_px = 0;
};

struct MosaicGrid {
    ImagePtr canvas;
    std::vector<long> member_indices; // row-major, <= 6 entries
    std::shared_ptr<const std::vector<uint8_t>> png; // encoded once at compose
    std::string digest;                               // canvas content digest
};

struct AudioSegment {
    std::vector<FrameRange> ranges;
    std::vector<std::pair<double, double>> spans_s; // per-range [start, end) seconds
    std::vector<uint8_t> data;
    std::string encoding;
    bool truncated = false;

    uint64_t byte_size() const { return data.size(); }
};

struct VideoInfo {
    long total_frames = 0;
    double fps = 0.0;
    double duration_s = 0.0;
    bool has_audio = false;
};

/// Decoding is kept behind this interface so the engine core stays
/// deterministic and testable without real media files. One instance
/// serializes access to its underlying process/file state.
class MediaDecoder {
public:
    virtual ~MediaDecoder() = default;

    virtual VideoInfo probe(const std::string& path) = 0;

    /// Decode one frame at native resolution.
    virtual Image decode_frame(const std::string& path, long index) = 0;

    /// Encode audio covering the given second spans at the requested
    /// bitrate; returns the full encoded payload.
    virtual std::vector<uint8_t> extract_audio(const std::string& path,
                                               const std::vector<std::pair<double, double>>& spans_s,
                                               long bitrate_bps) = 0;

    virtual long native_audio_bitrate(const std::string& path) = 0;
    virtual std::string audio_encoding_tag(long bitrate_bps) const = 0;
};

/// Procedural video source for tests and offline runs. Paths look like
///   synthetic:frames=1800,fps=30,width=640,height=360,audio_bitrate=256000
/// Frame pixels encode the frame index (solid fill, so any resample
/// preserves the encoded value): r=idx%256, g=(idx/256)%256, b=(idx/65536)%256.
/// Use audio_bitrate=0 for a video without an audio track.
class SyntheticDecoder : public MediaDecoder {
public:
    VideoInfo probe(const std::string& path) override;
    Image decode_frame(const std::string& path, long index) override;
    std::vector<uint8_t> extract_audio(const std::string& path,
                                       const std::vector<std::pair<double, double>>& spans_s,
                                       long bitrate_bps) override;
    long native_audio_bitrate(const std::string& path) override;
    std::string audio_encoding_tag(long bitrate_bps) const override;

    static bool matches(const std::string& path);
    static Rgb index_fill(long index);
    static long decode_index_fill(Rgb c);
};

/// Shells out to ffprobe/ffmpeg. Errors with "media decoder unavailable"
/// when the binaries are missing.
class ShellDecoder : public MediaDecoder {
public:
    VideoInfo probe(const std::string& path) override;
    Image decode_frame(const std::string& path, long index) override;
    std::vector<uint8_t> extract_audio(const std::string& path,
                                       const std::vector<std::pair<double, double>>& spans_s,
                                       long bitrate_bps) override;
    long native_audio_bitrate(const std::string& path) override;
    std::string audio_encoding_tag(long bitrate_bps) const override;

private:
    std::mutex mu_;
};

/// Pick the adapter for a path (synthetic: scheme vs. real file).
MediaDecoder& decoder_for(const std::string& path);

VideoHandle probe_video(MediaDecoder& decoder, const std::string& path);

/// Split n frames across ranges proportionally to range length using
/// largest-remainder rounding; ties go to the earlier range.
std::vector<long> allocate_across_ranges(const std::vector<FrameRange>& ranges, long n);

/// Endpoint-inclusive uniform sampling: round(start + i*(len-1)/(k-1)),
/// half-up, deduplicated ascending. Ranges shorter than k yield every frame.
std::vector<long> uniform_sample_indices(const FrameRange& range, long k);

/// Decode + resize; short_edge must be 256 or 512. Does not stamp.
std::vector<FrameImage> extract_frames(MediaDecoder& decoder, const VideoHandle& handle,
                                       const std::vector<long>& indices, int short_edge);

/// Stamp the frame's global index in white at the top-left. Callers stamp
/// exactly once; a second application adds a second stamp.
FrameImage overlay_index(const FrameImage& frame);

/// Pack frames into ceil(n/6) row-major 3x2 grids on a shared black canvas;
/// only the final grid may be partial.
std::vector<MosaicGrid> compose_mosaics(const std::vector<FrameImage>& frames);

/// Concatenated audio for the ranges, re-encoded stepwise down and finally
/// tail-truncated (flagged) if needed to stay within kAudioByteCap.
AudioSegment extract_audio(MediaDecoder& decoder, const VideoHandle& handle,
                           const std::vector<FrameRange>& ranges);

void validate_range(const FrameRange& r);

} // namespace vidqa::media
