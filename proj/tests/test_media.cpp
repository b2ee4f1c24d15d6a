// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>
#include <set>

#include "support.hpp"
#include "vidqa/media.hpp"

using namespace vidqa;
using namespace vidqa::media;

TEST_CASE("synthetic decoder parses its descriptor") {
    SyntheticDecoder dec;
    const auto info = dec.probe("synthetic:frames=1800,fps=30,width=640,height=360");
    CHECK(info.total_frames == 1800);
    CHECK(info.fps == 30.0);
    CHECK(info.duration_s == doctest::Approx(60.0));
    CHECK(info.has_audio); // default bitrate is nonzero

    CHECK_FALSE(dec.probe("synthetic:frames=10,audio_bitrate=0").has_audio);
    CHECK_THROWS_AS(dec.probe("synthetic:fps=30"), MediaError);
    CHECK_THROWS_AS(dec.probe("synthetic:frames=10,bogus=1"), MediaError);
    CHECK_THROWS_AS(dec.probe("synthetic:frames=ten"), MediaError);
    CHECK_THROWS_AS(dec.probe("/no/such/file.mp4"), MediaError);
}

TEST_CASE("synthetic frames encode their index as a solid fill") {
    SyntheticDecoder dec;
    const std::string path = "synthetic:frames=70000,width=64,height=48";
    for (long idx : {0L, 255L, 256L, 65536L, 69999L}) {
        const Image img = dec.decode_frame(path, idx);
        CHECK(img.width() == 64);
        CHECK(SyntheticDecoder::decode_index_fill(img.at(10, 10)) == idx);
    }
    CHECK_THROWS_AS(dec.decode_frame(path, 70000), MediaError);
    CHECK_THROWS_AS(dec.decode_frame(path, -1), MediaError);
}

TEST_CASE("synthetic audio size follows duration and bitrate") {
    SyntheticDecoder dec;
    const std::string path = "synthetic:frames=240,fps=24,audio_bitrate=128000";
    const auto data = dec.extract_audio(path, {{0.0, 4.0}}, 128000);
    CHECK(data.size() == 64000); // 4 s * 128000 bps / 8
    CHECK(dec.native_audio_bitrate(path) == 128000);
    CHECK(dec.audio_encoding_tag(128000) == "synthetic-128k");
}

TEST_CASE("probe_video validates stream metadata") {
    SyntheticDecoder dec;
    const auto h = probe_video(dec, "synthetic:frames=240,fps=24");
    CHECK(h.total_frames == 240);
    CHECK(h.duration_s == doctest::Approx(10.0));
    CHECK_THROWS_AS(probe_video(dec, "synthetic:frames=0"), MediaError);
}

TEST_CASE("range validation distinguishes the two malformed shapes") {
    CHECK_NOTHROW(validate_range({0, 0}));
    CHECK_NOTHROW(validate_range({5, 900}));
    CHECK_THROWS_WITH_AS(validate_range({-1, 5}),
                         doctest::Contains("negative start"), ValidationError);
    CHECK_THROWS_WITH_AS(validate_range({6, 5}),
                         doctest::Contains("start > end"), ValidationError);
}

TEST_CASE("proportional allocation matches the selection oracle") {
    std::mt19937_64 rng(20240817);
    for (int iter = 0; iter < 1000; ++iter) {
        const size_t nranges = 1 + rng() % 6;
        std::vector<FrameRange> ranges;
        for (size_t i = 0; i < nranges; ++i) {
            const long start = static_cast<long>(rng() % 5000);
            const long len = 1 + static_cast<long>(rng() % 2000);
            ranges.push_back({start, start + len - 1});
        }
        const long n = 1 + static_cast<long>(rng() % 200);
        CAPTURE(iter);

        const auto got = allocate_across_ranges(ranges, n);
        const auto want = testsupport::allocation_oracle(ranges, n);
        REQUIRE(got == want);

        long total_len = 0;
        for (const auto& r : ranges) {
            total_len += r.length();
        }
        long sum = 0;
        for (size_t i = 0; i < got.size(); ++i) {
            sum += got[i];
            const long lo = n * ranges[i].length() / total_len;
            REQUIRE(got[i] >= lo);
            REQUIRE(got[i] <= lo + 1);
        }
        REQUIRE(sum == n);
    }
}

TEST_CASE("allocation hands remainder ties to the earlier range") {
    // Two equal-length ranges, odd n: remainders tie, the first range wins.
    const auto counts = allocate_across_ranges({{0, 9}, {100, 109}}, 5);
    CHECK(counts == std::vector<long>{3, 2});
    CHECK_THROWS_AS(allocate_across_ranges({}, 5), ValidationError);
    CHECK_THROWS_AS(allocate_across_ranges({{0, 9}}, 0), ValidationError);
}

TEST_CASE("uniform sampling matches the closed-form oracle") {
    CHECK(uniform_sample_indices({0, 59}, 6) ==
          std::vector<long>{0, 12, 24, 35, 47, 59});

    std::mt19937_64 rng(77123);
    for (int iter = 0; iter < 2000; ++iter) {
        const long start = static_cast<long>(rng() % 10000);
        const long len = 1 + static_cast<long>(rng() % 4000);
        const long k = 1 + static_cast<long>(rng() % 200);
        const FrameRange range{start, start + len - 1};
        CAPTURE(iter);

        const auto got = uniform_sample_indices(range, k);
        REQUIRE(got == testsupport::sampling_oracle(range, k));
        REQUIRE(got.front() == range.start_frame);
        REQUIRE(got.back() == (k == 1 ? range.start_frame : range.end_frame));
        for (size_t i = 1; i < got.size(); ++i) {
            REQUIRE(got[i] > got[i - 1]);
        }
    }

    SUBCASE("short ranges yield every frame") {
        CHECK(uniform_sample_indices({10, 12}, 30) ==
              std::vector<long>{10, 11, 12});
    }
    SUBCASE("k = 1 yields the start frame") {
        CHECK(uniform_sample_indices({7, 90}, 1) == std::vector<long>{7});
    }
    SUBCASE("invalid inputs are rejected") {
        CHECK_THROWS_AS(uniform_sample_indices({0, 59}, 0), ValidationError);
        CHECK_THROWS_AS(uniform_sample_indices({9, 5}, 3), ValidationError);
    }
}

TEST_CASE("extract_frames resizes to the requested short edge") {
    SyntheticDecoder dec;
    const auto handle = probe_video(dec, "synthetic:frames=100,width=640,height=360");
    const auto frames = extract_frames(dec, handle, {0, 42, 99}, kShortEdgeCoarse);
    REQUIRE(frames.size() == 3);
    CHECK(frames[1].global_index == 42);
    CHECK(frames[1].pixels->height() == 256);
    CHECK(frames[1].short_edge_px == 256);
    CHECK(SyntheticDecoder::decode_index_fill(frames[1].pixels->at(100, 100)) == 42);

    CHECK_THROWS_AS(extract_frames(dec, handle, {100}, kShortEdgeCoarse), MediaError);
    CHECK_THROWS_AS(extract_frames(dec, handle, {0}, 300), MediaError);
}

TEST_CASE("overlay_index stamps a readable global index") {
    SyntheticDecoder dec;
    const auto handle = probe_video(dec, "synthetic:frames=2000,width=640,height=360");
    auto frames = extract_frames(dec, handle, {1905}, kShortEdgeCoarse);
    const auto stamped = overlay_index(frames[0]);
    const int scale = stamp_scale_for(256);
    CHECK(testsupport::decode_stamp(*stamped.pixels, 4, 4, scale) == "1905");
    // The original frame is untouched (copy-on-stamp).
    CHECK(testsupport::decode_stamp(*frames[0].pixels, 4, 4, scale).empty());
}

TEST_CASE("mosaics hold up to six frames in a 3x2 row-major grid") {
    SyntheticDecoder dec;
    const auto handle = probe_video(dec, "synthetic:frames=100,width=640,height=360");

    for (long n : {1L, 5L, 6L, 7L, 13L}) {
        CAPTURE(n);
        std::vector<long> indices;
        for (long i = 0; i < n; ++i) {
            indices.push_back(i * 7 % 100);
        }
        auto frames = extract_frames(dec, handle, indices, kShortEdgeCoarse);
        for (auto& f : frames) {
            f = overlay_index(f);
        }
        const auto grids = compose_mosaics(frames);
        REQUIRE(grids.size() == static_cast<size_t>((n + 5) / 6));

        const int cell_w = frames[0].pixels->width();
        const int cell_h = frames[0].pixels->height();
        size_t fi = 0;
        for (const auto& grid : grids) {
            CHECK(grid.canvas->width() == cell_w * kMosaicCols);
            CHECK(grid.canvas->height() == cell_h * kMosaicRows);
            for (size_t cell = 0; cell < grid.member_indices.size(); ++cell, ++fi) {
                CHECK(grid.member_indices[cell] == indices[fi]);
                const int cx = static_cast<int>(cell % 3) * cell_w;
                const int cy = static_cast<int>(cell / 3) * cell_h;
                // Cell content: the index fill away from the stamp...
                CHECK(SyntheticDecoder::decode_index_fill(
                          grid.canvas->at(cx + cell_w - 5, cy + cell_h - 5)) ==
                      indices[fi]);
                // ...and the stamped label at the cell's top-left corner.
                CHECK(testsupport::decode_stamp(*grid.canvas, cx + 4, cy + 4,
                                                stamp_scale_for(256)) ==
                      std::to_string(indices[fi]));
            }
        }
        // Unfilled trailing cells stay black.
        if (n % 6 != 0) {
            const auto& last = grids.back();
            const int cx = static_cast<int>(n % 6 % 3) * cell_w;
            const int cy = static_cast<int>(n % 6 / 3) * cell_h;
            CHECK(last.canvas->at(cx + 10, cy + 10) == Rgb{0, 0, 0});
        }
    }
    CHECK_THROWS_AS(compose_mosaics({}), MediaError);
}

TEST_CASE("grid count is ceil(n/6) across the whole supported span") {
    SyntheticDecoder dec;
    const auto handle = probe_video(dec, "synthetic:frames=400,width=48,height=32");
    for (long n = 1; n <= 300; ++n) {
        std::vector<long> indices(static_cast<size_t>(n));
        for (long i = 0; i < n; ++i) {
            indices[static_cast<size_t>(i)] = i;
        }
        auto frames = extract_frames(dec, handle, indices, kShortEdgeCoarse);
        REQUIRE(compose_mosaics(frames).size() ==
                static_cast<size_t>((n + 5) / 6));
    }
}

TEST_CASE("audio extraction concatenates the requested spans") {
    SyntheticDecoder dec;
    const auto handle =
        probe_video(dec, "synthetic:frames=2400,fps=24,audio_bitrate=64000");
    const auto seg = extract_audio(dec, handle, {{0, 239}, {480, 719}});
    REQUIRE(seg.spans_s.size() == 2);
    CHECK(seg.spans_s[0].first == doctest::Approx(0.0));
    CHECK(seg.spans_s[0].second == doctest::Approx(10.0));
    CHECK(seg.spans_s[1].first == doctest::Approx(20.0));
    CHECK(seg.spans_s[1].second == doctest::Approx(30.0));
    CHECK(seg.data.size() == 160000); // 20 s at 64 kbps
    CHECK_FALSE(seg.truncated);
    CHECK(seg.encoding == "synthetic-64k");

    CHECK_THROWS_AS(extract_audio(dec, handle, {}), ValidationError);
    const auto no_audio = probe_video(dec, "synthetic:frames=2400,fps=24,audio_bitrate=0");
    CHECK_THROWS_AS(extract_audio(dec, no_audio, {{0, 10}}), MediaError);
}

TEST_CASE("oversized audio is re-encoded downward before being truncated") {
    SyntheticDecoder dec;
    // 1 hour at 256 kbps is ~115 MB; halving down to 32 kbps fits the cap
    // (64 kbps would still be 28.8 MB).
    const auto handle = probe_video(
        dec, "synthetic:frames=86400,fps=24,audio_bitrate=256000");
    const auto seg = extract_audio(dec, handle, {{0, 86399}});
    CHECK(seg.data.size() <= kAudioByteCap);
    CHECK_FALSE(seg.truncated);
    CHECK(seg.encoding == "synthetic-32k");
    CHECK(seg.spans_s.size() == 1);
    CHECK(seg.spans_s[0].second == doctest::Approx(3600.0));
}

TEST_CASE("audio that cannot be re-encoded small enough is tail-truncated") {
    SyntheticDecoder dec;
    // 2 hours at the 32 kbps floor is ~28.8 MB: no further halving possible,
    // so the tail must be cut and flagged.
    const auto handle = probe_video(
        dec, "synthetic:frames=172800,fps=24,audio_bitrate=32000");
    const auto seg = extract_audio(dec, handle, {{0, 172799}});
    CHECK(seg.truncated);
    CHECK(seg.data.size() <= kAudioByteCap);
    CHECK(seg.spans_s.size() == 1);
    CHECK(seg.spans_s[0].first == doctest::Approx(0.0));
    CHECK(seg.spans_s[0].second < 7200.0);
    // The requested ranges stay on the segment even when trimmed.
    CHECK(seg.ranges == std::vector<FrameRange>{{0, 172799}});
}

TEST_CASE("decoder_for routes synthetic paths to the synthetic adapter") {
    auto& dec = decoder_for("synthetic:frames=10");
    CHECK_NOTHROW(dec.probe("synthetic:frames=10"));
    CHECK(SyntheticDecoder::matches("synthetic:frames=10"));
    CHECK_FALSE(SyntheticDecoder::matches("/data/video.mp4"));
}
