// SPDX-License-Identifier: Apache-2.0
#include "vidqa/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include <zlib.h>

namespace vidqa {

Image::Image(int width, int height, Rgb c) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw std::invalid_argument("negative image dimensions");
    data_.assign(static_cast<size_t>(width) * height * 3, 0);
    if (c.r || c.g || c.b) fill(c);
}

void Image::fill(Rgb c) {
    for (size_t i = 0; i + 2 < data_.size(); i += 3) {
        data_[i] = c.r;
        data_[i + 1] = c.g;
        data_[i + 2] = c.b;
    }
}

std::string Image::digest() const {
    std::string header = std::to_string(width_) + "x" + std::to_string(height_) + ":";
    uint64_t h = 14695981039346656037ULL;
    auto mix = [&h](const uint8_t* p, size_t n) {
        for (size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ULL;
        }
    };
    mix(reinterpret_cast<const uint8_t*>(header.data()), header.size());
    mix(data_.data(), data_.size());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Image resize(const Image& src, int width, int height) {
    if (src.empty() || width <= 0 || height <= 0)
        throw std::invalid_argument("resize on empty image or nonpositive target");
    Image dst(width, height);

    // A single-color source resizes to the same color everywhere, and flat
    // frames are common enough (title cards, black leaders) that one scan of
    // the source pays for itself.
    {
        const std::vector<uint8_t>& px = src.bytes();
        bool uniform = true;
        for (size_t i = 3; i < px.size(); i += 3) {
            if (px[i] != px[0] || px[i + 1] != px[1] || px[i + 2] != px[2]) {
                uniform = false;
                break;
            }
        }
        if (uniform) {
            dst.fill({px[0], px[1], px[2]});
            return dst;
        }
    }

    // Bilinear sampling with 16-bit fixed-point weights. The source taps and
    // column weights only depend on x, so they are precomputed once.
    struct Tap {
        int lo = 0;
        int hi = 0;
        int64_t w = 0; // weight of hi in [0, 65536]
    };
    const auto taps_for = [](int src_n, int dst_n) {
        std::vector<Tap> taps(static_cast<size_t>(dst_n));
        const double scale = static_cast<double>(src_n) / dst_n;
        for (int i = 0; i < dst_n; ++i) {
            const double f = (i + 0.5) * scale - 0.5;
            int lo = static_cast<int>(std::floor(f));
            const double frac = f - lo;
            Tap& t = taps[static_cast<size_t>(i)];
            t.hi = std::min(lo + 1, src_n - 1);
            t.lo = std::clamp(lo, 0, src_n - 1);
            t.w = std::llround(frac * 65536.0);
        }
        return taps;
    };
    const std::vector<Tap> cols = taps_for(src.width(), width);
    const std::vector<Tap> rows = taps_for(src.height(), height);

    for (int y = 0; y < height; ++y) {
        const Tap& ry = rows[static_cast<size_t>(y)];
        for (int x = 0; x < width; ++x) {
            const Tap& cx = cols[static_cast<size_t>(x)];
            const Rgb p00 = src.at(cx.lo, ry.lo), p10 = src.at(cx.hi, ry.lo);
            const Rgb p01 = src.at(cx.lo, ry.hi), p11 = src.at(cx.hi, ry.hi);
            if (p00 == p10 && p00 == p01 && p00 == p11) {
                dst.set(x, y, p00);
                continue;
            }
            const auto lerp = [&](uint8_t a, uint8_t b, uint8_t c, uint8_t d) {
                const int64_t top = a * (65536 - cx.w) + b * cx.w;
                const int64_t bot = c * (65536 - cx.w) + d * cx.w;
                const int64_t v = top * (65536 - ry.w) + bot * ry.w;
                return static_cast<uint8_t>((v + (int64_t{1} << 31)) >> 32);
            };
            dst.set(x, y, {lerp(p00.r, p10.r, p01.r, p11.r),
                           lerp(p00.g, p10.g, p01.g, p11.g),
                           lerp(p00.b, p10.b, p01.b, p11.b)});
        }
    }
    return dst;
}

Image resize_short_edge(const Image& src, int short_edge) {
    if (src.empty()) throw std::invalid_argument("resize_short_edge on empty image");
    int w = src.width(), h = src.height();
    if (w <= h) {
        int nh = static_cast<int>(std::lround(static_cast<double>(h) * short_edge / w));
        return resize(src, short_edge, std::max(nh, short_edge));
    }
    int nw = static_cast<int>(std::lround(static_cast<double>(w) * short_edge / h));
    return resize(src, std::max(nw, short_edge), short_edge);
}

void blit(Image& dst, const Image& src, int x, int y) {
    int x0 = std::max(0, -x), y0 = std::max(0, -y);
    int x1 = std::min(src.width(), dst.width() - x);
    int y1 = std::min(src.height(), dst.height() - y);
    if (x1 <= x0 || y1 <= y0) return;
    const size_t row_bytes = static_cast<size_t>(x1 - x0) * 3;
    const uint8_t* sp = src.bytes().data();
    uint8_t* dp = dst.mutable_bytes().data();
    for (int sy = y0; sy < y1; ++sy) {
        const size_t si = (static_cast<size_t>(sy) * src.width() + x0) * 3;
        const size_t di =
            (static_cast<size_t>(y + sy) * dst.width() + (x + x0)) * 3;
        std::memcpy(dp + di, sp + si, row_bytes);
    }
}

namespace {

// 5x7 digit glyphs; bit 4 is the leftmost column.
constexpr std::array<std::array<uint8_t, 7>, 10> kDigitFont = {{
    {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}, // 0
    {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}, // 1
    {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}, // 2
    {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}, // 3
    {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}, // 4
    {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}, // 5
    {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}, // 6
    {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}, // 7
    {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}, // 8
    {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}, // 9
}};

void paint_glyph_pixels(Image& img, const std::string& text, int x, int y, int scale,
                        int pad, Rgb color) {
    for (size_t ci = 0; ci < text.size(); ++ci) {
        if (text[ci] < '0' || text[ci] > '9') continue;
        const auto& glyph = kDigitFont[text[ci] - '0'];
        int gx = x + static_cast<int>(ci) * 6 * scale;
        for (int row = 0; row < 7; ++row) {
            for (int col = 0; col < 5; ++col) {
                if (!(glyph[row] & (1 << (4 - col)))) continue;
                int px0 = gx + col * scale - pad;
                int py0 = y + row * scale - pad;
                int px1 = gx + (col + 1) * scale + pad;
                int py1 = y + (row + 1) * scale + pad;
                for (int py = std::max(0, py0); py < std::min(img.height(), py1); ++py)
                    for (int px = std::max(0, px0); px < std::min(img.width(), px1); ++px)
                        img.set(px, py, color);
            }
        }
    }
}

} // namespace

const std::array<uint8_t, 7>& digit_glyph(int digit) {
    return kDigitFont.at(static_cast<size_t>(digit));
}

int stamp_scale_for(int short_edge) {
    // Target glyph height: ~8% of the short edge, 7 rows per glyph.
    return std::max(1, static_cast<int>(std::lround(0.08 * short_edge / 7.0)));
}

void stamp_digits(Image& img, const std::string& text, int x, int y, int scale) {
    if (img.empty() || scale < 1) return;
    paint_glyph_pixels(img, text, x, y, scale, 2, {0, 0, 0});        // outline
    paint_glyph_pixels(img, text, x, y, scale, 0, {255, 255, 255});  // face
}

namespace {

void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

void put_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& body) {
    put_u32_be(out, static_cast<uint32_t>(body.size()));
    size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), body.begin(), body.end());
    uLong crc = crc32(0L, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
    put_u32_be(out, static_cast<uint32_t>(crc));
}

} // namespace

std::vector<uint8_t> encode_png(const Image& img) {
    if (img.empty()) throw std::invalid_argument("encode_png on empty image");
    std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};

    std::vector<uint8_t> ihdr;
    put_u32_be(ihdr, static_cast<uint32_t>(img.width()));
    put_u32_be(ihdr, static_cast<uint32_t>(img.height()));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // color type: truecolor
    ihdr.push_back(0);  // compression
    ihdr.push_back(0);  // filter
    ihdr.push_back(0);  // interlace
    put_chunk(out, "IHDR", ihdr);

    // Filter byte 0 in front of every scanline.
    const auto& px = img.bytes();
    size_t stride = static_cast<size_t>(img.width()) * 3;
    std::vector<uint8_t> raw;
    raw.reserve((stride + 1) * img.height());
    for (int y = 0; y < img.height(); ++y) {
        raw.push_back(0);
        raw.insert(raw.end(), px.begin() + y * stride, px.begin() + (y + 1) * stride);
    }

    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> idat(bound);
    // Prompt building re-encodes every long-term mosaic each step, so encode
    // speed dominates the agent loop; Z_BEST_SPEED keeps that cheap.
    if (compress2(idat.data(), &bound, raw.data(), static_cast<uLong>(raw.size()),
                  Z_BEST_SPEED) != Z_OK)
        throw std::runtime_error("png compression failed");
    idat.resize(bound);
    put_chunk(out, "IDAT", idat);
    put_chunk(out, "IEND", {});
    return out;
}

std::string fnv1a_hex(const void* data, size_t len) {
    const auto* p = static_cast<const uint8_t*>(data);
    uint64_t h = 14695981039346656037ULL;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string fnv1a_hex(const std::string& s) { return fnv1a_hex(s.data(), s.size()); }

} // namespace vidqa
