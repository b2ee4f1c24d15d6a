// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace vidqa {

struct Rgb {
    uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

/// Plain interleaved RGB8 raster. All pixel operations are deterministic
/// across platforms, which matters for replayable traces and digest keying.
class Image {
public:
    Image() = default;
    Image(int width, int height, Rgb fill = {0, 0, 0});

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return width_ == 0 || height_ == 0; }

    Rgb at(int x, int y) const {
        const size_t i = (static_cast<size_t>(y) * width_ + x) * 3;
        return {data_[i], data_[i + 1], data_[i + 2]};
    }
    void set(int x, int y, Rgb c) {
        const size_t i = (static_cast<size_t>(y) * width_ + x) * 3;
        data_[i] = c.r;
        data_[i + 1] = c.g;
        data_[i + 2] = c.b;
    }
    void fill(Rgb c);

    const std::vector<uint8_t>& bytes() const { return data_; }
    std::vector<uint8_t>& mutable_bytes() { return data_; }

    /// FNV-1a 64-bit over dimensions + raw pixels, as a 16-char hex string.
    std::string digest() const;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<uint8_t> data_; // width*height*3, row-major
};

using ImagePtr = std::shared_ptr<const Image>;

/// Bilinear resample to exactly width x height.
Image resize(const Image& src, int width, int height);

/// Resize preserving aspect ratio so min(width, height) == short_edge.
Image resize_short_edge(const Image& src, int short_edge);

/// Copy src into dst with its top-left corner at (x, y); clips at borders.
void blit(Image& dst, const Image& src, int x, int y);

/// Rows of the 5x7 digit font, one bitmask byte per row (bit 4 = leftmost
/// column). Exposed so tests can template-match stamped labels.
const std::array<uint8_t, 7>& digit_glyph(int digit);

/// Integer glyph scale used for a given frame short edge (label height is
/// about 8% of the short edge).
int stamp_scale_for(int short_edge);

/// Draw `text` (digits only) in white with a 2 px black outline, top-left
/// corner of the glyph block at (x, y). Out-of-bounds pixels are clipped.
void stamp_digits(Image& img, const std::string& text, int x, int y, int scale);

/// Encode as an 8-bit RGB PNG (zlib-compressed, filter 0).
std::vector<uint8_t> encode_png(const Image& img);

/// FNV-1a 64-bit of an arbitrary byte string, as 16 hex chars.
std::string fnv1a_hex(const void* data, size_t len);
std::string fnv1a_hex(const std::string& s);

} // namespace vidqa
