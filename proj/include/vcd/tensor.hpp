// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace vcd {

struct Shape {
    std::size_t frames = 1;
    std::size_t channels = 1;
    std::size_t height = 1;
    std::size_t width = 1;

    std::size_t numel() const { return frames * channels * height * width; }
    std::size_t frame_size() const { return channels * height * width; }
    std::size_t plane_size() const { return height * width; }
    bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

/// Rank-4 array of doubles in frame -> channel -> row -> column order.
///
/// Holds latents, noise fields and decoded frames alike. Values are kept
/// finite: constructors that take external data reject NaN and infinity.
class VideoTensor {
public:
    VideoTensor() = default;

    /// Zero-filled tensor. Every dimension must be at least 1.
    explicit VideoTensor(Shape shape);
    VideoTensor(Shape shape, double fill);
    VideoTensor(Shape shape, std::vector<double> data);

    const Shape& shape() const { return m_shape; }
    std::size_t frames() const { return m_shape.frames; }
    std::size_t channels() const { return m_shape.channels; }
    std::size_t height() const { return m_shape.height; }
    std::size_t width() const { return m_shape.width; }
    std::size_t numel() const { return m_data.size(); }
    bool empty() const { return m_data.empty(); }

    std::size_t index(std::size_t f, std::size_t c, std::size_t y, std::size_t x) const {
        return ((f * m_shape.channels + c) * m_shape.height + y) * m_shape.width + x;
    }
    double& at(std::size_t f, std::size_t c, std::size_t y, std::size_t x) { return m_data[index(f, c, y, x)]; }
    double at(std::size_t f, std::size_t c, std::size_t y, std::size_t x) const { return m_data[index(f, c, y, x)]; }

    std::span<double> data() { return m_data; }
    std::span<const double> data() const { return m_data; }
    std::span<double> frame(std::size_t f);
    std::span<const double> frame(std::size_t f) const;

    /// Copy of frame range [first, first + count).
    VideoTensor frames_slice(std::size_t first, std::size_t count) const;

    bool all_finite() const;

    friend bool operator==(const VideoTensor& a, const VideoTensor& b) {
        return a.m_shape == b.m_shape && a.m_data == b.m_data;
    }

private:
    Shape m_shape{0, 0, 0, 0};
    std::vector<double> m_data;
};

/// Stacks single-or-multi frame tensors of identical c/h/w along the frame axis.
VideoTensor concat_frames(std::span<const VideoTensor> parts);

/// Sentinel frame index meaning "every frame of the tensor".
inline constexpr std::size_t kAllFrames = std::numeric_limits<std::size_t>::max();

/// Half-open pixel box [x0, x1) x [y0, y1) on one frame, or on every frame
/// when `frame == kAllFrames`.
struct BBox {
    std::size_t frame = kAllFrames;
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    bool valid_in(std::size_t h, std::size_t w) const {
        return x0 >= 0 && y0 >= 0 && x0 < x1 && y0 < y1 && x1 <= static_cast<int>(w) && y1 <= static_cast<int>(h);
    }
    bool operator==(const BBox&) const = default;
};

std::string to_string(const BBox& b);

/// Per-frame binary mask over an h x w grid.
class RegionMask {
public:
    RegionMask() = default;
    RegionMask(std::size_t frames, std::size_t height, std::size_t width);
    RegionMask(std::size_t frames, std::size_t height, std::size_t width, std::vector<std::uint8_t> bits);

    static RegionMask full(std::size_t frames, std::size_t height, std::size_t width);

    std::size_t frames() const { return m_frames; }
    std::size_t height() const { return m_height; }
    std::size_t width() const { return m_width; }

    bool at(std::size_t f, std::size_t y, std::size_t x) const {
        return m_bits[(f * m_height + y) * m_width + x] != 0;
    }
    void set(std::size_t f, std::size_t y, std::size_t x, bool on) {
        m_bits[(f * m_height + y) * m_width + x] = on ? 1 : 0;
    }

    std::size_t count() const;
    std::size_t count(std::size_t f) const;
    std::span<const std::uint8_t> bits() const { return m_bits; }

    bool operator==(const RegionMask&) const = default;

private:
    std::size_t m_frames = 0;
    std::size_t m_height = 0;
    std::size_t m_width = 0;
    std::vector<std::uint8_t> m_bits;
};

}  // namespace vcd
