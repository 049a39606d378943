// SPDX-License-Identifier: Apache-2.0

#include "vcd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace vcd {

std::string to_string(const Shape& s) {
    std::ostringstream os;
    os << "(" << s.frames << ", " << s.channels << ", " << s.height << ", " << s.width << ")";
    return os.str();
}

std::string to_string(const BBox& b) {
    std::ostringstream os;
    os << "[";
    if (b.frame == kAllFrames)
        os << "*";
    else
        os << b.frame;
    os << ": " << b.x0 << "," << b.y0 << " -> " << b.x1 << "," << b.y1 << "]";
    return os.str();
}

namespace {

void check_shape(const Shape& s) {
    if (s.frames == 0 || s.channels == 0 || s.height == 0 || s.width == 0)
        throw std::invalid_argument("zero-sized tensor shape " + to_string(s));
}

}  // namespace

VideoTensor::VideoTensor(Shape shape) : VideoTensor(shape, 0.0) {}

VideoTensor::VideoTensor(Shape shape, double fill) : m_shape(shape) {
    check_shape(shape);
    if (!std::isfinite(fill))
        throw std::invalid_argument("non-finite fill value");
    m_data.assign(shape.numel(), fill);
}

VideoTensor::VideoTensor(Shape shape, std::vector<double> data) : m_shape(shape), m_data(std::move(data)) {
    check_shape(shape);
    if (m_data.size() != shape.numel())
        throw std::invalid_argument("data length " + std::to_string(m_data.size()) + " does not match shape " +
                                    to_string(shape));
    if (!all_finite())
        throw std::invalid_argument("tensor data contains non-finite values");
}

std::span<double> VideoTensor::frame(std::size_t f) {
    return std::span<double>(m_data).subspan(f * m_shape.frame_size(), m_shape.frame_size());
}

std::span<const double> VideoTensor::frame(std::size_t f) const {
    return std::span<const double>(m_data).subspan(f * m_shape.frame_size(), m_shape.frame_size());
}

VideoTensor VideoTensor::frames_slice(std::size_t first, std::size_t count) const {
    if (count == 0 || first + count > m_shape.frames)
        throw std::out_of_range("frame slice out of range");
    Shape s = m_shape;
    s.frames = count;
    auto begin = m_data.begin() + static_cast<std::ptrdiff_t>(first * m_shape.frame_size());
    return VideoTensor(s, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(s.numel())));
}

bool VideoTensor::all_finite() const {
    return std::all_of(m_data.begin(), m_data.end(), [](double v) { return std::isfinite(v); });
}

VideoTensor concat_frames(std::span<const VideoTensor> parts) {
    if (parts.empty())
        throw std::invalid_argument("concat_frames: no parts");
    Shape s = parts.front().shape();
    s.frames = 0;
    std::vector<double> data;
    for (const auto& p : parts) {
        if (p.channels() != s.channels || p.height() != s.height || p.width() != s.width)
            throw std::invalid_argument("concat_frames: mismatched frame shape " + to_string(p.shape()));
        s.frames += p.frames();
        data.insert(data.end(), p.data().begin(), p.data().end());
    }
    return VideoTensor(s, std::move(data));
}

RegionMask::RegionMask(std::size_t frames, std::size_t height, std::size_t width)
    : m_frames(frames), m_height(height), m_width(width), m_bits(frames * height * width, 0) {
    if (frames == 0 || height == 0 || width == 0)
        throw std::invalid_argument("zero-sized mask");
}

RegionMask::RegionMask(std::size_t frames, std::size_t height, std::size_t width, std::vector<std::uint8_t> bits)
    : m_frames(frames), m_height(height), m_width(width), m_bits(std::move(bits)) {
    if (frames == 0 || height == 0 || width == 0)
        throw std::invalid_argument("zero-sized mask");
    if (m_bits.size() != frames * height * width)
        throw std::invalid_argument("mask data length does not match its shape");
    for (auto& b : m_bits) {
        if (b > 1)
            throw std::invalid_argument("mask values must be 0 or 1");
    }
}

RegionMask RegionMask::full(std::size_t frames, std::size_t height, std::size_t width) {
    return RegionMask(frames, height, width, std::vector<std::uint8_t>(frames * height * width, 1));
}

std::size_t RegionMask::count() const {
    return static_cast<std::size_t>(std::count(m_bits.begin(), m_bits.end(), std::uint8_t{1}));
}

std::size_t RegionMask::count(std::size_t f) const {
    auto begin = m_bits.begin() + static_cast<std::ptrdiff_t>(f * m_height * m_width);
    return static_cast<std::size_t>(std::count(begin, begin + static_cast<std::ptrdiff_t>(m_height * m_width), std::uint8_t{1}));
}

}  // namespace vcd
