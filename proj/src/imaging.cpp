// SPDX-License-Identifier: Apache-2.0

#include "vcd/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vcd {

namespace {

struct Tap {
    std::size_t i0;
    std::size_t i1;
    double frac;
};

std::vector<Tap> taps(std::size_t in, std::size_t out) {
    std::vector<Tap> result(out);
    for (std::size_t o = 0; o < out; ++o) {
        const double src = out == 1 ? 0.5 * static_cast<double>(in - 1)
                                    : static_cast<double>(o) * static_cast<double>(in - 1) / static_cast<double>(out - 1);
        auto i0 = static_cast<std::size_t>(std::floor(src));
        i0 = std::min(i0, in - 1);
        const std::size_t i1 = std::min(i0 + 1, in - 1);
        result[o] = {i0, i1, src - static_cast<double>(i0)};
    }
    return result;
}

std::vector<std::size_t> frame_range(const VideoTensor& t, const BBox& b) {
    if (b.frame == kAllFrames) {
        std::vector<std::size_t> all(t.frames());
        for (std::size_t f = 0; f < all.size(); ++f)
            all[f] = f;
        return all;
    }
    if (b.frame >= t.frames())
        throw std::out_of_range("box frame " + std::to_string(b.frame) + " outside video of " +
                                std::to_string(t.frames()) + " frames");
    return {b.frame};
}

}  // namespace

VideoTensor resize_bilinear(const VideoTensor& t, std::size_t new_h, std::size_t new_w) {
    if (new_h == 0 || new_w == 0)
        throw std::invalid_argument("resize_bilinear: target dims must be >= 1");
    if (new_h == t.height() && new_w == t.width())
        return t;
    const auto ty = taps(t.height(), new_h);
    const auto tx = taps(t.width(), new_w);
    VideoTensor out(Shape{t.frames(), t.channels(), new_h, new_w});
    for (std::size_t f = 0; f < t.frames(); ++f) {
        for (std::size_t c = 0; c < t.channels(); ++c) {
            for (std::size_t y = 0; y < new_h; ++y) {
                const Tap& vy = ty[y];
                for (std::size_t x = 0; x < new_w; ++x) {
                    const Tap& vx = tx[x];
                    const double top = t.at(f, c, vy.i0, vx.i0) * (1.0 - vx.frac) + t.at(f, c, vy.i0, vx.i1) * vx.frac;
                    const double bot = t.at(f, c, vy.i1, vx.i0) * (1.0 - vx.frac) + t.at(f, c, vy.i1, vx.i1) * vx.frac;
                    out.at(f, c, y, x) = top * (1.0 - vy.frac) + bot * vy.frac;
                }
            }
        }
    }
    return out;
}

VideoTensor crop(const VideoTensor& t, const BBox& b) {
    if (!b.valid_in(t.height(), t.width()))
        throw std::out_of_range("crop: box " + to_string(b) + " outside frame " + to_string(t.shape()));
    const auto frames = frame_range(t, b);
    const auto h = static_cast<std::size_t>(b.height());
    const auto w = static_cast<std::size_t>(b.width());
    VideoTensor out(Shape{frames.size(), t.channels(), h, w});
    for (std::size_t i = 0; i < frames.size(); ++i)
        for (std::size_t c = 0; c < t.channels(); ++c)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x)
                    out.at(i, c, y, x) = t.at(frames[i], c, y + static_cast<std::size_t>(b.y0), x + static_cast<std::size_t>(b.x0));
    return out;
}

void paste_into(const VideoTensor& src, VideoTensor& dst, const BBox& b) {
    if (!b.valid_in(dst.height(), dst.width()))
        throw std::out_of_range("paste: box " + to_string(b) + " outside frame " + to_string(dst.shape()));
    const auto frames = frame_range(dst, b);
    if (src.frames() != frames.size() || src.channels() != dst.channels() ||
        src.height() != static_cast<std::size_t>(b.height()) || src.width() != static_cast<std::size_t>(b.width()))
        throw std::invalid_argument("paste: source " + to_string(src.shape()) + " does not fit box " + to_string(b));
    for (std::size_t i = 0; i < frames.size(); ++i)
        for (std::size_t c = 0; c < src.channels(); ++c)
            for (std::size_t y = 0; y < src.height(); ++y)
                for (std::size_t x = 0; x < src.width(); ++x)
                    dst.at(frames[i], c, y + static_cast<std::size_t>(b.y0), x + static_cast<std::size_t>(b.x0)) = src.at(i, c, y, x);
}

VideoTensor paste(const VideoTensor& src, const VideoTensor& dst, const BBox& b) {
    VideoTensor out = dst;
    paste_into(src, out, b);
    return out;
}

std::vector<Tile> split_tiles(const VideoTensor& t, std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0 || t.height() % rows != 0 || t.width() % cols != 0)
        throw std::invalid_argument("split_tiles: " + std::to_string(t.height()) + "x" + std::to_string(t.width()) +
                                    " is not divisible into a " + std::to_string(rows) + "x" + std::to_string(cols) + " grid");
    const auto th = static_cast<int>(t.height() / rows);
    const auto tw = static_cast<int>(t.width() / cols);
    std::vector<Tile> tiles;
    tiles.reserve(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const int y0 = static_cast<int>(r) * th;
            const int x0 = static_cast<int>(c) * tw;
            BBox box{kAllFrames, x0, y0, x0 + tw, y0 + th};
            tiles.push_back({crop(t, box), box});
        }
    }
    return tiles;
}

VideoTensor stitch_tiles(const std::vector<Tile>& tiles, std::size_t h, std::size_t w) {
    if (tiles.empty())
        throw std::invalid_argument("stitch_tiles: no tiles");
    std::vector<std::uint8_t> covered(h * w, 0);
    const Tile& first = tiles.front();
    VideoTensor out(Shape{first.tensor.frames(), first.tensor.channels(), h, w});
    for (const auto& tile : tiles) {
        if (tile.box.frame != kAllFrames)
            throw std::invalid_argument("stitch_tiles: tile boxes must span all frames");
        if (!tile.box.valid_in(h, w))
            throw std::out_of_range("stitch_tiles: tile " + to_string(tile.box) + " outside frame");
        for (int y = tile.box.y0; y < tile.box.y1; ++y) {
            for (int x = tile.box.x0; x < tile.box.x1; ++x) {
                auto& cell = covered[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
                if (cell)
                    throw std::invalid_argument("stitch_tiles: tiles overlap at (" + std::to_string(x) + ", " +
                                                std::to_string(y) + ")");
                cell = 1;
            }
        }
        paste_into(tile.tensor, out, tile.box);
    }
    const auto gap = std::find(covered.begin(), covered.end(), std::uint8_t{0});
    if (gap != covered.end()) {
        const auto at = static_cast<std::size_t>(gap - covered.begin());
        throw std::invalid_argument("stitch_tiles: gap at (" + std::to_string(at % w) + ", " + std::to_string(at / w) + ")");
    }
    return out;
}

BBox dilate_bbox(const BBox& b, double factor, std::size_t h, std::size_t w) {
    if (factor < 0.0)
        throw std::invalid_argument("dilate_bbox: negative factor");
    const auto ext_x = static_cast<int>(std::lround(factor * b.width()));
    const auto ext_y = static_cast<int>(std::lround(factor * b.height()));
    BBox out = b;
    out.x0 = std::max(0, b.x0 - ext_x);
    out.y0 = std::max(0, b.y0 - ext_y);
    out.x1 = std::min(static_cast<int>(w), b.x1 + ext_x);
    out.y1 = std::min(static_cast<int>(h), b.y1 + ext_y);
    return out;
}

BBox scale_bbox(const BBox& b, std::size_t factor) {
    const auto k = static_cast<int>(factor);
    return BBox{b.frame, b.x0 * k, b.y0 * k, b.x1 * k, b.y1 * k};
}

}  // namespace vcd
