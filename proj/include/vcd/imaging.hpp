// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "vcd/tensor.hpp"

namespace vcd {

/// Per-frame, per-channel bilinear resize with corner-aligned sampling:
/// output pixel x reads source coordinate x * (w_in - 1) / (w_out - 1).
/// A one-pixel output axis samples the source centre. Equal dims return a copy.
VideoTensor resize_bilinear(const VideoTensor& t, std::size_t new_h, std::size_t new_w);

/// Sub-array inside `b`. A box with a concrete frame index yields a
/// single-frame tensor; kAllFrames crops every frame.
VideoTensor crop(const VideoTensor& t, const BBox& b);

/// Copy of `dst` with the box region replaced by `src`.
VideoTensor paste(const VideoTensor& src, const VideoTensor& dst, const BBox& b);
/// In-place variant of paste.
void paste_into(const VideoTensor& src, VideoTensor& dst, const BBox& b);

struct Tile {
    VideoTensor tensor;
    BBox box;
};

/// rows x cols non-overlapping tiles in row-major order; boxes span all frames.
std::vector<Tile> split_tiles(const VideoTensor& t, std::size_t rows, std::size_t cols);

/// Reassembles tiles whose boxes partition the h x w frame exactly.
VideoTensor stitch_tiles(const std::vector<Tile>& tiles, std::size_t h, std::size_t w);

/// Grows each side by round(factor * side length), clipped to the frame.
BBox dilate_bbox(const BBox& b, double factor, std::size_t h, std::size_t w);

/// Box scaled by integer factor, e.g. to address an upscaled video.
BBox scale_bbox(const BBox& b, std::size_t factor);

}  // namespace vcd
