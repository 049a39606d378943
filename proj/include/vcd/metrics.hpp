// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "vcd/tensor.hpp"

namespace vcd {

/// Cosine similarity of two equally sized vectors after removing each one's
/// mean. Throws when either centred vector has zero norm.
double centered_cosine(std::span<const double> a, std::span<const double> b);

/// Cosine similarity of frames m and m+1 for every m (f - 1 values).
std::vector<double> temporal_consistency_pairs(const VideoTensor& video);
/// Mean of temporal_consistency_pairs; needs f >= 2.
double temporal_consistency(const VideoTensor& video);

/// Per-frame cosine between the box crop (resized to the reference size) and
/// the single-frame reference.
std::vector<double> identity_similarity_frames(const VideoTensor& video, const VideoTensor& reference,
                                               std::span<const BBox> boxes);
double identity_similarity(const VideoTensor& video, const VideoTensor& reference, std::span<const BBox> boxes);

struct MetricReport {
    double temporal_consistency = 0.0;
    double identity_similarity = 0.0;
    std::vector<double> temporal_pairs;   // f - 1 entries
    std::vector<double> identity_frames;  // f entries
};

MetricReport metric_report(const VideoTensor& video, const VideoTensor& reference, std::span<const BBox> boxes);

std::string metrics_csv_header();
std::string metrics_csv_row(const std::string& run_id, const std::string& stage, const MetricReport& report);

}  // namespace vcd
