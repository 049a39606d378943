// SPDX-License-Identifier: Apache-2.0

#include "vcd/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "vcd/imaging.hpp"

namespace vcd {

double centered_cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty())
        throw std::invalid_argument("centered_cosine: vectors must be non-empty and equally sized");
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        dot += da * db;
        na += da * da;
        nb += db * db;
    }
    if (na == 0.0 || nb == 0.0)
        throw std::domain_error("centered_cosine: zero-norm centred vector");
    return dot / std::sqrt(na * nb);
}

std::vector<double> temporal_consistency_pairs(const VideoTensor& video) {
    if (video.frames() < 2)
        throw std::invalid_argument("temporal consistency needs at least 2 frames");
    std::vector<double> pairs(video.frames() - 1);
    for (std::size_t m = 0; m + 1 < video.frames(); ++m)
        pairs[m] = centered_cosine(video.frame(m), video.frame(m + 1));
    return pairs;
}

double temporal_consistency(const VideoTensor& video) {
    const auto pairs = temporal_consistency_pairs(video);
    return std::accumulate(pairs.begin(), pairs.end(), 0.0) / static_cast<double>(pairs.size());
}

std::vector<double> identity_similarity_frames(const VideoTensor& video, const VideoTensor& reference,
                                               std::span<const BBox> boxes) {
    if (reference.frames() != 1)
        throw std::invalid_argument("identity reference must be a single frame");
    if (reference.channels() != video.channels())
        throw std::invalid_argument("identity reference channel count differs from the video");
    if (boxes.size() != video.frames())
        throw std::invalid_argument("identity similarity needs one box per frame");
    std::vector<double> sims(video.frames());
    for (std::size_t m = 0; m < video.frames(); ++m) {
        BBox b = boxes[m];
        b.frame = m;
        const VideoTensor patch = resize_bilinear(crop(video, b), reference.height(), reference.width());
        sims[m] = centered_cosine(patch.data(), reference.data());
    }
    return sims;
}

double identity_similarity(const VideoTensor& video, const VideoTensor& reference, std::span<const BBox> boxes) {
    const auto sims = identity_similarity_frames(video, reference, boxes);
    return std::accumulate(sims.begin(), sims.end(), 0.0) / static_cast<double>(sims.size());
}

MetricReport metric_report(const VideoTensor& video, const VideoTensor& reference, std::span<const BBox> boxes) {
    MetricReport r;
    r.temporal_pairs = temporal_consistency_pairs(video);
    r.identity_frames = identity_similarity_frames(video, reference, boxes);
    r.temporal_consistency = std::accumulate(r.temporal_pairs.begin(), r.temporal_pairs.end(), 0.0) /
                             static_cast<double>(r.temporal_pairs.size());
    r.identity_similarity = std::accumulate(r.identity_frames.begin(), r.identity_frames.end(), 0.0) /
                            static_cast<double>(r.identity_frames.size());
    return r;
}

std::string metrics_csv_header() {
    return "run_id,stage,temporal_consistency,identity_similarity\n";
}

std::string metrics_csv_row(const std::string& run_id, const std::string& stage, const MetricReport& report) {
    char buf[64];
    std::snprintf(buf, sizeof buf, ",%.9f,%.9f\n", report.temporal_consistency, report.identity_similarity);
    return run_id + "," + stage + buf;
}

}  // namespace vcd
