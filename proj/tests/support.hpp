// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "vcd/tensor.hpp"

namespace vcd::testing {

/// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("vcd_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline VideoTensor iota_tensor(Shape s, double start = 0.0, double step = 1.0) {
    std::vector<double> v(s.numel());
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = start + step * static_cast<double>(i);
    return VideoTensor(s, std::move(v));
}

/// Tensor of std::mt19937_64 normals; independent of the library RNG.
inline VideoTensor reference_normals(Shape s, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd;
    std::vector<double> v(s.numel());
    for (auto& x : v)
        x = nd(gen);
    return VideoTensor(s, std::move(v));
}

inline double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double variance_of(std::span<const double> v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v)
        s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

}  // namespace vcd::testing
