// SPDX-License-Identifier: Apache-2.0

#include "vcd/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace vcd {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

constexpr std::uint64_t kUniformRange = std::uint64_t{1} << 63;

std::array<std::uint32_t, 4> block_for(const RngSpec& spec, std::uint64_t block) {
    return philox4x32({static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
                       static_cast<std::uint32_t>(spec.stream), static_cast<std::uint32_t>(spec.stream >> 32)},
                      {static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32)});
}

// 53-bit uniform strictly inside (0, 1).
double open_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * ctr[2];
        ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
               static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
        key[0] += kPhiloxW0;
        key[1] += kPhiloxW1;
    }
    return ctr;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t derive_stream(std::uint64_t parent, std::string_view tag, std::uint64_t a, std::uint64_t b) {
    // FNV-1a over the tag, then mixed with the parent and the two indices.
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : tag) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    std::uint64_t x = splitmix64(parent ^ splitmix64(h));
    x = splitmix64(x ^ a);
    return splitmix64(x ^ (b + 0x632BE59BD9B4E019ull));
}

RngSpec derive(const RngSpec& parent, std::string_view tag, std::uint64_t a, std::uint64_t b) {
    return RngSpec{parent.seed, derive_stream(parent.stream, tag, a, b)};
}

double normal_at(const RngSpec& spec, std::uint64_t index) {
    if (index >= kUniformRange)
        throw std::out_of_range("normal sequence index out of range");
    const auto w = block_for(spec, index >> 1);
    const double u1 = open_unit(w[0], w[1]);
    const double u2 = open_unit(w[2], w[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return (index & 1u) ? r * std::sin(angle) : r * std::cos(angle);
}

void fill_normals(const RngSpec& spec, std::uint64_t first, std::span<double> out) {
    std::size_t i = 0;
    if (out.empty())
        return;
    if (first & 1u) {
        out[0] = normal_at(spec, first);
        i = 1;
    }
    for (; i + 1 < out.size(); i += 2) {
        const auto w = block_for(spec, (first + i) >> 1);
        const double r = std::sqrt(-2.0 * std::log(open_unit(w[0], w[1])));
        const double angle = 2.0 * std::numbers::pi * open_unit(w[2], w[3]);
        out[i] = r * std::cos(angle);
        out[i + 1] = r * std::sin(angle);
    }
    if (i < out.size())
        out[i] = normal_at(spec, first + i);
}

double uniform_at(const RngSpec& spec, std::uint64_t index) {
    if (index >= kUniformRange)
        throw std::out_of_range("uniform sequence index out of range");
    const auto w = block_for(spec, kUniformRange | (index >> 1));
    return (index & 1u) ? open_unit(w[2], w[3]) : open_unit(w[0], w[1]);
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo)
        throw std::invalid_argument("uniform_int: empty range");
    const double span = static_cast<double>(hi - lo + 1);
    auto v = lo + static_cast<std::int64_t>(std::floor(uniform() * span));
    return v > hi ? hi : v;
}

VideoTensor sample_standard_normal(const Shape& shape, const RngSpec& rng) {
    VideoTensor out(shape);
    fill_normals(rng, 0, out.data());
    return out;
}

}  // namespace vcd
