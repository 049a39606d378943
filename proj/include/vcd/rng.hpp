// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

#include "vcd/tensor.hpp"

namespace vcd {

/// Identifies one reproducible random sequence. Equal specs give equal
/// sequences on every platform; different stream ids under one seed are
/// independent.
struct RngSpec {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    bool operator==(const RngSpec&) const = default;
};

/// Philox4x32 with 10 rounds. Counter-based: output is a pure function of
/// (counter, key), so any element of a sequence can be produced directly.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

std::uint64_t splitmix64(std::uint64_t x);

/// Child stream id for a named purpose, e.g. derive_stream(s, "t2v.step", t).
std::uint64_t derive_stream(std::uint64_t parent, std::string_view tag, std::uint64_t a = 0, std::uint64_t b = 0);
RngSpec derive(const RngSpec& parent, std::string_view tag, std::uint64_t a = 0, std::uint64_t b = 0);

/// Element `index` of the standard-normal sequence of `spec`.
///
/// Box-Muller on one Philox block: block index/2 yields the pair
/// (r cos 2pi u2, r sin 2pi u2) with r = sqrt(-2 ln u1); u1 and u2 are
/// 53-bit uniforms on (0, 1) built from words (0, 1) and (2, 3).
double normal_at(const RngSpec& spec, std::uint64_t index);

/// Writes normal_at(spec, first + i) into out[i]; one Philox block per pair.
void fill_normals(const RngSpec& spec, std::uint64_t first, std::span<double> out);

/// Element `index` of the uniform (0, 1) sequence of `spec`. Uses a counter
/// range disjoint from normal_at.
double uniform_at(const RngSpec& spec, std::uint64_t index);

/// Sequential cursor over the normal and uniform sequences of one spec.
class Rng {
public:
    explicit Rng(RngSpec spec) : m_spec(spec) {}

    double normal() { return normal_at(m_spec, m_normal_pos++); }
    double uniform() { return uniform_at(m_spec, m_uniform_pos++); }
    /// Uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    const RngSpec& spec() const { return m_spec; }

private:
    RngSpec m_spec;
    std::uint64_t m_normal_pos = 0;
    std::uint64_t m_uniform_pos = 0;
};

/// I.i.d. standard-normal tensor; element i is normal_at(rng, i).
VideoTensor sample_standard_normal(const Shape& shape, const RngSpec& rng);

}  // namespace vcd
