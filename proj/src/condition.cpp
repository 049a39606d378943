// SPDX-License-Identifier: Apache-2.0

#include "vcd/condition.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

namespace vcd {

ConditionEmbedding::ConditionEmbedding(std::size_t dim, std::vector<double> values)
    : m_dim(dim), m_values(std::move(values)) {
    if (dim == 0 || m_values.empty() || m_values.size() % dim != 0)
        throw std::invalid_argument("condition needs k >= 1 tokens of a common dimension d >= 1");
    for (double v : m_values) {
        if (!std::isfinite(v))
            throw std::invalid_argument("condition contains non-finite values");
    }
}

ConditionEmbedding ConditionEmbedding::from_tokens(const std::vector<std::vector<double>>& tokens) {
    if (tokens.empty())
        throw std::invalid_argument("condition needs at least one token");
    const std::size_t d = tokens.front().size();
    std::vector<double> flat;
    for (const auto& t : tokens) {
        if (t.size() != d)
            throw std::invalid_argument("condition tokens differ in dimension");
        flat.insert(flat.end(), t.begin(), t.end());
    }
    return ConditionEmbedding(d, std::move(flat));
}

std::span<const double> ConditionEmbedding::token(std::size_t i) const {
    if (i >= size())
        throw std::out_of_range("token index " + std::to_string(i) + " out of range");
    return std::span<const double>(m_values).subspan(i * m_dim, m_dim);
}

std::vector<double> ConditionEmbedding::pooled() const {
    std::vector<double> out(m_dim, 0.0);
    const std::size_t k = size();
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < m_dim; ++j)
            out[j] += m_values[i * m_dim + j];
    for (auto& v : out)
        v /= static_cast<double>(k);
    return out;
}

ConditionEmbedding ConditionEmbedding::concat(const ConditionEmbedding& tail) const {
    if (tail.m_dim != m_dim)
        throw std::invalid_argument("cannot concatenate conditions of different token dimension");
    std::vector<double> values = m_values;
    values.insert(values.end(), tail.m_values.begin(), tail.m_values.end());
    return ConditionEmbedding(m_dim, std::move(values));
}

std::uint64_t ConditionEmbedding::fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](std::uint64_t word) {
        for (int i = 0; i < 8; ++i) {
            h ^= (word >> (8 * i)) & 0xffu;
            h *= 0x100000001b3ull;
        }
    };
    mix(m_dim);
    mix(size());
    for (double v : m_values)
        mix(std::bit_cast<std::uint64_t>(v));
    return h;
}

}  // namespace vcd
