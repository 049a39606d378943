// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace vcd {

/// Ordered list of k token vectors of dimension d: the fixed prompt tokens
/// followed by any learnable identity tokens.
class ConditionEmbedding {
public:
    ConditionEmbedding() = default;
    ConditionEmbedding(std::size_t dim, std::vector<double> values);
    static ConditionEmbedding from_tokens(const std::vector<std::vector<double>>& tokens);

    std::size_t size() const { return m_dim == 0 ? 0 : m_values.size() / m_dim; }
    std::size_t dim() const { return m_dim; }
    std::span<const double> token(std::size_t i) const;
    std::span<const double> values() const { return m_values; }

    /// Mean of all token vectors.
    std::vector<double> pooled() const;

    /// This condition followed by the tokens of `tail`.
    ConditionEmbedding concat(const ConditionEmbedding& tail) const;

    /// FNV-1a over dims and raw value bits; identifies the exact tokens used.
    std::uint64_t fingerprint() const;

    bool operator==(const ConditionEmbedding&) const = default;

private:
    std::size_t m_dim = 0;
    std::vector<double> m_values;
};

}  // namespace vcd
