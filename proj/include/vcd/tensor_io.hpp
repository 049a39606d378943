// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vcd/tensor.hpp"

namespace vcd {

/// Raised for malformed binary files; `offset` is the byte position at
/// which decoding failed.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"), m_offset(offset) {}
    std::size_t offset() const { return m_offset; }

private:
    std::size_t m_offset;
};

/// Little-endian encoder shared by the VCDT / VCDE / VCDP containers.
class ByteWriter {
public:
    void magic(std::string_view m);
    void u32(std::uint32_t v);
    void f32(double v);
    const std::vector<std::uint8_t>& bytes() const { return m_bytes; }

private:
    std::vector<std::uint8_t> m_bytes;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : m_bytes(bytes) {}

    void expect_magic(std::string_view m);
    std::uint32_t u32();
    double f32();
    std::size_t offset() const { return m_pos; }
    std::size_t remaining() const { return m_bytes.size() - m_pos; }
    void expect_end() const;

private:
    void need(std::size_t n, std::string_view what) const;

    std::span<const std::uint8_t> m_bytes;
    std::size_t m_pos = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

inline constexpr std::string_view kTensorMagic = "VCDT0001";
inline constexpr std::uint32_t kDtypeFloat32 = 0;

/// VCDT: magic, u32 f/c/h/w/dtype, then f*c*h*w float32, all little-endian.
std::vector<std::uint8_t> encode_tensor(const VideoTensor& t);
VideoTensor decode_tensor(std::span<const std::uint8_t> bytes);
void save_tensor(const VideoTensor& t, const std::filesystem::path& path);
VideoTensor load_tensor(const std::filesystem::path& path);

/// Binary PGM (P5) of one channel of one frame. Values are mapped linearly
/// from [lo, hi] onto 0..255 and clamped.
void export_pgm(const VideoTensor& t, std::size_t frame, std::size_t channel, double lo, double hi,
                const std::filesystem::path& path);

}  // namespace vcd
