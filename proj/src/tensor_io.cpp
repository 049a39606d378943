// SPDX-License-Identifier: Apache-2.0

#include "vcd/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>

namespace vcd {

void ByteWriter::magic(std::string_view m) {
    m_bytes.insert(m_bytes.end(), m.begin(), m.end());
}

void ByteWriter::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        m_bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f32(double v) {
    u32(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

void ByteReader::need(std::size_t n, std::string_view what) const {
    if (remaining() < n)
        throw FormatError("truncated input while reading " + std::string(what), m_pos);
}

void ByteReader::expect_magic(std::string_view m) {
    need(m.size(), "magic");
    if (!std::equal(m.begin(), m.end(), m_bytes.begin() + static_cast<std::ptrdiff_t>(m_pos)))
        throw FormatError("bad magic, expected " + std::string(m), m_pos);
    m_pos += m.size();
}

std::uint32_t ByteReader::u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(m_bytes[m_pos + static_cast<std::size_t>(i)]) << (8 * i);
    m_pos += 4;
    return v;
}

double ByteReader::f32() {
    const std::size_t at = m_pos;
    const float v = std::bit_cast<float>(u32());
    if (!std::isfinite(v))
        throw FormatError("non-finite float value", at);
    return static_cast<double>(v);
}

void ByteReader::expect_end() const {
    if (remaining() != 0)
        throw FormatError("trailing bytes after payload", m_pos);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> encode_tensor(const VideoTensor& t) {
    ByteWriter w;
    w.magic(kTensorMagic);
    w.u32(static_cast<std::uint32_t>(t.frames()));
    w.u32(static_cast<std::uint32_t>(t.channels()));
    w.u32(static_cast<std::uint32_t>(t.height()));
    w.u32(static_cast<std::uint32_t>(t.width()));
    w.u32(kDtypeFloat32);
    for (double v : t.data())
        w.f32(v);
    return w.bytes();
}

VideoTensor decode_tensor(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    r.expect_magic(kTensorMagic);
    Shape s;
    s.frames = r.u32();
    s.channels = r.u32();
    s.height = r.u32();
    s.width = r.u32();
    const std::size_t tag_at = r.offset();
    if (r.u32() != kDtypeFloat32)
        throw FormatError("unknown dtype tag", tag_at);
    if (s.numel() == 0)
        throw FormatError("zero-sized tensor", tag_at);
    if (r.remaining() != s.numel() * 4)
        throw FormatError("payload size " + std::to_string(r.remaining()) + " does not match shape " + to_string(s),
                          r.offset());
    std::vector<double> data(s.numel());
    for (auto& v : data)
        v = r.f32();
    return VideoTensor(s, std::move(data));
}

void save_tensor(const VideoTensor& t, const std::filesystem::path& path) {
    write_file_atomic(path, encode_tensor(t));
}

VideoTensor load_tensor(const std::filesystem::path& path) {
    return decode_tensor(read_file(path));
}

void export_pgm(const VideoTensor& t, std::size_t frame, std::size_t channel, double lo, double hi,
                const std::filesystem::path& path) {
    if (frame >= t.frames() || channel >= t.channels())
        throw std::out_of_range("export_pgm: frame/channel out of range");
    if (!(hi > lo))
        throw std::invalid_argument("export_pgm: empty value range");
    const std::string header = "P5\n" + std::to_string(t.width()) + " " + std::to_string(t.height()) + "\n255\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    for (std::size_t y = 0; y < t.height(); ++y) {
        for (std::size_t x = 0; x < t.width(); ++x) {
            const double v = std::clamp((t.at(frame, channel, y, x) - lo) / (hi - lo), 0.0, 1.0);
            bytes.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
        }
    }
    write_file_atomic(path, bytes);
}

}  // namespace vcd
