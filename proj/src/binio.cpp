#include "binio.hpp"

#include <array>
#include <bit>

#include "tss/errors.hpp"

namespace tss::binio {

namespace {

std::array<char, 4> encode_u32(std::uint32_t v) {
    return {static_cast<char>(v & 0xFFu), static_cast<char>((v >> 8) & 0xFFu),
            static_cast<char>((v >> 16) & 0xFFu), static_cast<char>((v >> 24) & 0xFFu)};
}

std::uint32_t decode_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::array<char, 8> padded_magic(std::string_view tag) {
    if (tag.size() > 8) throw ValidationError("magic tag longer than 8 bytes");
    std::array<char, 8> m{};
    for (std::size_t i = 0; i < tag.size(); ++i) m[i] = tag[i];
    return m;
}

}  // namespace

Writer::Writer(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot open for writing: " + path.string());
}

void Writer::magic(std::string_view tag) {
    auto m = padded_magic(tag);
    out_.write(m.data(), m.size());
}

void Writer::u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }

void Writer::u32(std::uint32_t v) {
    auto b = encode_u32(v);
    out_.write(b.data(), b.size());
}

void Writer::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void Writer::f32_array(std::span<const float> values) {
    std::vector<char> buf(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        auto b = encode_u32(std::bit_cast<std::uint32_t>(values[i]));
        std::copy(b.begin(), b.end(), buf.begin() + static_cast<std::ptrdiff_t>(4 * i));
    }
    out_.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void Writer::bytes(std::span<const std::uint8_t> values) {
    out_.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size()));
}

void Writer::close() {
    out_.flush();
    if (!out_) throw IoError("write failed: " + path_.string());
    out_.close();
}

Reader::Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open for reading: " + path.string());
}

void Reader::read_raw(char* dst, std::size_t count, const char* what) {
    in_.read(dst, static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in_.gcount()) != count)
        throw FormatError(path_.string() + ": truncated " + what);
}

void Reader::expect_magic(std::string_view tag) {
    auto want = padded_magic(tag);
    std::array<char, 8> got{};
    read_raw(got.data(), got.size(), "magic");
    if (got != want) throw FormatError(path_.string() + ": bad magic, expected " + std::string(tag));
}

std::uint8_t Reader::u8() {
    char c = 0;
    read_raw(&c, 1, "header");
    return static_cast<std::uint8_t>(c);
}

std::uint32_t Reader::u32() {
    std::array<unsigned char, 4> b{};
    read_raw(reinterpret_cast<char*>(b.data()), 4, "header");
    return decode_u32(b.data());
}

float Reader::f32() { return std::bit_cast<float>(u32()); }

std::vector<float> Reader::f32_array(std::size_t count) {
    std::vector<unsigned char> buf(count * 4);
    read_raw(reinterpret_cast<char*>(buf.data()), buf.size(), "payload");
    std::vector<float> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = std::bit_cast<float>(decode_u32(buf.data() + 4 * i));
    return out;
}

std::vector<std::uint8_t> Reader::bytes(std::size_t count) {
    std::vector<std::uint8_t> out(count);
    read_raw(reinterpret_cast<char*>(out.data()), count, "payload");
    return out;
}

std::string Reader::string(std::size_t count) {
    std::string s(count, '\0');
    read_raw(s.data(), count, "string");
    return s;
}

bool Reader::at_end() { return in_.peek() == std::char_traits<char>::eof(); }

}  // namespace tss::binio
