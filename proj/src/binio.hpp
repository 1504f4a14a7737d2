#pragma once

// Little-endian binary streams shared by the volume, embedding and
// checkpoint formats.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tss::binio {

class Writer {
public:
    explicit Writer(const std::filesystem::path& path);

    void magic(std::string_view tag);  // exactly 8 bytes, NUL padded
    void u8(std::uint8_t v);
    void u32(std::uint32_t v);
    void f32(float v);
    void f32_array(std::span<const float> values);
    void bytes(std::span<const std::uint8_t> values);
    void close();

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& path);

    /// Throws FormatError unless the next 8 bytes equal `tag` (NUL padded).
    void expect_magic(std::string_view tag);
    std::uint8_t u8();
    std::uint32_t u32();
    float f32();
    std::vector<float> f32_array(std::size_t count);
    std::vector<std::uint8_t> bytes(std::size_t count);
    std::string string(std::size_t count);
    bool at_end();

    const std::filesystem::path& path() const { return path_; }

private:
    void read_raw(char* dst, std::size_t count, const char* what);

    std::filesystem::path path_;
    std::ifstream in_;
};

}  // namespace tss::binio
