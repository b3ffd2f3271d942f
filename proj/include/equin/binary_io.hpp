#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "equin/error.hpp"

namespace equin::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

std::uint32_t crc32(std::string_view bytes);

/// Append-only little-endian byte buffer.
class ByteWriter {
public:
    template <typename T>
    void put(T value) {
        static_assert(std::is_trivially_copyable_v<T>);
        char raw[sizeof(T)];
        std::memcpy(raw, &value, sizeof(T));
        buffer_.append(raw, sizeof(T));
    }
    void put_string(std::string_view s) {
        put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        buffer_.append(s);
    }
    void put_bytes(std::string_view s) { buffer_.append(s); }
    void put_doubles(std::span<const double> values) {
        buffer_.append(reinterpret_cast<const char*>(values.data()), values.size_bytes());
    }

    /// Appends the CRC32 of everything written so far.
    void seal() { put<std::uint32_t>(crc32(buffer_)); }

    const std::string& bytes() const { return buffer_; }

private:
    std::string buffer_;
};

/// Bounds-checked reader; every overrun raises FormatError.
class ByteReader {
public:
    explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        static_assert(std::is_trivially_copyable_v<T>);
        need(sizeof(T));
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }
    std::string get_string(std::size_t max_len = 1u << 20) {
        const auto n = get<std::uint32_t>();
        if (n > max_len) throw FormatError("string field too long");
        need(n);
        std::string s(bytes_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    std::string_view get_bytes(std::size_t n) {
        need(n);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    void get_doubles(std::span<double> out) {
        need(out.size_bytes());
        std::memcpy(out.data(), bytes_.data() + pos_, out.size_bytes());
        pos_ += out.size_bytes();
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw FormatError("unexpected end of file (truncated?)");
    }
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

/// Checks the trailing CRC32 and returns the payload without it.
std::string_view verify_sealed(std::string_view bytes);

}  // namespace equin::io
