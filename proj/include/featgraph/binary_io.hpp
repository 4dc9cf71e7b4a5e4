#pragma once

// Little-endian fixed-width encoding shared by the dump, graph and kernel
// cache formats. The reader tracks its byte offset so format errors can name
// where they happened.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "featgraph/error.hpp"

namespace featgraph::io {

static_assert(std::endian::native == std::endian::little,
              "cache formats are written with native little-endian stores");

class ByteWriter {
 public:
  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }

  void put_bytes(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

  // u64 length prefix followed by the raw bytes.
  void put_blob(std::string_view s) {
    put<std::uint64_t>(s.size());
    put_bytes(s);
  }

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, Errc error_code)
      : data_(data), error_code_(error_code) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get(std::string_view section) {
    require(sizeof(T), section);
    T value;
    std::memcpy(&value, data_.data() + offset_, sizeof(T));
    offset_ += sizeof(T);
    return value;
  }

  std::string get_bytes(std::size_t n, std::string_view section) {
    require(n, section);
    std::string s(reinterpret_cast<const char*>(data_.data() + offset_), n);
    offset_ += n;
    return s;
  }

  std::string get_blob(std::string_view section) {
    const auto n = get<std::uint64_t>(section);
    return get_bytes(static_cast<std::size_t>(n), section);
  }

  std::size_t offset() const { return offset_; }
  std::size_t remaining() const { return data_.size() - offset_; }

  [[noreturn]] void fail(std::string_view section, const std::string& what) const {
    throw Error(error_code_, std::string(section) + " at byte " + std::to_string(offset_) + ": " + what);
  }

 private:
  void require(std::size_t n, std::string_view section) const {
    if (n > remaining()) {
      fail(section, "truncated (need " + std::to_string(n) + " bytes, " +
                        std::to_string(remaining()) + " left)");
    }
  }

  std::span<const std::uint8_t> data_;
  std::size_t offset_ = 0;
  Errc error_code_;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace featgraph::io
