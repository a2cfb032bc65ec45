#pragma once

// Little-endian primitives shared by the SEGB, EMAP and TXTQ codecs.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "vlmap/errors.hpp"

namespace vlmap::detail {

class ByteWriter {
 public:
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

  template <typename T>
    requires std::is_integral_v<T>
  void put(T value) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      buf_.push_back(static_cast<char>(u & 0xFF));
      if constexpr (sizeof(T) > 1) u = static_cast<U>(u >> 8);
    }
  }
  void put_f32(float f) { put(std::bit_cast<std::uint32_t>(f)); }
  void put_f32s(std::span<const float> fs) {
    if constexpr (std::endian::native == std::endian::little) {
      const auto* p = reinterpret_cast<const char*>(fs.data());
      buf_.insert(buf_.end(), p, p + fs.size_bytes());
    } else {
      for (float f : fs) put_f32(f);
    }
  }

  std::vector<char>& buffer() { return buf_; }
  std::vector<char> take() { return std::move(buf_); }

 private:
  std::vector<char> buf_;
};

/// Bounds-checked cursor; every read failure throws FormatError carrying the
/// current offset and the supplied context string.
class ByteReader {
 public:
  explicit ByteReader(std::span<const char> data) : data_(data) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  void require(std::size_t n, const std::string& context) const {
    if (remaining() < n)
      throw FormatError("truncated " + context + ": need " + std::to_string(n) +
                            " bytes, have " + std::to_string(remaining()),
                        pos_);
  }

  std::string_view bytes(std::size_t n, const std::string& context) {
    require(n, context);
    std::string_view out(data_.data() + pos_, n);
    pos_ += n;
    return out;
  }

  template <typename T>
    requires std::is_integral_v<T>
  T get(const std::string& context) {
    require(sizeof(T), context);
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      u |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i));
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }

  float get_f32(const std::string& context) {
    return std::bit_cast<float>(get<std::uint32_t>(context));
  }

  void get_f32s(std::span<float> out, const std::string& context) {
    require(out.size_bytes(), context);
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out.data(), data_.data() + pos_, out.size_bytes());
      pos_ += out.size_bytes();
    } else {
      for (float& f : out) f = get_f32(context);
    }
  }

 private:
  std::span<const char> data_;
  std::size_t pos_ = 0;
};

std::vector<char> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const char> bytes);

}  // namespace vlmap::detail
