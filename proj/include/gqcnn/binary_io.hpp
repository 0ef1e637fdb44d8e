#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "gqcnn/error.hpp"

namespace gqcnn::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written little-endian; add byte swapping for this host");

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

inline void write_bytes(std::ostream& out, const void* data, std::size_t bytes) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}

/// Sequential little-endian reader that tracks its byte offset. Short reads
/// raise IoError naming the offset.
class ByteReader {
 public:
  explicit ByteReader(std::istream& in) : in_(in) {}

  template <typename T>
  T read() {
    T value;
    read_bytes(&value, sizeof(T));
    return value;
  }

  void read_bytes(void* dst, std::size_t bytes) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(bytes));
    const auto got = static_cast<std::size_t>(in_.gcount());
    if (got != bytes) {
      throw IoError("truncated input: needed " + std::to_string(bytes) + " bytes at offset " +
                    std::to_string(offset_) + ", got " + std::to_string(got));
    }
    offset_ += bytes;
  }

  /// Reads a 4-byte magic tag; a short read here is a format error rather than
  /// truncation (the stream is not a file of this kind at all).
  void expect_magic(const char (&magic)[5]) {
    char tag[4] = {};
    in_.read(tag, 4);
    if (in_.gcount() != 4 || std::memcmp(tag, magic, 4) != 0) {
      throw FormatError(std::string("bad magic at offset ") + std::to_string(offset_) +
                        ", expected \"" + magic + "\"");
    }
    offset_ += 4;
  }

  std::size_t offset() const { return offset_; }

 private:
  std::istream& in_;
  std::size_t offset_ = 0;
};

}  // namespace gqcnn::io
