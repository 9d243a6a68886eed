#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "bgcn/common.hpp"

namespace bgcn::io {

// Little-endian buffer writer; file ends with a CRC-32 of everything before
// it so truncation and corruption are detected on load.
class BinaryWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  void magic(const char (&m)[5]) { buf_.insert(buf_.end(), m, m + 4); }

  // Appends the checksum and writes the buffer to `path` atomically enough
  // for our purposes (truncate + write + flush; throws IoError on failure).
  void save(const std::string& path);

  const std::vector<char>& buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class BinaryReader {
 public:
  // Reads the whole file, verifies the trailing CRC-32, leaves the cursor at
  // the start of the payload.
  static BinaryReader from_file(const std::string& path);
  explicit BinaryReader(std::vector<char> payload) : buf_(std::move(payload)) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::uint64_t u64();
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str();
  void expect_magic(const char (&m)[5]);
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const;
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

}  // namespace bgcn::io
