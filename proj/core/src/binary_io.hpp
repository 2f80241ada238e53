#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dal::io {

// Little-endian byte sink that fills an in-memory buffer.
class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  void text(const std::string& s) { raw(s.data(), s.size()); }

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

  void write_file(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::invalid_argument("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes_.data()), static_cast<std::streamsize>(bytes_.size()));
    if (!out) throw std::invalid_argument("write failed for " + path.string());
  }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

// Bounds-checked little-endian reader; truncation raises a format error that
// names the file and the field being read.
class Reader {
 public:
  Reader(std::vector<std::uint8_t> bytes, std::string label) : bytes_(std::move(bytes)), label_(std::move(label)) {}

  static Reader from_file(const std::filesystem::path& path, const std::string& kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open " + kind + " file " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return Reader(std::move(bytes), kind + " file " + path.string());
  }

  std::uint8_t u8(const char* field) { return static_cast<std::uint8_t>(get(1, field)); }
  std::uint16_t u16(const char* field) { return static_cast<std::uint16_t>(get(2, field)); }
  std::uint32_t u32(const char* field) { return static_cast<std::uint32_t>(get(4, field)); }
  std::uint64_t u64(const char* field) { return get(8, field); }
  double f64(const char* field) { return std::bit_cast<double>(get(8, field)); }
  std::string text(std::size_t n, const char* field) {
    need(n, field);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  const std::uint8_t* take(std::size_t n, const char* field) {
    need(n, field);
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }
  [[noreturn]] void fail(const std::string& msg) const { throw std::invalid_argument(label_ + ": " + msg); }

 private:
  void need(std::size_t n, const char* field) const {
    if (bytes_.size() - pos_ < n) {
      fail(std::string("truncated while reading ") + field + " at byte " + std::to_string(pos_));
    }
  }
  std::uint64_t get(int n, const char* field) {
    need(static_cast<std::size_t>(n), field);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::vector<std::uint8_t> bytes_;
  std::string label_;
  std::size_t pos_ = 0;
};

}  // namespace dal::io
