#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lsat/errors.hpp"
#include "lsat/types.hpp"

namespace lsat {

// Little-endian byte stream used by all checkpoint files. Matrices are
// stored as f64 row-major. Strings are u32-length-prefixed UTF-8.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void str(const std::string& s);
  void raw(const void* data, std::size_t n);
  void matrix(const Matrix& m);  // entries only; caller records the shape

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  void write_file(const std::filesystem::path& path) const;

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {}
  static ByteReader from_file(const std::filesystem::path& path);

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string str();
  Matrix matrix(Index rows, Index cols);

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }
  // Raises FormatError at the current offset if fewer than n bytes remain.
  void require(std::size_t n, const char* what);

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint64_t fnv1a64(const void* data, std::size_t n);
std::uint64_t fnv1a64(const std::vector<std::uint8_t>& bytes);

}  // namespace lsat
