#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <limits>
#include <fstream>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "error.hpp"

namespace semspace {

static_assert(std::endian::native == std::endian::little,
              "binary artifacts are stored little-endian");
static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

// Sequential writer for the native artifact formats.
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) fail(ErrorCode::kIo, "cannot write '" + path + "'");
  }

  void magic(const char (&tag)[5]) { out_.write(tag, 4); }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void scalar(T value) {
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void array(std::span<const T> values) {
    out_.write(reinterpret_cast<const char*>(values.data()),
               static_cast<std::streamsize>(values.size_bytes()));
  }

  void string(const std::string& value) {
    scalar<std::uint32_t>(static_cast<std::uint32_t>(value.size()));
    out_.write(value.data(), static_cast<std::streamsize>(value.size()));
  }

  void finish() {
    out_.flush();
    if (!out_) fail(ErrorCode::kIo, "error writing '" + path_ + "'");
  }

 private:
  std::string path_;
  std::ofstream out_;
};

// Reader counterpart. Truncation and oversize counts raise format errors.
class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "'");
    data_.assign(std::istreambuf_iterator<char>(in),
                 std::istreambuf_iterator<char>());
  }

  void expect_magic(const char (&tag)[5], const char* what) {
    need(4);
    if (std::memcmp(data_.data() + pos_, tag, 4) != 0) {
      fail(ErrorCode::kFormat,
           "'" + path_ + "' is not a " + what + " file (bad magic)");
    }
    pos_ += 4;
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  T scalar() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  std::vector<T> array(std::uint64_t count) {
    if (count > (data_.size() - pos_) / sizeof(T)) truncated();
    std::vector<T> values(count);
    std::memcpy(values.data(), data_.data() + pos_, count * sizeof(T));
    pos_ += count * sizeof(T);
    return values;
  }

  std::string string() {
    auto size = scalar<std::uint32_t>();
    need(size);
    std::string value(data_.data() + pos_, size);
    pos_ += size;
    return value;
  }

  void expect_end() {
    if (pos_ != data_.size()) {
      fail(ErrorCode::kFormat, "'" + path_ + "' has trailing bytes");
    }
  }

  const std::string& path() const { return path_; }

 private:
  void need(std::size_t bytes) {
    if (bytes > data_.size() - pos_) truncated();
  }
  [[noreturn]] void truncated() {
    fail(ErrorCode::kFormat, "'" + path_ + "' is truncated");
  }

  std::string path_;
  std::vector<char> data_;
  std::size_t pos_ = 0;
};

}  // namespace semspace
