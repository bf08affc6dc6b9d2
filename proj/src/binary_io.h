// src/binary_io.h
//
// Copyright (c)  2026  knnctc authors
// SPDX-License-Identifier: Apache-2.0
//
// Little-endian primitives shared by the on-disk formats.

#ifndef KNNCTC_SRC_BINARY_IO_H_
#define KNNCTC_SRC_BINARY_IO_H_

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "knnctc/errors.h"

namespace knnctc::internal {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

template <typename U>
U ToLittle(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    U out = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      out = static_cast<U>((out << 8) | ((v >> (8 * i)) & 0xFF));
    }
    return out;
  } else {
    return v;
  }
}

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string &path)
      : path_(path), os_(path, std::ios::binary | std::ios::trunc) {
    if (!os_)
      throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  }

  void Bytes(const void *data, std::size_t n) {
    os_.write(static_cast<const char *>(data), static_cast<std::streamsize>(n));
  }
  void U8(uint8_t v) { Bytes(&v, 1); }
  void U32(uint32_t v) {
    v = ToLittle(v);
    Bytes(&v, 4);
  }
  void U64(uint64_t v) {
    v = ToLittle(v);
    Bytes(&v, 8);
  }
  void F32s(std::span<const float> values) {
    if constexpr (std::endian::native == std::endian::little) {
      Bytes(values.data(), values.size() * sizeof(float));
    } else {
      for (float f : values) U32(std::bit_cast<uint32_t>(f));
    }
  }
  void U32s(std::span<const uint32_t> values) {
    if constexpr (std::endian::native == std::endian::little) {
      Bytes(values.data(), values.size() * sizeof(uint32_t));
    } else {
      for (uint32_t v : values) U32(v);
    }
  }
  void U64s(std::span<const uint64_t> values) {
    for (uint64_t v : values) U64(v);
  }
  // u32 length followed by raw bytes.
  void String(const std::string &s) {
    U32(static_cast<uint32_t>(s.size()));
    Bytes(s.data(), s.size());
  }

  void Close() {
    os_.flush();
    if (!os_) throw Error(ErrorCode::kIo, "write to " + path_ + " failed");
    os_.close();
  }

 private:
  std::string path_;
  std::ofstream os_;
};

// Reads with bounds checking against the file size, so a corrupt length
// field cannot trigger a huge allocation.
class BinaryReader {
 public:
  explicit BinaryReader(const std::string &path)
      : path_(path), is_(path, std::ios::binary) {
    if (!is_) throw Error(ErrorCode::kIo, "cannot open " + path);
    is_.seekg(0, std::ios::end);
    size_ = static_cast<uint64_t>(is_.tellg());
    is_.seekg(0, std::ios::beg);
  }

  uint64_t remaining() const { return size_ - pos_; }
  bool AtEnd() const { return pos_ == size_; }
  const std::string &path() const { return path_; }

  void Require(uint64_t n, const char *what) const {
    if (n > remaining()) {
      throw Error(ErrorCode::kCorruptFile,
                  path_ + ": truncated while reading " + what);
    }
  }

  void Bytes(void *out, std::size_t n, const char *what) {
    Require(n, what);
    is_.read(static_cast<char *>(out), static_cast<std::streamsize>(n));
    if (!is_) throw Error(ErrorCode::kCorruptFile, path_ + ": read failed");
    pos_ += n;
  }
  uint8_t U8(const char *what) {
    uint8_t v;
    Bytes(&v, 1, what);
    return v;
  }
  uint32_t U32(const char *what) {
    uint32_t v;
    Bytes(&v, 4, what);
    return ToLittle(v);
  }
  uint64_t U64(const char *what) {
    uint64_t v;
    Bytes(&v, 8, what);
    return ToLittle(v);
  }
  void F32s(std::span<float> out, const char *what) {
    Bytes(out.data(), out.size() * sizeof(float), what);
    if constexpr (std::endian::native == std::endian::big) {
      for (float &f : out) {
        f = std::bit_cast<float>(ToLittle(std::bit_cast<uint32_t>(f)));
      }
    }
  }
  void U32s(std::span<uint32_t> out, const char *what) {
    Bytes(out.data(), out.size() * sizeof(uint32_t), what);
    if constexpr (std::endian::native == std::endian::big) {
      for (uint32_t &v : out) v = ToLittle(v);
    }
  }
  std::string String(const char *what) {
    uint32_t n = U32(what);
    Require(n, what);
    std::string s(n, '\0');
    Bytes(s.data(), n, what);
    return s;
  }

 private:
  std::string path_;
  std::ifstream is_;
  uint64_t size_ = 0;
  uint64_t pos_ = 0;
};

}  // namespace knnctc::internal

#endif  // KNNCTC_SRC_BINARY_IO_H_
