#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lleda/errors.hpp"
#include "lleda/tensor.hpp"

namespace lleda {

using Bytes = std::vector<std::uint8_t>;

/// Appends little-endian primitives to a byte buffer.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { put_le(v); }
  void u32(std::uint32_t v) { put_le(v); }
  void u64(std::uint64_t v) { put_le(v); }
  void i64(std::int64_t v) { put_le(static_cast<std::uint64_t>(v)); }
  void f32(float v);
  void f64(double v);
  void raw(std::span<const std::uint8_t> bytes) { out_.insert(out_.end(), bytes.begin(), bytes.end()); }
  void raw(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }

  std::size_t size() const { return out_.size(); }
  const Bytes& bytes() const& { return out_; }
  Bytes take() && { return std::move(out_); }

 private:
  template <typename U>
  void put_le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  Bytes out_;
};

/// Cursor over a byte span; every failure reports the offset where it happened.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8();
  std::uint16_t u16() { return get_le<std::uint16_t>(); }
  std::uint32_t u32() { return get_le<std::uint32_t>(); }
  std::uint64_t u64() { return get_le<std::uint64_t>(); }
  std::int64_t i64() { return static_cast<std::int64_t>(get_le<std::uint64_t>()); }
  std::uint32_t u32_be();
  float f32();
  double f64();
  std::span<const std::uint8_t> raw(std::size_t n);
  void expect_magic(std::string_view magic);

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

  [[noreturn]] void fail(const std::string& what) const { throw FormatError(what, pos_); }

 private:
  void need(std::size_t n) const;
  template <typename U>
  U get_le() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(data_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

/// Precision flag byte of the tensor record.
enum class PrecisionFlag : std::uint8_t { f32 = 4, f64 = 8 };

/// Tensor record: "LLT1", u8 rank, u64 extents[rank], u8 precision flag, payload
/// (row-major, little-endian f32 or f64).
template <typename Scalar>
void write_tensor(ByteWriter& out, const Tensor<Scalar>& t);

/// Reads one tensor record. The record precision must match `Scalar`.
template <typename Scalar>
Tensor<Scalar> read_tensor(ByteReader& in);

template <typename Scalar>
Bytes encode_tensor(const Tensor<Scalar>& t) {
  ByteWriter w;
  write_tensor(w, t);
  return std::move(w).take();
}

template <typename Scalar>
Tensor<Scalar> decode_tensor(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  return read_tensor<Scalar>(r);
}

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace lleda
