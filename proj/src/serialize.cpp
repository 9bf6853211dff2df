#include "lleda/serialize.hpp"

#include <bit>
#include <fstream>
#include <iterator>

namespace lleda {

namespace {
constexpr std::string_view kTensorMagic = "LLT1";
constexpr std::uint8_t kMaxRank = 8;

template <typename Scalar>
constexpr PrecisionFlag flag_for() {
  return sizeof(Scalar) == 4 ? PrecisionFlag::f32 : PrecisionFlag::f64;
}
}  // namespace

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteReader::need(std::size_t n) const {
  if (remaining() < n) {
    fail("unexpected end of stream: need " + std::to_string(n) + " bytes, " + std::to_string(remaining()) +
         " left");
  }
}

std::uint8_t ByteReader::u8() {
  need(1);
  return data_[pos_++];
}

std::uint32_t ByteReader::u32_be() {
  need(4);
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | data_[pos_ + i];
  pos_ += 4;
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }
double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::span<const std::uint8_t> ByteReader::raw(std::size_t n) {
  need(n);
  auto s = data_.subspan(pos_, n);
  pos_ += n;
  return s;
}

void ByteReader::expect_magic(std::string_view magic) {
  const std::size_t at = pos_;
  auto got = raw(magic.size());
  if (!std::equal(got.begin(), got.end(), magic.begin())) {
    throw FormatError("bad magic, expected \"" + std::string(magic) + "\"", at);
  }
}

template <typename Scalar>
void write_tensor(ByteWriter& out, const Tensor<Scalar>& t) {
  out.raw(kTensorMagic);
  out.u8(static_cast<std::uint8_t>(t.rank()));
  for (Index e : t.shape()) out.u64(static_cast<std::uint64_t>(e));
  out.u8(static_cast<std::uint8_t>(flag_for<Scalar>()));
  for (Scalar v : t.data()) {
    if constexpr (sizeof(Scalar) == 4) {
      out.f32(v);
    } else {
      out.f64(v);
    }
  }
}

template <typename Scalar>
Tensor<Scalar> read_tensor(ByteReader& in) {
  in.expect_magic(kTensorMagic);
  const std::size_t rank_at = in.offset();
  const std::uint8_t rank = in.u8();
  if (rank > kMaxRank) throw FormatError("tensor rank " + std::to_string(rank) + " exceeds limit", rank_at);
  Shape shape;
  std::uint64_t numel = 1;
  for (std::uint8_t i = 0; i < rank; ++i) {
    const std::size_t at = in.offset();
    const std::uint64_t e = in.u64();
    if (e == 0 || e > (std::uint64_t{1} << 40) || numel * e > (std::uint64_t{1} << 40)) {
      throw FormatError("invalid tensor extent " + std::to_string(e), at);
    }
    numel *= e;
    shape.push_back(static_cast<Index>(e));
  }
  const std::size_t flag_at = in.offset();
  const auto flag = static_cast<PrecisionFlag>(in.u8());
  if (flag != PrecisionFlag::f32 && flag != PrecisionFlag::f64) {
    throw FormatError("unknown precision flag " + std::to_string(static_cast<int>(flag)), flag_at);
  }
  if (flag != flag_for<Scalar>()) throw FormatError("tensor precision does not match the requested scalar type", flag_at);
  if (in.remaining() / sizeof(Scalar) < numel) in.fail("tensor payload truncated");
  std::vector<Scalar> values(numel);
  for (auto& v : values) {
    if constexpr (sizeof(Scalar) == 4) {
      v = in.f32();
    } else {
      v = in.f64();
    }
  }
  return Tensor<Scalar>::from_values(std::move(shape), std::span<const Scalar>(values));
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

template void write_tensor<float>(ByteWriter&, const Tensor<float>&);
template void write_tensor<double>(ByteWriter&, const Tensor<double>&);
template Tensor<float> read_tensor<float>(ByteReader&);
template Tensor<double> read_tensor<double>(ByteReader&);

}  // namespace lleda
