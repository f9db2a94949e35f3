#ifndef ESCORT_WEIGHT_IO_HPP
#define ESCORT_WEIGHT_IO_HPP

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "escort/csr.hpp"
#include "escort/tensor.hpp"

namespace escort {

// Little-endian CSR weight file:
//
//   offset  size        field
//   0       4           magic "ESCN"
//   4       4  u32      version (1)
//   8       4  u32      flags; bit 0 = stretched
//   [12     4  u32      h_pad   (stretched only)
//    16     4  u32      w_pad   (stretched only)]
//   ..      4  u32      rows
//   ..      4  u32      cols
//   ..      8  u64      nnz
//   ..      8*(rows+1)  rowptr, u64 each
//   ..      4*nnz       colidx, u32 each
//   ..      4*nnz       value, IEEE-754 binary32 each
//
// Nothing may follow the value array.

inline constexpr char kWeightMagic[4] = {'E', 'S', 'C', 'N'};
inline constexpr std::uint32_t kWeightVersion = 1;
inline constexpr std::uint32_t kFlagStretched = 1u;

class WeightFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& buf) : buf_(buf) {}

  void need(std::size_t n, const char* what) const {
    if (buf_.size() - pos_ < n)
      throw WeightFormatError(std::string("truncated payload while reading ") + what);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{buf_[pos_++]} << (8 * i);
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{buf_[pos_++]} << (8 * i);
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::size_t remaining() const { return buf_.size() - pos_; }
  std::size_t pos() const { return pos_; }
  void skip(std::size_t n) { pos_ += n; }
  const std::uint8_t* here() const { return buf_.data() + pos_; }

 private:
  const std::vector<std::uint8_t>& buf_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> encode_weights(const CsrMatrix& a) {
  validate_csr(a);
  if (a.rows > UINT32_MAX || a.cols > UINT32_MAX)
    throw std::invalid_argument("matrix extents exceed the 32-bit header fields");
  detail::ByteWriter out;
  out.raw(kWeightMagic, 4);
  out.u32(kWeightVersion);
  out.u32(a.stretched() ? kFlagStretched : 0u);
  if (a.stretched()) {
    out.u32(static_cast<std::uint32_t>(a.stretch->h_pad));
    out.u32(static_cast<std::uint32_t>(a.stretch->w_pad));
  }
  out.u32(static_cast<std::uint32_t>(a.rows));
  out.u32(static_cast<std::uint32_t>(a.cols));
  out.u64(a.nnz());
  for (auto p : a.rowptr) out.u64(p);
  for (auto c : a.colidx) out.u32(c);
  for (auto v : a.value) out.f32(v);
  return out.take();
}

/// Decodes and validates a weight file image. For stretched matrices the
/// logical kernel width is not stored; pass the layer shape to recover it
/// (and to check the padded extents), otherwise kernel_cols is left 0.
inline CsrMatrix decode_weights(const std::vector<std::uint8_t>& bytes,
                                const std::optional<ConvShape>& shape = std::nullopt) {
  detail::ByteReader in(bytes);
  in.need(4, "magic");
  if (std::memcmp(in.here(), kWeightMagic, 4) != 0) throw WeightFormatError("bad magic (expected ESCN)");
  in.skip(4);
  if (const auto ver = in.u32("version"); ver != kWeightVersion)
    throw WeightFormatError("unsupported version " + std::to_string(ver));
  const std::uint32_t flags = in.u32("flags");
  if (flags & ~kFlagStretched) throw WeightFormatError("unknown flag bits set");

  CsrMatrix a;
  if (flags & kFlagStretched) {
    StretchDims sd;
    sd.h_pad = in.u32("h_pad");
    sd.w_pad = in.u32("w_pad");
    a.stretch = sd;
  }
  a.rows = in.u32("rows");
  a.cols = in.u32("cols");
  const std::uint64_t nnz = in.u64("nnz");

  // Size check up front so a corrupt count cannot trigger a huge allocation.
  const std::size_t rowptr_bytes = 8 * (a.rows + 1);
  if (nnz > in.remaining() / 8 || in.remaining() < rowptr_bytes + 8 * nnz)
    throw WeightFormatError("truncated payload: header announces more data than the file holds");
  if (in.remaining() > rowptr_bytes + 8 * nnz) throw WeightFormatError("trailing bytes after value array");

  a.rowptr.resize(a.rows + 1);
  for (auto& p : a.rowptr) p = in.u64("rowptr");
  a.colidx.resize(nnz);
  for (auto& c : a.colidx) c = in.u32("colidx");
  a.value.resize(nnz);
  for (auto& v : a.value) v = in.f32("value");

  if (auto why = csr_violation(a); !why.empty()) throw WeightFormatError("invariant violated: " + why);

  if (!a.stretched()) {
    a.kernel_cols = a.cols;
    if (shape && (a.rows != shape->m() || a.cols != shape->kernel_cols()))
      throw WeightFormatError("matrix extents do not match the layer shape");
  } else if (shape) {
    if (*a.stretch != StretchDims{shape->h_pad(), shape->w_pad()} || a.rows != shape->m() ||
        a.cols != shape->c() * shape->h_pad() * shape->w_pad())
      throw WeightFormatError("stretched extents do not match the layer shape");
    a.kernel_cols = shape->kernel_cols();
  }
  return a;
}

inline void write_weights(const CsrMatrix& a, const std::string& path) {
  const auto bytes = encode_weights(a);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::ios_base::failure("cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::ios_base::failure("write to '" + path + "' failed");
}

inline CsrMatrix read_weights(const std::string& path,
                              const std::optional<ConvShape>& shape = std::nullopt) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::ios_base::failure("cannot open '" + path + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_weights(bytes, shape);
}

}  // namespace escort

#endif  // ESCORT_WEIGHT_IO_HPP
