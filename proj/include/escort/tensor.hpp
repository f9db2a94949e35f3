#ifndef ESCORT_TENSOR_HPP
#define ESCORT_TENSOR_HPP

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace escort {

/// Output extent of one spatial axis: floor((in + 2*pad - k) / stride) + 1.
/// Throws when the window does not fit even once.
inline std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride,
                                   std::size_t pad) {
  if (stride == 0) throw std::invalid_argument("stride must be >= 1");
  const std::size_t padded = in + 2 * pad;
  if (padded < k)
    throw std::invalid_argument("filter extent " + std::to_string(k) +
                                " exceeds padded input extent " + std::to_string(padded));
  return (padded - k) / stride + 1;
}

/// Shape parameters of one CONV layer (batch, filters, channels, input and
/// filter extents) plus stride and zero padding. Construction validates
/// every field, so a live ConvShape always has e() >= 1 and f() >= 1.
class ConvShape {
 public:
  ConvShape(std::size_t n, std::size_t m, std::size_t c, std::size_t h, std::size_t w,
            std::size_t r, std::size_t s, std::size_t stride = 1, std::size_t pad = 0)
      : n_(n), m_(m), c_(c), h_(h), w_(w), r_(r), s_(s), stride_(stride), pad_(pad) {
    if (n == 0 || m == 0 || c == 0 || h == 0 || w == 0 || r == 0 || s == 0)
      throw std::invalid_argument("n, m, c, h, w, r, s must all be >= 1");
    e_ = conv_out_extent(h, r, stride, pad);
    f_ = conv_out_extent(w, s, stride, pad);
  }

  std::size_t n() const { return n_; }
  std::size_t m() const { return m_; }
  std::size_t c() const { return c_; }
  std::size_t h() const { return h_; }
  std::size_t w() const { return w_; }
  std::size_t r() const { return r_; }
  std::size_t s() const { return s_; }
  std::size_t stride() const { return stride_; }
  std::size_t pad() const { return pad_; }
  std::size_t e() const { return e_; }
  std::size_t f() const { return f_; }
  std::size_t h_pad() const { return h_ + 2 * pad_; }
  std::size_t w_pad() const { return w_ + 2 * pad_; }

  /// Logical width of the kernel matrix (M x CRS).
  std::size_t kernel_cols() const { return c_ * r_ * s_; }
  /// Multiply-accumulates of a dense layer.
  std::size_t dense_macs() const { return n_ * m_ * kernel_cols() * e_ * f_; }

  std::array<std::size_t, 4> input_dims() const { return {n_, c_, h_, w_}; }
  std::array<std::size_t, 4> padded_input_dims() const { return {n_, c_, h_pad(), w_pad()}; }
  std::array<std::size_t, 4> weight_dims() const { return {m_, c_, r_, s_}; }
  std::array<std::size_t, 4> output_dims() const { return {n_, m_, e_, f_}; }

  friend bool operator==(const ConvShape&, const ConvShape&) = default;

 private:
  std::size_t n_, m_, c_, h_, w_, r_, s_, stride_, pad_;
  std::size_t e_ = 0, f_ = 0;
};

inline std::pair<std::size_t, std::size_t> output_dims(const ConvShape& shape) {
  return {shape.e(), shape.f()};
}

/// CHW layout function: offset of element (c, y, x) in a channel stack of
/// h_in x w_in planes. Satisfies f(c, y+r, x+s) = f(c, y, x) + f(0, r, s).
constexpr std::size_t layout_f(std::size_t c, std::size_t y, std::size_t x, std::size_t h_in,
                               std::size_t w_in) {
  return (c * h_in + y) * w_in + x;
}

/// Dense row-major 4-D tensor of 32-bit reals; the last extent is innermost.
class Tensor4D {
 public:
  using Dims = std::array<std::size_t, 4>;

  Tensor4D() = default;
  explicit Tensor4D(Dims dims, float fill = 0.0f)
      : dims_(dims), data_(dims[0] * dims[1] * dims[2] * dims[3], fill) {}
  Tensor4D(Dims dims, std::vector<float> data) : dims_(dims), data_(std::move(data)) {
    if (data_.size() != dims_[0] * dims_[1] * dims_[2] * dims_[3])
      throw std::invalid_argument("tensor data length does not match its dims");
  }

  const Dims& dims() const { return dims_; }
  std::size_t dim(std::size_t i) const { return dims_.at(i); }
  std::size_t size() const { return data_.size(); }

  std::size_t offset(std::size_t a, std::size_t b, std::size_t y, std::size_t x) const {
    return ((a * dims_[1] + b) * dims_[2] + y) * dims_[3] + x;
  }
  Dims unflatten(std::size_t flat) const {
    Dims idx{};
    for (std::size_t k = 4; k-- > 0;) {
      idx[k] = flat % dims_[k];
      flat /= dims_[k];
    }
    return idx;
  }

  float& operator()(std::size_t a, std::size_t b, std::size_t y, std::size_t x) {
    return data_[offset(a, b, y, x)];
  }
  float operator()(std::size_t a, std::size_t b, std::size_t y, std::size_t x) const {
    return data_[offset(a, b, y, x)];
  }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::vector<float>& values() { return data_; }
  const std::vector<float>& values() const { return data_; }

  friend bool operator==(const Tensor4D&, const Tensor4D&) = default;

 private:
  Dims dims_{0, 0, 0, 0};
  std::vector<float> data_;
};

/// SplitMix64 (Steele, Lea, Flood 2014). State advances by the golden-ratio
/// increment 0x9E3779B97F4A7C15 and each output is the state passed through
/// the variant-13 finalizer; pure 64-bit integer arithmetic, so sequences are
/// identical on every platform.
class Rng64 {
 public:
  explicit Rng64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Top 24 bits as a float in [0, 1); exact in binary32.
  float unit() { return static_cast<float>(next() >> 40) * 0x1.0p-24f; }

  /// Uniform in [-range, range).
  float symmetric(float range) { return range * (2.0f * unit() - 1.0f); }

  /// Uniform integer in [0, bound) by rejection.
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("bound must be positive");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % bound;
  }

 private:
  std::uint64_t state_;
};

inline Tensor4D random_tensor(Tensor4D::Dims dims, std::uint64_t seed, float range = 1.0f) {
  Tensor4D t(dims);
  Rng64 rng(seed);
  for (float& v : t.values()) v = rng.symmetric(range);
  return t;
}

/// Zero-pads the two spatial extents by `pad` on every side.
inline Tensor4D pad_input(const Tensor4D& input, std::size_t pad) {
  if (pad == 0) return input;
  const auto [n, c, h, w] = input.dims();
  Tensor4D out({n, c, h + 2 * pad, w + 2 * pad});
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < c; ++b)
      for (std::size_t y = 0; y < h; ++y) {
        const float* src = input.data() + input.offset(a, b, y, 0);
        float* dst = out.data() + out.offset(a, b, y + pad, pad);
        std::copy(src, src + w, dst);
      }
  return out;
}

}  // namespace escort

#endif  // ESCORT_TENSOR_HPP
