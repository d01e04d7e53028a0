#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <vector>

#include "parfft/common.hpp"
#include "parfft/dense.hpp"

namespace parfft {

using Complex = std::complex<double>;

enum class Direction { forward, backward };

inline Direction reverse(Direction d) {
  return d == Direction::forward ? Direction::backward : Direction::forward;
}

/// Precomputed roots of unity. forward(r) = exp(-2*pi*i*r/n) with r reduced
/// mod n, so callers may index with products like j*k; backward conjugates.
class TwiddleTable {
 public:
  explicit TwiddleTable(std::size_t n) : n_(n), roots_(n) {
    detail::require(n >= 1, "TwiddleTable: modulus must be positive");
    for (std::size_t r = 0; r < n; ++r)
      roots_[r] = std::polar(1.0, -2.0 * std::numbers::pi *
                                      static_cast<double>(r) /
                                      static_cast<double>(n));
  }

  std::size_t modulus() const { return n_; }
  Complex forward(std::size_t r) const { return roots_[r % n_]; }
  Complex backward(std::size_t r) const { return std::conj(roots_[r % n_]); }
  Complex twiddle(std::size_t r, Direction d) const {
    return d == Direction::forward ? forward(r) : backward(r);
  }

 private:
  std::size_t n_;
  std::vector<Complex> roots_;
};

/// Direct quadratic-time reference transform. Forward divides by the length,
/// backward does not; angles are computed independently of TwiddleTable.
inline std::vector<Complex> dft_oracle(std::span<const Complex> u,
                                       Direction dir) {
  const std::size_t n = u.size();
  std::vector<Complex> out(n);
  if (n == 0) return out;
  const double sign = dir == Direction::forward ? -1.0 : 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    Complex acc{0.0, 0.0};
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t r = (j * k) % n;
      const double angle =
          sign * 2.0 * std::numbers::pi * static_cast<double>(r) /
          static_cast<double>(n);
      acc += u[j] * Complex{std::cos(angle), std::sin(angle)};
    }
    out[k] = dir == Direction::forward ? acc / static_cast<double>(n) : acc;
  }
  return out;
}

namespace detail {

constexpr bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// Unnormalized in-place power-of-two transform (decimation in time).
class Pow2Fft {
 public:
  explicit Pow2Fft(std::size_t n) : n_(n), table_(n) {
    require(is_pow2(n), "Pow2Fft: length must be a power of two");
    bitrev_.resize(n);
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b)
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
      bitrev_[i] = r;
    }
  }

  std::size_t length() const { return n_; }

  void raw(std::span<Complex> x, Direction dir) const {
    for (std::size_t i = 0; i < n_; ++i)
      if (bitrev_[i] > i) std::swap(x[i], x[bitrev_[i]]);
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t step = n_ / len;
      for (std::size_t blk = 0; blk < n_; blk += len) {
        for (std::size_t r = 0; r < len / 2; ++r) {
          const Complex w = table_.twiddle(r * step, dir);
          Complex& lo = x[blk + r];
          Complex& hi = x[blk + r + len / 2];
          const Complex t = w * hi;
          hi = lo - t;
          lo = lo + t;
        }
      }
    }
  }

 private:
  std::size_t n_;
  TwiddleTable table_;
  std::vector<std::size_t> bitrev_;
};

}  // namespace detail

/// Serial 1-d transform engine for a fixed length. Powers of two run on the
/// radix-2 path; every other length runs the chirp convolution path through
/// a padded power-of-two transform, so the cost stays O(n log n).
class Fft1d {
 public:
  explicit Fft1d(std::size_t n) : n_(n) {
    detail::require(n >= 1, "Fft1d: length must be positive");
    if (detail::is_pow2(n)) {
      pow2_ = std::make_unique<detail::Pow2Fft>(n);
      return;
    }
    const std::size_t L = detail::next_pow2(2 * n - 1);
    pad_ = std::make_unique<detail::Pow2Fft>(L);
    TwiddleTable half(2 * n);  // forward(r) = exp(-i*pi*r/n)
    chirp_.resize(n);
    for (std::size_t j = 0; j < n; ++j)
      chirp_[j] = half.forward((j * j) % (2 * n));
    kernel_fwd_ = kernel_for(Direction::forward, L);
    kernel_bwd_ = kernel_for(Direction::backward, L);
    work_.resize(L);
  }

  std::size_t length() const { return n_; }

  /// In-place transform of one line of length(). Forward scales by 1/n.
  void transform(std::span<Complex> x, Direction dir) {
    detail::require(x.size() == n_, "Fft1d: line length mismatch");
    if (pow2_) {
      pow2_->raw(x, dir);
      if (dir == Direction::forward)
        for (auto& v : x) v /= static_cast<double>(n_);
      return;
    }
    bluestein(x, dir);
  }

 private:
  // Chirp convolution: with c_j = exp(-i*pi*j^2/n) the forward transform is
  //   X_k = c_k * sum_j (u_j c_j) * conj(c_{k-j}),
  // a circular convolution of length pad against the symmetric kernel
  // conj(c); the backward transform conjugates every chirp factor.
  std::vector<Complex> kernel_for(Direction dir, std::size_t L) const {
    std::vector<Complex> b(L, Complex{0.0, 0.0});
    for (std::size_t m = 0; m < n_; ++m) {
      const Complex v =
          dir == Direction::forward ? std::conj(chirp_[m]) : chirp_[m];
      b[m] = v;
      if (m != 0) b[L - m] = v;
    }
    pad_->raw(b, Direction::forward);
    return b;
  }

  void bluestein(std::span<Complex> x, Direction dir) {
    const std::size_t L = work_.size();
    const bool fwd = dir == Direction::forward;
    const auto& kernel = fwd ? kernel_fwd_ : kernel_bwd_;
    for (std::size_t j = 0; j < n_; ++j)
      work_[j] = x[j] * (fwd ? chirp_[j] : std::conj(chirp_[j]));
    for (std::size_t j = n_; j < L; ++j) work_[j] = Complex{0.0, 0.0};
    pad_->raw(work_, Direction::forward);
    for (std::size_t j = 0; j < L; ++j) work_[j] *= kernel[j];
    pad_->raw(work_, Direction::backward);
    const double inv_pad = 1.0 / static_cast<double>(L);
    const double scale = fwd ? inv_pad / static_cast<double>(n_) : inv_pad;
    for (std::size_t k = 0; k < n_; ++k)
      x[k] = work_[k] * (fwd ? chirp_[k] : std::conj(chirp_[k])) * scale;
  }

  std::size_t n_;
  std::unique_ptr<detail::Pow2Fft> pow2_;  // set iff n is a power of two
  std::unique_ptr<detail::Pow2Fft> pad_;   // chirp path otherwise
  std::vector<Complex> chirp_;
  std::vector<Complex> kernel_fwd_;
  std::vector<Complex> kernel_bwd_;
  std::vector<Complex> work_;
};

/// One-shot transform of a whole line.
inline std::vector<Complex> fft(std::span<const Complex> u, Direction dir) {
  std::vector<Complex> out(u.begin(), u.end());
  if (out.empty()) return out;
  Fft1d engine(out.size());
  engine.transform(out, dir);
  return out;
}

/// Transform every line of `a` along `axis` in place. The engine length must
/// equal the axis extent; arrays with zero lines are a no-op.
inline void partial_transform_inplace(DenseArray<Complex>& a, std::size_t axis,
                                      Direction dir, Fft1d& engine,
                                      std::vector<Complex>* scratch = nullptr) {
  detail::require(axis < a.ndim(), "partial_transform: axis out of range");
  const std::size_t extent = a.shape()[axis];
  detail::require(engine.length() == extent,
                  "partial_transform: engine length does not match the axis");
  if (a.size() == 0) return;
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= a.shape()[i];
  for (std::size_t i = axis + 1; i < a.ndim(); ++i) inner *= a.shape()[i];
  if (inner == 1) {
    for (std::size_t o = 0; o < outer; ++o)
      engine.transform({a.data() + o * extent, extent}, dir);
    return;
  }
  std::vector<Complex> local;
  std::vector<Complex>& line = scratch ? *scratch : local;
  line.resize(extent);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      Complex* base = a.data() + o * extent * inner + i;
      for (std::size_t k = 0; k < extent; ++k) line[k] = base[k * inner];
      engine.transform(line, dir);
      for (std::size_t k = 0; k < extent; ++k) base[k * inner] = line[k];
    }
  }
}

inline DenseArray<Complex> partial_transform(const DenseArray<Complex>& a,
                                             std::size_t axis, Direction dir) {
  DenseArray<Complex> out = a;
  detail::require(axis < out.ndim(), "partial_transform: axis out of range");
  if (out.shape()[axis] == 0 || out.size() == 0) return out;
  Fft1d engine(out.shape()[axis]);
  partial_transform_inplace(out, axis, dir, engine);
  return out;
}

/// Serial n-dimensional reference built from dft_oracle lines: the forward
/// product applies the trailing axis first, the backward product undoes the
/// axes in the opposite order.
inline DenseArray<Complex> dftn_oracle(const DenseArray<Complex>& a,
                                       Direction dir) {
  DenseArray<Complex> out = a;
  const std::size_t d = out.ndim();
  if (out.size() == 0) return out;
  std::vector<std::size_t> axes(d);
  for (std::size_t i = 0; i < d; ++i)
    axes[i] = dir == Direction::forward ? d - 1 - i : i;
  for (std::size_t axis : axes) {
    const std::size_t extent = out.shape()[axis];
    if (extent == 0) continue;
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= out.shape()[i];
    for (std::size_t i = axis + 1; i < d; ++i) inner *= out.shape()[i];
    std::vector<Complex> line(extent);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < inner; ++i) {
        Complex* base = out.data() + o * extent * inner + i;
        for (std::size_t k = 0; k < extent; ++k) line[k] = base[k * inner];
        std::vector<Complex> t = dft_oracle(line, dir);
        for (std::size_t k = 0; k < extent; ++k) base[k * inner] = t[k];
      }
    }
  }
  return out;
}

}  // namespace parfft
