#include "sbd/operators.hpp"

#include <cmath>
#include <numbers>

namespace sbd {

namespace fft {

static bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

void transform(CVec& data, bool inverse) {
  const int n = static_cast<int>(data.size());
  if (!is_pow2(n)) throw std::domain_error("fft: length must be a power of two");
  // bit-reversal permutation
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  for (int len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * std::numbers::pi / len * (inverse ? 1.0 : -1.0);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (int i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (int k = 0; k < len / 2; ++k) {
        const std::complex<double> u = data[i + k];
        const std::complex<double> v = data[i + k + len / 2] * w;
        data[i + k] = u + v;
        data[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

CVec dft(CVec data) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(data.size()));
  transform(data, false);
  return data * scale;
}

CVec idft(CVec data) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(data.size()));
  transform(data, true);
  return data * scale;
}

static CVec dft2_impl(CVec data, int rows, int cols, bool inverse) {
  if (data.size() != static_cast<Eigen::Index>(rows) * cols)
    throw std::domain_error("dft2: size mismatch");
  CVec out = std::move(data);
  CVec scratch;
  for (int r = 0; r < rows; ++r) {
    scratch = out.segment(static_cast<Eigen::Index>(r) * cols, cols);
    transform(scratch, inverse);
    out.segment(static_cast<Eigen::Index>(r) * cols, cols) = scratch;
  }
  scratch.resize(rows);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) scratch[r] = out[static_cast<Eigen::Index>(r) * cols + c];
    transform(scratch, inverse);
    for (int r = 0; r < rows; ++r) out[static_cast<Eigen::Index>(r) * cols + c] = scratch[r];
  }
  return out * (1.0 / std::sqrt(static_cast<double>(rows) * cols));
}

CVec dft2(CVec data, int rows, int cols) { return dft2_impl(std::move(data), rows, cols, false); }
CVec idft2(CVec data, int rows, int cols) { return dft2_impl(std::move(data), rows, cols, true); }

}  // namespace fft

LinearOperator LinearOperator::identity(int n) {
  LinearOperator op;
  op.kind_ = Kind::kIdentity;
  op.domain_dim_ = op.codomain_dim_ = n;
  return op;
}

LinearOperator LinearOperator::dense(Mat a) {
  LinearOperator op;
  op.kind_ = Kind::kDense;
  op.domain_dim_ = static_cast<int>(a.cols());
  op.codomain_dim_ = static_cast<int>(a.rows());
  op.dense_ = std::move(a);
  return op;
}

LinearOperator LinearOperator::dft(int n) {
  LinearOperator op;
  op.kind_ = Kind::kDft;
  op.n_ = n;
  op.domain_dim_ = op.codomain_dim_ = 2 * n;
  return op;
}

LinearOperator LinearOperator::adjoint_dft(int n) {
  LinearOperator op;
  op.kind_ = Kind::kAdjointDft;
  op.n_ = n;
  op.domain_dim_ = op.codomain_dim_ = 2 * n;
  return op;
}

LinearOperator LinearOperator::masked_dft(int n, std::vector<std::uint8_t> mask, bool real_domain) {
  return masked_dft2(1, n, std::move(mask), real_domain);
}

LinearOperator LinearOperator::masked_dft2(int rows, int cols, std::vector<std::uint8_t> mask,
                                           bool real_domain) {
  LinearOperator op;
  op.kind_ = Kind::kMaskedDft;
  op.rows_ = rows;
  op.cols_ = cols;
  op.n_ = rows * cols;
  if (static_cast<int>(mask.size()) != op.n_)
    throw std::domain_error("masked_dft: mask length mismatch");
  op.mask_ = std::move(mask);
  op.real_domain_ = real_domain;
  op.mask_count_ = 0;
  for (auto m : op.mask_)
    if (m) ++op.mask_count_;
  op.domain_dim_ = real_domain ? op.n_ : 2 * op.n_;
  op.codomain_dim_ = 2 * op.mask_count_;
  return op;
}

CVec LinearOperator::full_dft(const Vec& x) const {
  CVec z(n_);
  if (real_domain_) {
    z.real() = x;
    z.imag().setZero();
  } else {
    z = unstack_complex(x);
  }
  return rows_ > 1 ? fft::dft2(std::move(z), rows_, cols_) : fft::dft(std::move(z));
}

Vec LinearOperator::full_idft_to_domain(const CVec& k) const {
  CVec z = rows_ > 1 ? fft::idft2(k, rows_, cols_) : fft::idft(k);
  if (real_domain_) return z.real();  // adjoint of the real embedding
  return stack_complex(z);
}

Vec LinearOperator::apply(const Vec& x) const {
  if (x.size() != domain_dim_) throw std::domain_error("LinearOperator::apply: shape mismatch");
  switch (kind_) {
    case Kind::kIdentity:
      return x;
    case Kind::kDense:
      return dense_ * x;
    case Kind::kDft:
      return stack_complex(fft::dft(unstack_complex(x)));
    case Kind::kAdjointDft:
      return stack_complex(fft::idft(unstack_complex(x)));
    case Kind::kMaskedDft: {
      const CVec k = full_dft(x);
      Vec out(codomain_dim_);
      int j = 0;
      for (int i = 0; i < n_; ++i) {
        if (!mask_[i]) continue;
        out[j] = k[i].real();
        out[mask_count_ + j] = k[i].imag();
        ++j;
      }
      return out;
    }
  }
  throw std::logic_error("LinearOperator::apply: unknown kind");
}

Vec LinearOperator::adjoint(const Vec& y) const {
  if (y.size() != codomain_dim_) throw std::domain_error("LinearOperator::adjoint: shape mismatch");
  switch (kind_) {
    case Kind::kIdentity:
      return y;
    case Kind::kDense:
      return dense_.transpose() * y;
    case Kind::kDft:
      return stack_complex(fft::idft(unstack_complex(y)));
    case Kind::kAdjointDft:
      return stack_complex(fft::dft(unstack_complex(y)));
    case Kind::kMaskedDft: {
      CVec k = CVec::Zero(n_);
      int j = 0;
      for (int i = 0; i < n_; ++i) {
        if (!mask_[i]) continue;
        k[i] = std::complex<double>(y[j], y[mask_count_ + j]);
        ++j;
      }
      return full_idft_to_domain(k);
    }
  }
  throw std::logic_error("LinearOperator::adjoint: unknown kind");
}

Vec extract_masked(const Vec& full_stacked, const std::vector<std::uint8_t>& mask) {
  const int n = static_cast<int>(mask.size());
  if (full_stacked.size() != 2 * n) throw std::domain_error("extract_masked: shape mismatch");
  int count = 0;
  for (auto m : mask)
    if (m) ++count;
  Vec out(2 * count);
  int j = 0;
  for (int i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    out[j] = full_stacked[i];
    out[count + j] = full_stacked[n + i];
    ++j;
  }
  return out;
}

}  // namespace sbd
