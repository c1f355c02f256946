#pragma once

#include <cstdint>
#include <vector>

#include "sbd/common.hpp"

namespace sbd {

namespace fft {
/// In-place radix-2 FFT, unnormalized. Length must be a power of two.
void transform(CVec& data, bool inverse);
/// Unitary DFT / inverse DFT (1/sqrt(N) both ways).
CVec dft(CVec data);
CVec idft(CVec data);
/// Unitary 2-D DFT over a row-major rows x cols grid.
CVec dft2(CVec data, int rows, int cols);
CVec idft2(CVec data, int rows, int cols);
}  // namespace fft

/// Linear sensing map with apply/adjoint. All kinds act on real vectors;
/// complex-valued domains and codomains use the stacked [Re; Im] layout.
class LinearOperator {
 public:
  enum class Kind { kIdentity, kDense, kDft, kAdjointDft, kMaskedDft };

  static LinearOperator identity(int n);
  static LinearOperator dense(Mat a);
  /// Unitary DFT on n complex samples (stacked 2n -> 2n).
  static LinearOperator dft(int n);
  /// Unitary inverse DFT F^H on n complex samples (stacked 2n -> 2n).
  static LinearOperator adjoint_dft(int n);
  /// Row subset of the unitary DFT: keeps coefficients where mask is true.
  /// real_domain selects a real-valued input signal (length n) versus a
  /// complex one (stacked 2n).
  static LinearOperator masked_dft(int n, std::vector<std::uint8_t> mask, bool real_domain = true);
  /// Same, over a 2-D rows x cols grid (mask indexed row-major).
  static LinearOperator masked_dft2(int rows, int cols, std::vector<std::uint8_t> mask,
                                    bool real_domain = true);

  Kind kind() const { return kind_; }
  int domain_dim() const { return domain_dim_; }
  int codomain_dim() const { return codomain_dim_; }
  const std::vector<std::uint8_t>& mask() const { return mask_; }
  int mask_count() const { return mask_count_; }

  Vec apply(const Vec& x) const;
  Vec adjoint(const Vec& y) const;

 private:
  LinearOperator() = default;

  CVec full_dft(const Vec& x) const;         // domain vector -> full coefficient grid
  Vec full_idft_to_domain(const CVec& k) const;

  Kind kind_ = Kind::kIdentity;
  int domain_dim_ = 0;
  int codomain_dim_ = 0;
  int n_ = 0;      // complex length (dft kinds)
  int rows_ = 0;   // 2-D grid (masked dft)
  int cols_ = 0;
  bool real_domain_ = false;
  int mask_count_ = 0;
  Mat dense_;
  std::vector<std::uint8_t> mask_;
};

/// Gathers the mask-true complex coefficients of a full stacked-complex
/// vector into the masked operator's codomain layout.
Vec extract_masked(const Vec& full_stacked, const std::vector<std::uint8_t>& mask);

}  // namespace sbd
