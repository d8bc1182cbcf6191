#pragma once

#include "emw/tensor.hpp"

namespace emw {

// Number of independent real-DFT modes of a length-n signal: n/2 + 1.
int max_modes(int n);

// Unnormalized forward real DFT, modes 0..r-1:
//   re[k] = sum_i x[i] cos(2 pi k i / n),  im[k] = -sum_i x[i] sin(2 pi k i / n).
// Uses a radix-2 FFT when n is a power of two, a direct sum otherwise.
void real_dft(const double* x, int n, int r, double* re, double* im);

// Inverse of the truncated real DFT with hermitian-symmetry weights,
//   x[i] = (1/n) sum_k w_k (re[k] cos(2 pi k i / n) - im[k] sin(2 pi k i / n)),
// where w_k = 1 for k = 0 and for the Nyquist mode (n even, k = n/2), else 2.
// Dropped modes are treated as zero. Exact round trip when r = max_modes(n).
void real_idft_pad(const double* re, const double* im, int r, int n, double* x);

// Tape op: per-row truncated spectrum of x [m, n] -> [m, 2r], each row laid
// out as [re_0..re_{r-1}, im_0..im_{r-1}]. Backward is the real adjoint.
Tensor rfft_truncate(Tape& tape, const Tensor& x, int r);

// Tape op: per-row weighted inverse of a truncated spectrum [m, 2r] -> [m, n].
Tensor irfft_pad(Tape& tape, const Tensor& x, int n);

}  // namespace emw
