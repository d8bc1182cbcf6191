#include "emw/fft.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace emw {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey, in place, unnormalized forward transform.
void fft_pow2(std::vector<std::complex<double>>& a) {
    const int n = static_cast<int>(a.size());
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        const double ang = -kTwoPi / len;
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (int j = 0; j < len / 2; ++j) {
                const std::complex<double> u = a[i + j];
                const std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

double mode_weight(int k, int n) {
    if (k == 0) return 1.0;
    if (n % 2 == 0 && k == n / 2) return 1.0;
    return 2.0;
}

void check_modes(int r, int n, const char* op) {
    if (n <= 0 || r <= 0 || r > max_modes(n))
        throw std::invalid_argument(std::string(op) + ": mode count out of range");
}

}  // namespace

int max_modes(int n) { return n / 2 + 1; }

void real_dft(const double* x, int n, int r, double* re, double* im) {
    check_modes(r, n, "real_dft");
    if (is_pow2(n)) {
        std::vector<std::complex<double>> a(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) a[i] = {x[i], 0.0};
        fft_pow2(a);
        for (int k = 0; k < r; ++k) {
            re[k] = a[k].real();
            im[k] = a[k].imag();
        }
        return;
    }
    for (int k = 0; k < r; ++k) {
        double sr = 0.0, si = 0.0;
        for (int i = 0; i < n; ++i) {
            const double ang = kTwoPi * k * i / n;
            sr += x[i] * std::cos(ang);
            si -= x[i] * std::sin(ang);
        }
        re[k] = sr;
        im[k] = si;
    }
}

void real_idft_pad(const double* re, const double* im, int r, int n, double* x) {
    check_modes(r, n, "real_idft_pad");
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int k = 0; k < r; ++k) {
            const double ang = kTwoPi * k * i / n;
            s += mode_weight(k, n) *
                 (re[k] * std::cos(ang) - im[k] * std::sin(ang));
        }
        x[i] = s / n;
    }
}

Tensor rfft_truncate(Tape& tape, const Tensor& x, int r) {
    if (x.shape.size() != 2)
        throw std::invalid_argument("rfft_truncate: rank-2 tensor required");
    const int m = x.rows(), n = x.cols();
    check_modes(r, n, "rfft_truncate");
    std::vector<double> out(static_cast<std::size_t>(m) * 2 * r);
    for (int i = 0; i < m; ++i)
        real_dft(x.ptr() + static_cast<std::size_t>(i) * n, n, r,
                 out.data() + static_cast<std::size_t>(i) * 2 * r,
                 out.data() + static_cast<std::size_t>(i) * 2 * r + r);
    return tape.node(
        {m, 2 * r}, std::move(out), {&x},
        [x, m, n, r](const double* g, Tape& t) {
            auto* gx = t.grad_buffer(x.id);
            if (!gx) return;
            for (int i = 0; i < m; ++i) {
                const double* gre = g + static_cast<std::size_t>(i) * 2 * r;
                const double* gim = gre + r;
                for (int j = 0; j < n; ++j) {
                    double s = 0.0;
                    for (int k = 0; k < r; ++k) {
                        const double ang = kTwoPi * k * j / n;
                        s += gre[k] * std::cos(ang) - gim[k] * std::sin(ang);
                    }
                    (*gx)[static_cast<std::size_t>(i) * n + j] += s;
                }
            }
        });
}

Tensor irfft_pad(Tape& tape, const Tensor& x, int n) {
    if (x.shape.size() != 2)
        throw std::invalid_argument("irfft_pad: rank-2 tensor required");
    if (x.cols() % 2 != 0)
        throw std::invalid_argument("irfft_pad: column count must be 2r");
    const int m = x.rows(), r = x.cols() / 2;
    check_modes(r, n, "irfft_pad");
    std::vector<double> out(static_cast<std::size_t>(m) * n);
    for (int i = 0; i < m; ++i)
        real_idft_pad(x.ptr() + static_cast<std::size_t>(i) * 2 * r,
                      x.ptr() + static_cast<std::size_t>(i) * 2 * r + r, r, n,
                      out.data() + static_cast<std::size_t>(i) * n);
    return tape.node(
        {m, n}, std::move(out), {&x},
        [x, m, n, r](const double* g, Tape& t) {
            auto* gx = t.grad_buffer(x.id);
            if (!gx) return;
            for (int i = 0; i < m; ++i) {
                const double* gi = g + static_cast<std::size_t>(i) * n;
                double* gre = gx->data() + static_cast<std::size_t>(i) * 2 * r;
                double* gim = gre + r;
                for (int k = 0; k < r; ++k) {
                    const double w = mode_weight(k, n) / n;
                    double sr = 0.0, si = 0.0;
                    for (int j = 0; j < n; ++j) {
                        const double ang = kTwoPi * k * j / n;
                        sr += gi[j] * std::cos(ang);
                        si -= gi[j] * std::sin(ang);
                    }
                    gre[k] += w * sr;
                    gim[k] += w * si;
                }
            }
        });
}

}  // namespace emw
