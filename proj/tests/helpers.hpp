// Shared test utilities: finite-difference gradient checking, independent
// reference implementations, and filesystem scratch space.
#pragma once

#include <cmath>
#include <complex>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <unistd.h>
#include <utility>
#include <vector>

#include "doctest.h"
#include "emw/field.hpp"
#include "emw/tensor.hpp"

namespace emwtest {

// Unique scratch directory, removed on destruction.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        static int counter = 0;
        std::ostringstream name;
        name << "emw_test_" << ::getpid() << "_" << counter++;
        path = std::filesystem::temp_directory_path() / name.str();
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline std::string read_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE_MESSAGE(bool(f), ("cannot open " + path));
    return std::string((std::istreambuf_iterator<char>(f)),
                       std::istreambuf_iterator<char>());
}

// Builds a fresh graph per evaluation; used both for the analytic pass and
// for every finite-difference probe.
using GraphFn = std::function<emw::Tensor(emw::Tape&, const std::vector<emw::Tensor>&)>;

struct GradInput {
    std::vector<int> shape;
    std::vector<double> values;
};

// Central-difference check of every input coordinate: the analytic gradient
// must match within rel_tol relative error with an abs_floor absolute floor.
inline void check_gradients(const GraphFn& build, std::vector<GradInput> inputs,
                            double rel_tol = 1e-5, double abs_floor = 1e-8) {
    const auto eval = [&](const std::vector<GradInput>& ins,
                          std::vector<std::vector<double>>* grads) {
        emw::Tape tape;
        std::vector<emw::Tensor> leaves;
        leaves.reserve(ins.size());
        for (const auto& in : ins)
            leaves.push_back(tape.leaf(in.shape, in.values, grads != nullptr));
        emw::Tensor loss = build(tape, leaves);
        REQUIRE(loss.size() == 1);
        if (grads) {
            tape.backward(loss);
            grads->clear();
            for (const auto& leaf : leaves) grads->push_back(tape.grad(leaf));
        }
        return loss.at(0);
    };

    std::vector<std::vector<double>> analytic;
    eval(inputs, &analytic);

    for (std::size_t i = 0; i < inputs.size(); ++i)
        for (std::size_t j = 0; j < inputs[i].values.size(); ++j) {
            const double x = inputs[i].values[j];
            const double h = 1e-5 * std::max(1.0, std::abs(x));
            auto probe = inputs;
            probe[i].values[j] = x + h;
            const double up = eval(probe, nullptr);
            probe[i].values[j] = x - h;
            const double dn = eval(probe, nullptr);
            const double fd = (up - dn) / (2.0 * h);
            const double an = analytic[i][j];
            const double err = std::abs(an - fd);
            const double bound =
                rel_tol * std::max(std::abs(an), std::abs(fd)) + abs_floor;
            REQUIRE_MESSAGE(err <= bound, "input " << i << " coord " << j
                                                   << ": analytic " << an << " vs fd "
                                                   << fd);
        }
}

// Cell average recomputed on `splits` subintervals, each with the library's
// quadrature; a sharper estimate of the true integral.
inline double refined_cell_average(const emw::Grid1D& grid, int i,
                                   const std::function<double(double)>& f,
                                   int splits) {
    const double a = grid.lo + i * grid.dx();
    const double w = grid.dx() / splits;
    double sum = 0.0;
    for (int s = 0; s < splits; ++s) {
        const emw::Grid1D sub(splits, a + s * w, a + s * w + splits * w);
        sum += emw::cell_average(sub, 0, f);
    }
    return sum / splits;
}

// Log-parabola refinement of an extremum from three samples around the
// grid argmax; exact for Gaussians sampled fine enough.
struct PeakFit {
    double x = 0.0;
    double value = 0.0;
};

inline PeakFit fit_log_parabola(double x0, double h, double y_minus, double y0,
                                double y_plus) {
    const double sign = y0 < 0.0 ? -1.0 : 1.0;
    const double lm = std::log(std::abs(y_minus));
    const double l0 = std::log(std::abs(y0));
    const double lp = std::log(std::abs(y_plus));
    const double a = (lp - lm) / 2.0;
    const double b = (lp - 2.0 * l0 + lm) / 2.0;
    PeakFit fit;
    fit.x = x0 - h * a / (2.0 * b);
    fit.value = sign * std::exp(l0 - a * a / (4.0 * b));
    return fit;
}

// Energy-weighted RMS width of a field segment.
inline double second_moment_width(const std::vector<double>& xs,
                                  const std::vector<double>& es) {
    double w = 0.0, wx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        w += es[i] * es[i];
        wx += es[i] * es[i] * xs[i];
    }
    const double mean = wx / w;
    double wxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i)
        wxx += es[i] * es[i] * (xs[i] - mean) * (xs[i] - mean);
    return std::sqrt(wxx / w);
}

// Textbook O(n^2) complex DFT, the independent reference for the FFT module.
inline std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
    const int n = static_cast<int>(x.size());
    std::vector<std::complex<double>> out(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        std::complex<double> s(0.0, 0.0);
        for (int i = 0; i < n; ++i) {
            const double ang = -2.0 * M_PI * k * i / n;
            s += x[static_cast<std::size_t>(i)] *
                 std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[static_cast<std::size_t>(k)] = s;
    }
    return out;
}

}  // namespace emwtest
