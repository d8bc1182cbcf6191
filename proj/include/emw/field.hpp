// field.hpp — 1D grids, material layout, wave-packet initial conditions
#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace emw {

struct Grid1D {
    int n_cells = 0;
    double lo = 0.0;
    double hi = 1.0;

    Grid1D() = default;
    Grid1D(int n, double lo_, double hi_);

    double dx() const { return (hi - lo) / n_cells; }
    double cell_center(int i) const { return lo + (i + 0.5) * dx(); }
    double face_pos(int f) const { return lo + f * dx(); }
};

// Two homogeneous regions split at x_j; c1 on the left, c2 on the right.
struct MaterialLayout {
    double c1 = 1.0;
    double c2 = 1.0;
    double x_j = 0.5;

    MaterialLayout() = default;
    MaterialLayout(double c1_, double c2_, double xj);

    bool uniform() const { return c1 == c2; }
    double speed_at(double x) const { return x < x_j ? c1 : c2; }
};

enum class TestCase : std::uint8_t { Case1 = 1, Case2 = 2 };

// Random-parameter wave packet: Gaussian envelope, optionally sine-modulated.
// All derived fields are fixed functions of the unit draws r1, r2.
struct WavePacketSpec {
    double r1 = 0.0;
    double r2 = 0.0;
    double r3 = 0.0;  // unused for Case1
    double x_g = 0.25;
    double sigma = 0.0;
    double x_s = 0.0;
    double k = 0.0;
    bool pure_gaussian = false;
    TestCase test_case = TestCase::Case1;

    static WavePacketSpec from_draws(TestCase c, double r1, double r2, double r3 = 0.0);
};

struct FieldState {
    std::vector<double> e;
    std::vector<double> b;
    double time = 0.0;
    int step = 0;
};

// Pointwise packet amplitude: g(x) or g(x)*sin(2*pi*k*(x - x_s)),
// g(x) = exp(-(x - x_g)^2 / sigma^2).
double wave_packet(const WavePacketSpec& spec, double x);

// Cell-averaged right-moving initial data E0 = phi, B0 = phi/c1
// (4-point Gauss-Legendre per cell). Throws if the envelope leaks a
// tail-energy fraction >= 1e-6 past the interface.
FieldState initial_state(const WavePacketSpec& spec, const Grid1D& grid,
                         const MaterialLayout& mat);

// Tail-energy fraction of the squared envelope beyond x_j.
double envelope_tail_fraction(const WavePacketSpec& spec, double x_j);

// Cell average of an arbitrary function by 4-point Gauss-Legendre.
double cell_average(const Grid1D& grid, int i, const std::function<double(double)>& f);

}  // namespace emw
