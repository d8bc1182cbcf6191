#include "emw/field.hpp"

#include <cmath>

namespace emw {

namespace {

// 4-point Gauss-Legendre nodes/weights on [-1, 1]
constexpr double kGlNode[4] = {-0.8611363115940526, -0.3399810435848563,
                               0.3399810435848563, 0.8611363115940526};
constexpr double kGlWeight[4] = {0.3478548451374538, 0.6521451548625461,
                                 0.6521451548625461, 0.3478548451374538};

}  // namespace

Grid1D::Grid1D(int n, double lo_, double hi_) : n_cells(n), lo(lo_), hi(hi_) {
    if (n_cells < 8) throw std::invalid_argument("Grid1D: n_cells must be >= 8");
    if (!(hi > lo)) throw std::invalid_argument("Grid1D: domain_hi must exceed domain_lo");
}

MaterialLayout::MaterialLayout(double c1_, double c2_, double xj)
    : c1(c1_), c2(c2_), x_j(xj) {
    if (!(c2 > 0.0 && c2 <= c1 && c1 <= 1.0))
        throw std::invalid_argument("MaterialLayout: need 0 < c2 <= c1 <= 1");
}

WavePacketSpec WavePacketSpec::from_draws(TestCase c, double r1, double r2, double r3) {
    if (r1 < 0.0 || r1 > 1.0 || r2 < 0.0 || r2 > 1.0 || r3 < 0.0 || r3 > 1.0)
        throw std::invalid_argument("WavePacketSpec: draws must lie in [0,1]");
    WavePacketSpec s;
    s.r1 = r1;
    s.r2 = r2;
    s.r3 = (c == TestCase::Case2) ? r3 : 0.0;
    s.x_g = 0.25;
    s.sigma = 0.25 / (5.0 - 2.0 * r1);
    s.x_s = 0.35 + 0.2 * r1;
    s.k = 3.0 + 3.0 * r2;
    s.pure_gaussian = r1 < 0.15;
    s.test_case = c;
    return s;
}

double wave_packet(const WavePacketSpec& spec, double x) {
    const double u = (x - spec.x_g) / spec.sigma;
    const double g = std::exp(-u * u);
    if (spec.pure_gaussian) return g;
    return g * std::sin(2.0 * M_PI * spec.k * (x - spec.x_s));
}

double cell_average(const Grid1D& grid, int i, const std::function<double(double)>& f) {
    const double c = grid.cell_center(i);
    const double h = 0.5 * grid.dx();
    double acc = 0.0;
    for (int q = 0; q < 4; ++q) acc += kGlWeight[q] * f(c + h * kGlNode[q]);
    return 0.5 * acc;
}

double envelope_tail_fraction(const WavePacketSpec& spec, double x_j) {
    // Integral of g^2 = exp(-2(x-x_g)^2/sigma^2) beyond x_j, over the whole line.
    if (x_j <= spec.x_g) return 1.0;
    const double z = std::sqrt(2.0) * (x_j - spec.x_g) / spec.sigma;
    return 0.5 * std::erfc(z);
}

FieldState initial_state(const WavePacketSpec& spec, const Grid1D& grid,
                         const MaterialLayout& mat) {
    const double tail = envelope_tail_fraction(spec, mat.x_j);
    if (tail >= 1e-6)
        throw std::invalid_argument(
            "initial_state: envelope leaks past the interface (tail fraction " +
            std::to_string(tail) + ")");

    FieldState st;
    st.e.resize(grid.n_cells);
    st.b.resize(grid.n_cells);
    st.time = 0.0;
    st.step = 0;
    const auto phi = [&](double x) { return wave_packet(spec, x); };
    for (int i = 0; i < grid.n_cells; ++i) {
        const double avg = cell_average(grid, i, phi);
        st.e[i] = avg;
        st.b[i] = avg / mat.c1;
    }
    return st;
}

}  // namespace emw
