#include "emw/oracle.hpp"

#include <cmath>
#include <stdexcept>

namespace emw {

RTCoefficients reflection_transmission(double c1, double c2) {
    if (!(c1 > 0.0 && c2 > 0.0))
        throw std::invalid_argument("reflection_transmission: speeds must be positive");
    RTCoefficients rt;
    rt.r = (c2 - c1) / (c2 + c1);
    rt.t = 2.0 * c2 / (c1 + c2);
    return rt;
}

// Characteristic tracing with one interface interaction. Initial data is
// E0 = phi, B0 = phi/c1 on the whole line, so besides the main right-moving
// packet there is a small left-moving component in region 2 wherever the
// envelope tail reaches past x_j; both families are traced exactly.
EBPoint exact_solution(const WavePacketSpec& spec, const MaterialLayout& mat,
                       double x, double t) {
    const double c1 = mat.c1, c2 = mat.c2, xj = mat.x_j;
    const double r = (c2 - c1) / (c2 + c1);
    const double t12 = 2.0 * c2 / (c1 + c2);  // right-mover transmission 1 -> 2
    const double t21 = 2.0 * c1 / (c1 + c2);  // left-mover transmission 2 -> 1
    const auto phi = [&](double xi) { return wave_packet(spec, xi); };

    // initial characteristic content per region
    const auto wr1_0 = [&](double xi) { return 2.0 * phi(xi); };           // E + c1*B
    const auto wr2_0 = [&](double xi) { return (1.0 + c2 / c1) * phi(xi); };
    const auto wl2_0 = [&](double xi) { return (1.0 - c2 / c1) * phi(xi); };

    EBPoint p;
    if (x < xj) {
        const double wr = wr1_0(x - c1 * t);
        double wl = 0.0;  // region 1 holds no initial left-movers
        const double t_star = t - (xj - x) / c1;
        if (t_star >= 0.0)
            wl = r * wr1_0(xj - c1 * t_star) + t21 * wl2_0(xj + c2 * t_star);
        p.e = 0.5 * (wr + wl);
        p.b = 0.5 * (wr - wl) / c1;
    } else {
        const double wl = wl2_0(x + c2 * t);
        double wr;
        const double t_star = t - (x - xj) / c2;
        if (t_star >= 0.0)
            wr = t12 * wr1_0(xj - c1 * t_star) - r * wl2_0(xj + c2 * t_star);
        else
            wr = wr2_0(x - c2 * t);
        p.e = 0.5 * (wr + wl);
        p.b = 0.5 * (wr - wl) / c2;
    }
    return p;
}

FieldState oracle_state(const WavePacketSpec& spec, const MaterialLayout& mat,
                        const Grid1D& grid, double t, int step) {
    FieldState st;
    st.e.resize(grid.n_cells);
    st.b.resize(grid.n_cells);
    st.time = t;
    st.step = step;
    for (int i = 0; i < grid.n_cells; ++i) {
        st.e[i] = cell_average(grid, i,
                               [&](double x) { return exact_solution(spec, mat, x, t).e; });
        st.b[i] = cell_average(grid, i,
                               [&](double x) { return exact_solution(spec, mat, x, t).b; });
    }
    return st;
}

}  // namespace emw
