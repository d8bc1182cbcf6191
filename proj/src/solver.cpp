#include "emw/solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace emw {

namespace {

// Quartic reconstruction from 5 consecutive cell averages, evaluated at the
// face eval_edge cells past the stencil start. Row 3 is the classic
// fifth-order upwind stencil (2, -13, 47, 27, -3)/60; rows mirror in pairs.
constexpr double kFaceWeights[6][5] = {
    {137.0 / 60, -163.0 / 60, 137.0 / 60, -63.0 / 60, 12.0 / 60},
    {12.0 / 60, 77.0 / 60, -43.0 / 60, 17.0 / 60, -3.0 / 60},
    {-3.0 / 60, 27.0 / 60, 47.0 / 60, -13.0 / 60, 2.0 / 60},
    {2.0 / 60, -13.0 / 60, 47.0 / 60, 27.0 / 60, -3.0 / 60},
    {-3.0 / 60, 17.0 / 60, -43.0 / 60, 77.0 / 60, 12.0 / 60},
    {12.0 / 60, -63.0 / 60, 137.0 / 60, -163.0 / 60, 137.0 / 60},
};

// Quartic reconstruction from 4 consecutive cell averages plus a point value
// at the far edge of the block (edge 4); evaluated at interior edges 2 and 3.
// Mirroring the block gives the variant with the point value at edge 0.
constexpr double kAnchoredCellWeights[2][4] = {
    {-1.0 / 24, 29.0 / 72, 65.0 / 72, -31.0 / 72},  // edge 2
    {1.0 / 48, -7.0 / 48, 29.0 / 48, 37.0 / 48},    // edge 3
};
constexpr double kAnchoredPointWeights[2] = {1.0 / 6, -1.0 / 4};

constexpr int kGhost = 3;

struct Workspace {
    std::vector<double> wr;  // right-moving characteristic, with ghosts
    std::vector<double> wl;  // left-moving characteristic, with ghosts
};

}  // namespace

double SolverConfig::effective_dt(const Grid1D& grid, const MaterialLayout& mat) const {
    if (dt > 0.0) return dt;
    const double cmax = std::max(mat.c1, mat.c2);
    return cfl * grid.dx() / cmax;
}

int interface_face(const Grid1D& grid, const MaterialLayout& mat) {
    const double pos = (mat.x_j - grid.lo) / grid.dx();
    const int f = static_cast<int>(std::lround(pos));
    if (std::abs(pos - f) > 1e-9)
        throw std::invalid_argument("interface must coincide with a cell face");
    if (f < 5 || f > grid.n_cells - 5)
        throw std::invalid_argument("interface too close to a domain boundary");
    return f;
}

CharFields to_characteristics(const FieldState& state, const Grid1D& grid,
                              const MaterialLayout& mat) {
    const int n = grid.n_cells;
    if (static_cast<int>(state.e.size()) != n || static_cast<int>(state.b.size()) != n)
        throw std::invalid_argument("to_characteristics: state/grid size mismatch");
    CharFields w;
    w.right.resize(n);
    w.left.resize(n);
    for (int i = 0; i < n; ++i) {
        const double c = mat.speed_at(grid.cell_center(i));
        w.right[i] = state.e[i] + c * state.b[i];
        w.left[i] = state.e[i] - c * state.b[i];
    }
    return w;
}

FieldState from_characteristics(const CharFields& w, const Grid1D& grid,
                                const MaterialLayout& mat, double time, int step) {
    const int n = grid.n_cells;
    FieldState st;
    st.e.resize(n);
    st.b.resize(n);
    st.time = time;
    st.step = step;
    for (int i = 0; i < n; ++i) {
        const double c = mat.speed_at(grid.cell_center(i));
        st.e[i] = 0.5 * (w.right[i] + w.left[i]);
        st.b[i] = 0.5 * (w.right[i] - w.left[i]) / c;
    }
    return st;
}

double reconstruct_stencil(const double* cells, int eval_edge) {
    const double* w = kFaceWeights[eval_edge];
    return w[0] * cells[0] + w[1] * cells[1] + w[2] * cells[2] + w[3] * cells[3] +
           w[4] * cells[4];
}

std::vector<double> reconstruct_face(const std::vector<double>& padded, int n_cells,
                                     bool upwind_from_left) {
    if (static_cast<int>(padded.size()) != n_cells + 2 * kGhost)
        throw std::invalid_argument("reconstruct_face: expected 3 ghost cells per side");
    std::vector<double> face(n_cells + 1);
    // face f sits between cells f-1 and f; stencil start in padded indexing
    for (int f = 0; f <= n_cells; ++f) {
        const int s = upwind_from_left ? f - 3 : f - 2;
        const int e = upwind_from_left ? 3 : 2;
        face[f] = reconstruct_stencil(&padded[s + kGhost], e);
    }
    return face;
}

InterfaceFlux interface_riemann(double w_incident_left, double w_incident_right,
                                double c1, double c2) {
    // Solve E* + c1 B* = w_inc_left, E* - c2 B* = w_inc_right.
    InterfaceFlux out;
    out.e_star = (c2 * w_incident_left + c1 * w_incident_right) / (c1 + c2);
    out.b_star = (w_incident_left - w_incident_right) / (c1 + c2);
    out.flux_e_left = c1 * c1 * out.b_star;
    out.flux_e_right = c2 * c2 * out.b_star;
    out.flux_b = out.e_star;
    return out;
}

namespace {

void fill_ghosts(Workspace& ws, int n, Boundary boundary) {
    auto& wr = ws.wr;
    auto& wl = ws.wl;
    if (boundary == Boundary::Periodic) {
        for (int g = 1; g <= kGhost; ++g) {
            wr[kGhost - g] = wr[kGhost + n - g];
            wl[kGhost - g] = wl[kGhost + n - g];
            wr[kGhost + n - 1 + g] = wr[kGhost + g - 1];
            wl[kGhost + n - 1 + g] = wl[kGhost + g - 1];
        }
        return;
    }
    // Outflow: zero-gradient on the outgoing family, zero on the incoming one.
    for (int g = 1; g <= kGhost; ++g) {
        wl[kGhost - g] = wl[kGhost];          // left-movers exit on the left
        wr[kGhost - g] = 0.0;                 // nothing enters from the left
        wr[kGhost + n - 1 + g] = wr[kGhost + n - 1];
        wl[kGhost + n - 1 + g] = 0.0;
    }
}

// Stencil start for a given face and family, clamped so that no stencil
// crosses the interface face jf (jf < 0 disables clamping).
int stencil_start(int f, bool right_family, int jf, bool left_side) {
    int s = right_family ? f - 3 : f - 2;
    if (jf >= 0) {
        if (left_side)
            s = std::min(s, jf - 5);
        else
            s = std::max(s, jf);
    }
    return s;
}

// Outgoing-family face value near the interface: quartic through the 4 cell
// averages on the outgoing side anchored by the Riemann point value at the
// interface. cells[0..3] are ordered away from the interface toward it when
// toward_right is true (left side of the interface) and mirrored otherwise;
// dist is the face's distance from the interface in cells (1 or 2).
double reconstruct_anchored(const double* cells, double point, int dist,
                            bool toward_right) {
    const int row = 2 - dist;  // dist 1 -> edge 3 weights, dist 2 -> edge 2
    const double* w = kAnchoredCellWeights[row];
    double acc = kAnchoredPointWeights[row] * point;
    if (toward_right) {
        for (int i = 0; i < 4; ++i) acc += w[i] * cells[i];
    } else {
        for (int i = 0; i < 4; ++i) acc += w[i] * cells[3 - i];
    }
    return acc;
}

}  // namespace

FieldState rhs(const FieldState& state, const Grid1D& grid, const MaterialLayout& mat,
               Boundary boundary) {
    const int n = grid.n_cells;
    const double dx = grid.dx();
    const bool uniform = mat.uniform();
    const int jf = uniform ? -1 : interface_face(grid, mat);

    Workspace ws;
    ws.wr.assign(n + 2 * kGhost, 0.0);
    ws.wl.assign(n + 2 * kGhost, 0.0);
    for (int i = 0; i < n; ++i) {
        const double c = (uniform || i < jf) ? mat.c1 : mat.c2;
        ws.wr[kGhost + i] = state.e[i] + c * state.b[i];
        ws.wl[kGhost + i] = state.e[i] - c * state.b[i];
    }
    fill_ghosts(ws, n, boundary);

    std::vector<double> wr_face(n + 1), wl_face(n + 1);
    for (int f = 0; f <= n; ++f) {
        // side assignment: at the interface face the right-mover is fed from
        // region 1 and the left-mover from region 2
        const int sr = stencil_start(f, true, jf, f <= jf);
        const int sl = stencil_start(f, false, jf, f < jf);
        wr_face[f] = reconstruct_stencil(&ws.wr[sr + kGhost], f - sr);
        wl_face[f] = reconstruct_stencil(&ws.wl[sl + kGhost], f - sl);
    }

    if (!uniform) {
        // The outgoing families next to the interface (reflected wave on the
        // left, transmitted wave on the right) otherwise see downwind-heavy
        // clamped stencils. Anchor them with the outgoing characteristic point
        // values of the interface Riemann state instead; stencils still never
        // cross the interface.
        const auto fx = interface_riemann(wr_face[jf], wl_face[jf], mat.c1, mat.c2);
        const double wl_out = fx.e_star - mat.c1 * fx.b_star;
        const double wr_out = fx.e_star + mat.c2 * fx.b_star;
        wl_face[jf - 1] = reconstruct_anchored(&ws.wl[jf - 4 + kGhost], wl_out, 1, true);
        wl_face[jf - 2] = reconstruct_anchored(&ws.wl[jf - 4 + kGhost], wl_out, 2, true);
        wr_face[jf + 1] = reconstruct_anchored(&ws.wr[jf + kGhost], wr_out, 1, false);
        wr_face[jf + 2] = reconstruct_anchored(&ws.wr[jf + kGhost], wr_out, 2, false);
    }

    // per-face fluxes; the E flux is two-valued at the interface face
    std::vector<double> flux_e_left(n + 1), flux_e_right(n + 1), flux_b(n + 1);
    for (int f = 0; f <= n; ++f) {
        const double c_left = (uniform || f <= jf) ? mat.c1 : mat.c2;
        const double c_right = (uniform || f < jf) ? mat.c1 : mat.c2;
        const auto fx = interface_riemann(wr_face[f], wl_face[f], c_left, c_right);
        flux_e_left[f] = fx.flux_e_left;
        flux_e_right[f] = fx.flux_e_right;
        flux_b[f] = fx.flux_b;
    }

    FieldState out;
    out.e.resize(n);
    out.b.resize(n);
    out.time = state.time;
    out.step = state.step;
    for (int i = 0; i < n; ++i) {
        out.e[i] = -(flux_e_left[i + 1] - flux_e_right[i]) / dx;
        out.b[i] = -(flux_b[i + 1] - flux_b[i]) / dx;
    }
    return out;
}

double em_energy(const FieldState& state, const Grid1D& grid, const MaterialLayout& mat) {
    double acc = 0.0;
    for (int i = 0; i < grid.n_cells; ++i) {
        const double c = mat.speed_at(grid.cell_center(i));
        acc += state.e[i] * state.e[i] / (c * c) + state.b[i] * state.b[i];
    }
    return 0.5 * acc * grid.dx();
}

Trajectory simulate(const FieldState& initial, const Grid1D& grid,
                    const MaterialLayout& mat, const SolverConfig& config) {
    const int n = grid.n_cells;
    const double dt = config.effective_dt(grid, mat);
    const double cmax = std::max(mat.c1, mat.c2);
    if (!(dt * cmax / grid.dx() < 1.0))
        throw std::invalid_argument("simulate: CFL number must be below 1");
    if (!mat.uniform()) interface_face(grid, mat);  // validates face alignment

    Trajectory traj;
    traj.grid = grid;
    traj.mat = mat;
    traj.config = config;
    traj.config.dt = dt;
    traj.states.reserve(config.n_steps + 1);
    traj.states.push_back(initial);
    traj.states.front().time = 0.0;
    traj.states.front().step = 0;

    auto axpy = [n](FieldState& y, double a, const FieldState& x) {
        for (int i = 0; i < n; ++i) {
            y.e[i] += a * x.e[i];
            y.b[i] += a * x.b[i];
        }
    };

    FieldState u = traj.states.front();
    for (int s = 0; s < config.n_steps; ++s) {
        const FieldState k1 = rhs(u, grid, mat, config.boundary);
        FieldState u2 = u;
        axpy(u2, 0.5 * dt, k1);
        const FieldState k2 = rhs(u2, grid, mat, config.boundary);
        FieldState u3 = u;
        axpy(u3, 0.5 * dt, k2);
        const FieldState k3 = rhs(u3, grid, mat, config.boundary);
        FieldState u4 = u;
        axpy(u4, dt, k3);
        const FieldState k4 = rhs(u4, grid, mat, config.boundary);

        for (int i = 0; i < n; ++i) {
            u.e[i] += dt / 6.0 * (k1.e[i] + 2.0 * k2.e[i] + 2.0 * k3.e[i] + k4.e[i]);
            u.b[i] += dt / 6.0 * (k1.b[i] + 2.0 * k2.b[i] + 2.0 * k3.b[i] + k4.b[i]);
        }
        u.time = (s + 1) * dt;
        u.step = s + 1;
        for (int i = 0; i < n; ++i)
            if (!std::isfinite(u.e[i]) || !std::isfinite(u.b[i]))
                throw std::runtime_error("simulate: non-finite field at step " +
                                         std::to_string(s + 1));
        traj.states.push_back(u);
    }
    return traj;
}

}  // namespace emw
