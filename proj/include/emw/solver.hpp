// solver.hpp — fifth-order upwind finite-volume scheme for the 1D transverse
// Maxwell system, with exact jump enforcement at a face-aligned material
// interface and classic RK4 time stepping.
#pragma once

#include "emw/field.hpp"

namespace emw {

enum class Boundary : std::uint8_t { Outflow = 0, Periodic = 1 };

struct SolverConfig {
    double cfl = 0.64;
    int n_steps = 200;
    double dt = 0.0;  // 0 -> derived as cfl * dx / max(c1, c2)
    Boundary boundary = Boundary::Outflow;

    double effective_dt(const Grid1D& grid, const MaterialLayout& mat) const;
};

struct Trajectory {
    std::vector<FieldState> states;  // n_steps + 1 entries, step 0 first
    Grid1D grid;
    MaterialLayout mat;
    SolverConfig config;
};

// Characteristic decomposition: right = E + c*B advects at +c,
// left = E - c*B advects at -c, with the region-local speed per cell.
struct CharFields {
    std::vector<double> right;
    std::vector<double> left;
};

CharFields to_characteristics(const FieldState& state, const Grid1D& grid,
                              const MaterialLayout& mat);
FieldState from_characteristics(const CharFields& w, const Grid1D& grid,
                                const MaterialLayout& mat, double time = 0.0,
                                int step = 0);

// Face value at cell boundary e cells into a 5-cell stencil of cell averages.
// e = 3 is the standard upwind-biased row for right-moving data, e = 2 its
// left-moving mirror; e in {0,1,4,5} are the interface-biased rows.
double reconstruct_stencil(const double* cells, int eval_edge);

// Face values for a whole array of cell averages in a uniform medium,
// faces 0..n; ghost cells supplied by the caller (3 on each side).
// upwind_from_left = true selects the right-moving bias.
std::vector<double> reconstruct_face(const std::vector<double>& cell_avgs_with_ghosts,
                                     int n_cells, bool upwind_from_left);

// Interface state and per-side fluxes from the jump conditions [E] = [B] = 0.
// w_incident_left is the right-moving characteristic reconstructed from the
// left side; w_incident_right the left-moving one from the right side.
struct InterfaceFlux {
    double e_star = 0.0;
    double b_star = 0.0;
    double flux_e_left = 0.0;   // c1^2 * B*
    double flux_e_right = 0.0;  // c2^2 * B*
    double flux_b = 0.0;        // E*, single-valued
};

InterfaceFlux interface_riemann(double w_incident_left, double w_incident_right,
                                double c1, double c2);

// Semi-discrete right-hand side d/dt (E, B) of the finite-volume form.
FieldState rhs(const FieldState& state, const Grid1D& grid, const MaterialLayout& mat,
               Boundary boundary);

// RK4 evolution; throws on non-finite fields (CFL violation or setup bug).
Trajectory simulate(const FieldState& initial, const Grid1D& grid,
                    const MaterialLayout& mat, const SolverConfig& config);

// Discrete EM energy sum_i (E_i^2 / c_i^2 + B_i^2) * dx / 2.
double em_energy(const FieldState& state, const Grid1D& grid, const MaterialLayout& mat);

// Index of the face coinciding with x_j; throws if x_j is not a face or sits
// closer than 5 cells to a domain boundary (one-sided stencils need room).
int interface_face(const Grid1D& grid, const MaterialLayout& mat);

}  // namespace emw
