// oracle.hpp — closed-form solution of the 1D transverse Maxwell system
// by the method of characteristics, with one interface interaction.
#pragma once

#include "emw/field.hpp"

namespace emw {

// Amplitude ratios at the speed discontinuity, from [E] = 0 and [B] = 0.
struct RTCoefficients {
    double r = 0.0;
    double t = 1.0;
};

RTCoefficients reflection_transmission(double c1, double c2);

struct EBPoint {
    double e = 0.0;
    double b = 0.0;
};

// Exact (E, B) at (x, t) for right-moving initial data E0 = phi, B0 = phi/c1.
// Valid while no wave re-enters from a domain boundary (absorbing ends).
EBPoint exact_solution(const WavePacketSpec& spec, const MaterialLayout& mat,
                       double x, double t);

// Cell-averaged exact state on a grid (same quadrature as initial_state),
// suitable for like-for-like comparison against finite-volume output.
FieldState oracle_state(const WavePacketSpec& spec, const MaterialLayout& mat,
                        const Grid1D& grid, double t, int step = 0);

}  // namespace emw
