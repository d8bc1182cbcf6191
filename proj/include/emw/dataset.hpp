// dataset.hpp — reproducible trajectory datasets: generation from the FV
// solver, train/val/test splitting, and the EMW1 binary container.
#pragma once

#include "emw/field.hpp"
#include "emw/solver.hpp"

#include <cstdint>
#include <string>

namespace emw {

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };

struct Sample {
    std::uint32_t id = 0;
    WavePacketSpec spec;
    double c2 = 0.0;  // withheld metadata; never fed to the model
    // row-major [n_steps + 1][n_cells] electric field history
    std::vector<double> e_fields;
};

struct Dataset {
    TestCase test_case = TestCase::Case1;
    std::vector<Sample> samples;
    std::vector<Split> split;  // by sample index
    Grid1D grid;
    int n_steps = 0;       // rows per sample = n_steps + 1
    int time_offset = 0;   // 0 for Case1, 100 for Case2
    std::uint64_t seed = 0;

    int n_rows() const { return n_steps + 1; }
    const double* row(int sample_idx, int t) const {
        return samples[sample_idx].e_fields.data() +
               static_cast<std::size_t>(t) * grid.n_cells;
    }
    std::vector<int> indices_of(Split s) const;
};

// Spec and material for one draw tuple. Case 1 fixes c2 = 1/3;
// Case 2 takes c2 = 1 / (1 + 2 r3).
std::pair<WavePacketSpec, MaterialLayout> sample_spec(TestCase c, double r1, double r2,
                                                      double r3 = 0.0);

// Deterministic split assignment: seeded shuffle, 80/10/10 (160/20/20 at n=200).
std::vector<Split> assign_split(std::uint64_t seed, int n_samples);

struct GenerateOptions {
    int n_samples = 200;
    int n_cells = 256;
    int jobs = 1;
};

// Full dataset generation. Case 1 keeps steps [0, 200]; Case 2 runs 200 steps,
// keeps [100, 200] and reindexes them to [0, 100].
Dataset generate(TestCase c, std::uint64_t seed, const GenerateOptions& opt = {});

// EMW1 container (little-endian) plus a JSON sidecar at path + ".json".
void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

}  // namespace emw
