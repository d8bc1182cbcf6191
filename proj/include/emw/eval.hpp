#pragma once

#include <string>
#include <vector>

#include "emw/dataset.hpp"
#include "emw/model.hpp"
#include "emw/train.hpp"

namespace emw {

// Autoregressive rollout seeded with `history` field rows in physical units.
// Takes no ground truth beyond the seed, so later rows cannot leak in.
std::vector<std::vector<double>> rollout(const ModelParams& params,
                                         const std::vector<double>& seed_window,
                                         int n_steps);

struct RolloutResult {
    int sample_id = -1;
    std::vector<std::vector<double>> predictions;  // kth row = k steps ahead
    std::vector<double> rel_err;  // ||pred - truth||_2 / ||truth||_2 per row
};

// Seeds from the sample's first `history` rows and scores every later row.
RolloutResult rollout_sample(const ModelParams& params, const Dataset& data,
                             int sample_idx);

std::vector<RolloutResult> rollout_split(const ModelParams& params,
                                         const Dataset& data, Split split, int jobs);

// Per-step mean and population standard deviation across rollouts.
struct ErrorCurve {
    std::vector<double> mean;
    std::vector<double> sd;
};

ErrorCurve error_curve(const std::vector<RolloutResult>& rollouts);

// Mean of the curve over prediction steps k0..k1 (1-based, inclusive,
// clamped to the curve length).
double mean_rel_err(const ErrorCurve& curve, int k0, int k1);

// Moduli of real-DFT modes 0..n/2.
std::vector<double> amplitude_spectrum(const double* row, int n);

void write_error_curve_csv(const std::string& path, const ErrorCurve& curve);
void write_spectrum_csv(const std::string& path, const double* truth,
                        const double* pred, int n);

struct AblationSpec {
    ModelConfig base_model;
    TrainConfig train;
    std::vector<int> mode_sweep = {4, 8, 16};
    int horizon = 75;  // prediction steps averaged into the metric
    int jobs = 1;
};

struct AblationRow {
    std::string variant;  // "f+e_r8", "e", ...
    int test_case = 1;
    double metric = 0.0;  // mean relative error over the horizon, test split
};

std::vector<AblationRow> ablate(const std::vector<const Dataset*>& datasets,
                                const AblationSpec& spec, const std::string& out_dir);

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows);

// CSV plus the fixed full-scale reference numbers for side-by-side reading.
void write_ablation_report(const std::string& path,
                           const std::vector<AblationRow>& rows);

}  // namespace emw
