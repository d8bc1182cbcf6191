#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emw/dataset.hpp"
#include "emw/model.hpp"

namespace emw {

// Honors EMW_TEST_MODE=1, which forces single-threaded execution everywhere.
int effective_jobs(int requested);

struct TrainConfig {
    std::uint64_t seed = 1;
    int epochs = 20;
    int batch_size = 16;
    double lr_max = 1e-3;
    double lr_min = 1e-5;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 1.0;
    int window_stride = 1;          // keep every k-th training window
    int val_window_stride = 1;      // keep every k-th validation window
    int max_batches_per_epoch = 0;  // 0 keeps all batches
    int jobs = 1;
};

// One supervised pair: input rows [t - history + 1, t], target row t + 1.
struct WindowRef {
    int sample;  // index into dataset.samples
    int t;
};

std::vector<WindowRef> make_windows(const Dataset& data, Split split, int history,
                                    int stride);

struct Standardizer {
    double mean = 0.0;
    double sd = 1.0;

    double fwd(double x) const { return (x - mean) / sd; }
    double inv(double y) const { return y * sd + mean; }
};

// Scalar moments over every training-split field value.
Standardizer fit_standardizer(const Dataset& data);

struct EpochStats {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;
    double best_val = 0.0;
    int n_train_windows = 0;
    int n_val_windows = 0;
    double wall_seconds = 0.0;
    std::string model_path;
};

double cosine_lr(const TrainConfig& cfg, int epoch);

// Adam with per-epoch cosine decay and global-norm gradient clipping. The
// checkpoint with the lowest validation loss is kept at model_path.
TrainReport train_model(const Dataset& data, const ModelConfig& model_cfg,
                        const TrainConfig& train_cfg, const std::string& model_path);

void write_train_report(const std::string& path, const TrainReport& report,
                        const ModelConfig& model_cfg, const TrainConfig& train_cfg);

struct GridPoint {
    ModelConfig config;
    TrainReport report;
};

// Trains each (hidden, patch, depth, overlap) combination and ranks by best
// validation loss, ties broken lexicographically by the tuple itself.
std::vector<GridPoint> grid_search(const Dataset& data, const ModelConfig& base_model,
                                   const TrainConfig& train_cfg,
                                   const std::vector<int>& hiddens,
                                   const std::vector<int>& patches,
                                   const std::vector<int>& depths,
                                   const std::vector<int>& overlaps,
                                   const std::string& out_dir);

void write_grid_report(const std::string& path, const std::vector<GridPoint>& points);

}  // namespace emw
