#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "emw/checkpoint.hpp"
#include "emw/tensor.hpp"

namespace emw {

// Dual-path patch transformer that maps a window of `history` field
// snapshots to the next snapshot. Patches are taken with `overlap` shared
// cells; the frequency path works on the leading `modes` Fourier modes of
// each patch.
struct ModelConfig {
    int n_cells = 256;
    int history = 5;
    int patch = 33;
    int overlap = 1;
    int hidden = 128;
    int depth = 4;
    int heads = 4;
    int modes = 8;
    bool use_freq_path = true;

    int stride() const { return patch - overlap; }
    void validate() const;
};

// Smallest padded length >= n_cells reachable by whole patches.
int padded_length(const ModelConfig& cfg);
int n_patches(const ModelConfig& cfg);

// window is row-major [history, n_cells], oldest snapshot first. Token t
// holds the history patches at spatial offset t*stride(), snapshot-major:
// column s*patch + j is padded position t*stride() + j of snapshot s.
// Padding replicates the rightmost cell.
std::vector<double> tokenize_overlap(const ModelConfig& cfg, const double* window);

// Tape op mapping per-patch predictions [n_patches, patch] back to a cell
// row [n_cells]; overlapping cells are averaged and padding is dropped.
Tensor detokenize_overlap(Tape& tape, const ModelConfig& cfg, const Tensor& patches);

struct ModelParams {
    ModelConfig config;
    std::vector<NamedTensor> tensors;  // canonical construction order

    // Scalar standardization of field values, fitted on the training split.
    double norm_mean = 0.0;
    double norm_sd = 1.0;

    const NamedTensor& find(const std::string& name) const;
    NamedTensor& find(const std::string& name);
};

// Seeded deterministic init: weights are 0.02-scaled unit normals drawn from
// a counter stream keyed by tensor name, biases zero, norm gains one.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

// Mutable parameter storage shared across tapes; the training loop updates
// the value vectors in place between steps.
struct SharedParams {
    ModelConfig config;
    double norm_mean = 0.0;
    double norm_sd = 1.0;
    std::vector<std::string> names;
    std::vector<std::vector<int>> shapes;
    std::vector<std::shared_ptr<std::vector<double>>> values;
};

SharedParams make_shared_params(const ModelParams& params);
ModelParams to_model_params(const SharedParams& params);

// Parameter leaves bound onto one tape, in canonical order.
struct BoundModel {
    ModelConfig config;
    std::vector<std::string> names;
    std::vector<Tensor> leaves;

    const Tensor& get(const std::string& name) const;
};

BoundModel bind_params(Tape& tape, const SharedParams& params, bool needs_grad);
BoundModel bind_params(Tape& tape, const ModelParams& params, bool needs_grad);

// Frequency-path intermediates captured during a forward pass.
struct ForwardTrace {
    Tensor tokens;       // [n_patches, history*patch]
    Tensor freq_modes;   // [n_patches, history*2*modes]
    Tensor freq_out;     // [n_patches, hidden]
    Tensor spatial_out;  // [n_patches, hidden]
    Tensor patches;      // [n_patches, patch]
    bool has_freq = false;
};

// Full forward pass: window [history, n_cells] -> prediction [n_cells].
// All inputs and outputs are in standardized units.
Tensor model_forward(Tape& tape, const BoundModel& bound,
                     const std::vector<double>& window,
                     ForwardTrace* trace = nullptr);

// EMWT checkpoint plus a JSON sidecar at path + ".json" holding the config.
void write_model(const std::string& path, const ModelParams& params);
ModelParams read_model(const std::string& path);

}  // namespace emw
