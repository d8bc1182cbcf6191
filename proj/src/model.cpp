#include "emw/model.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <utility>

#include "emw/fft.hpp"
#include "emw/rng.hpp"
#include "json.hpp"

namespace emw {

namespace {

constexpr double kInitScale = 0.02;

struct TensorSpec {
    std::string name;
    std::vector<int> shape;
    enum class Init { Normal, Zero, One } init;
};

void push_layer_specs(std::vector<TensorSpec>& specs, const std::string& prefix,
                      int hidden) {
    using Init = TensorSpec::Init;
    const int h4 = 4 * hidden;
    specs.push_back({prefix + "ln1.g", {hidden}, Init::One});
    specs.push_back({prefix + "ln1.b", {hidden}, Init::Zero});
    specs.push_back({prefix + "attn.wq", {hidden, hidden}, Init::Normal});
    specs.push_back({prefix + "attn.bq", {hidden}, Init::Zero});
    specs.push_back({prefix + "attn.wk", {hidden, hidden}, Init::Normal});
    specs.push_back({prefix + "attn.bk", {hidden}, Init::Zero});
    specs.push_back({prefix + "attn.wv", {hidden, hidden}, Init::Normal});
    specs.push_back({prefix + "attn.bv", {hidden}, Init::Zero});
    specs.push_back({prefix + "attn.wo", {hidden, hidden}, Init::Normal});
    specs.push_back({prefix + "attn.bo", {hidden}, Init::Zero});
    specs.push_back({prefix + "ln2.g", {hidden}, Init::One});
    specs.push_back({prefix + "ln2.b", {hidden}, Init::Zero});
    specs.push_back({prefix + "mlp.w1", {hidden, h4}, Init::Normal});
    specs.push_back({prefix + "mlp.b1", {h4}, Init::Zero});
    specs.push_back({prefix + "mlp.w2", {h4, hidden}, Init::Normal});
    specs.push_back({prefix + "mlp.b2", {hidden}, Init::Zero});
}

// Canonical tensor catalog; construction order here fixes checkpoint layout
// and optimizer state indexing.
std::vector<TensorSpec> catalog(const ModelConfig& cfg) {
    using Init = TensorSpec::Init;
    std::vector<TensorSpec> specs;
    const int np = n_patches(cfg);
    const int tok = cfg.history * cfg.patch;
    const int spec_w = cfg.history * 2 * cfg.modes;
    specs.push_back({"spatial.embed.w", {tok, cfg.hidden}, Init::Normal});
    specs.push_back({"spatial.embed.b", {cfg.hidden}, Init::Zero});
    specs.push_back({"spatial.pos", {np, cfg.hidden}, Init::Normal});
    for (int i = 0; i < cfg.depth; ++i)
        push_layer_specs(specs, "spatial.layer" + std::to_string(i) + ".", cfg.hidden);
    specs.push_back({"spatial.out.w", {cfg.hidden, cfg.hidden}, Init::Normal});
    specs.push_back({"spatial.out.b", {cfg.hidden}, Init::Zero});
    if (cfg.use_freq_path) {
        specs.push_back({"freq.embed.w", {spec_w, cfg.hidden}, Init::Normal});
        specs.push_back({"freq.embed.b", {cfg.hidden}, Init::Zero});
        for (int i = 0; i < cfg.depth; ++i)
            push_layer_specs(specs, "freq.layer" + std::to_string(i) + ".", cfg.hidden);
        specs.push_back({"freq.spec.w", {cfg.hidden, spec_w}, Init::Normal});
        specs.push_back({"freq.spec.b", {spec_w}, Init::Zero});
        specs.push_back({"freq.proj.w", {tok, cfg.hidden}, Init::Normal});
        specs.push_back({"freq.proj.b", {cfg.hidden}, Init::Zero});
    }
    specs.push_back({"head.w", {cfg.hidden, cfg.patch}, Init::Normal});
    specs.push_back({"head.b", {cfg.patch}, Init::Zero});
    return specs;
}

struct LayerRefs {
    Tensor ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln2_g, ln2_b, w1, b1, w2, b2;
};

LayerRefs layer_refs(const BoundModel& bm, const std::string& prefix) {
    return {bm.get(prefix + "ln1.g"),   bm.get(prefix + "ln1.b"),
            bm.get(prefix + "attn.wq"), bm.get(prefix + "attn.bq"),
            bm.get(prefix + "attn.wk"), bm.get(prefix + "attn.bk"),
            bm.get(prefix + "attn.wv"), bm.get(prefix + "attn.bv"),
            bm.get(prefix + "attn.wo"), bm.get(prefix + "attn.bo"),
            bm.get(prefix + "ln2.g"),   bm.get(prefix + "ln2.b"),
            bm.get(prefix + "mlp.w1"),  bm.get(prefix + "mlp.b1"),
            bm.get(prefix + "mlp.w2"),  bm.get(prefix + "mlp.b2")};
}

Tensor attention(Tape& tape, const Tensor& x, const LayerRefs& lr, int heads) {
    const int hidden = x.cols();
    const int dh = hidden / heads;
    const Tensor q = tape.linear(x, lr.wq, lr.bq);
    const Tensor k = tape.linear(x, lr.wk, lr.bk);
    const Tensor v = tape.linear(x, lr.wv, lr.bv);
    std::vector<Tensor> outs;
    outs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        const Tensor qh = tape.narrow(q, h * dh, dh);
        const Tensor kh = tape.narrow(k, h * dh, dh);
        const Tensor vh = tape.narrow(v, h * dh, dh);
        Tensor scores = tape.matmul(qh, tape.transpose(kh));
        scores = tape.scale(scores, 1.0 / std::sqrt(static_cast<double>(dh)));
        outs.push_back(tape.matmul(tape.softmax(scores), vh));
    }
    return tape.linear(tape.concat_cols(outs), lr.wo, lr.bo);
}

Tensor transformer_layer(Tape& tape, const Tensor& x, const LayerRefs& lr,
                         int heads) {
    Tensor h = tape.add(x, attention(tape, tape.layer_norm(x, lr.ln1_g, lr.ln1_b),
                                     lr, heads));
    Tensor m = tape.linear(
        tape.gelu(tape.linear(tape.layer_norm(h, lr.ln2_g, lr.ln2_b), lr.w1, lr.b1)),
        lr.w2, lr.b2);
    return tape.add(h, m);
}

nlohmann::json config_to_json(const ModelConfig& cfg) {
    return nlohmann::json{{"n_cells", cfg.n_cells},   {"history", cfg.history},
                          {"patch", cfg.patch},       {"overlap", cfg.overlap},
                          {"hidden", cfg.hidden},     {"depth", cfg.depth},
                          {"heads", cfg.heads},       {"modes", cfg.modes},
                          {"use_freq_path", cfg.use_freq_path}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.n_cells = j.at("n_cells").get<int>();
    cfg.history = j.at("history").get<int>();
    cfg.patch = j.at("patch").get<int>();
    cfg.overlap = j.at("overlap").get<int>();
    cfg.hidden = j.at("hidden").get<int>();
    cfg.depth = j.at("depth").get<int>();
    cfg.heads = j.at("heads").get<int>();
    cfg.modes = j.at("modes").get<int>();
    cfg.use_freq_path = j.at("use_freq_path").get<bool>();
    cfg.validate();
    return cfg;
}

}  // namespace

void ModelConfig::validate() const {
    if (n_cells < 1) throw std::invalid_argument("model: n_cells must be positive");
    if (history < 1) throw std::invalid_argument("model: history must be positive");
    if (patch < 2) throw std::invalid_argument("model: patch must be at least 2");
    if (overlap < 0 || overlap >= patch)
        throw std::invalid_argument("model: overlap must be in [0, patch)");
    if (hidden < 1 || depth < 1 || heads < 1)
        throw std::invalid_argument("model: hidden, depth and heads must be positive");
    if (hidden % heads != 0)
        throw std::invalid_argument("model: heads must divide hidden");
    if (modes < 1 || modes > max_modes(patch))
        throw std::invalid_argument("model: modes out of range for patch");
}

int padded_length(const ModelConfig& cfg) {
    if (cfg.n_cells <= cfg.patch) return cfg.patch;
    const int s = cfg.stride();
    const int k = (cfg.n_cells - cfg.patch + s - 1) / s;
    return cfg.patch + k * s;
}

int n_patches(const ModelConfig& cfg) {
    return (padded_length(cfg) - cfg.patch) / cfg.stride() + 1;
}

std::vector<double> tokenize_overlap(const ModelConfig& cfg, const double* window) {
    const int np = n_patches(cfg);
    const int p = cfg.patch, m = cfg.history, n = cfg.n_cells, s = cfg.stride();
    std::vector<double> tokens(static_cast<std::size_t>(np) * m * p);
    for (int t = 0; t < np; ++t)
        for (int snap = 0; snap < m; ++snap)
            for (int j = 0; j < p; ++j) {
                const int pos = std::min(t * s + j, n - 1);
                tokens[(static_cast<std::size_t>(t) * m + snap) * p + j] =
                    window[static_cast<std::size_t>(snap) * n + pos];
            }
    return tokens;
}

Tensor detokenize_overlap(Tape& tape, const ModelConfig& cfg, const Tensor& patches) {
    const int np = n_patches(cfg);
    const int p = cfg.patch, n = cfg.n_cells, s = cfg.stride();
    if (patches.shape != std::vector<int>{np, p})
        throw std::invalid_argument("detokenize_overlap: unexpected patch shape");
    const int padded = padded_length(cfg);
    auto count = std::make_shared<std::vector<int>>(static_cast<std::size_t>(padded), 0);
    std::vector<double> acc(static_cast<std::size_t>(padded), 0.0);
    for (int t = 0; t < np; ++t)
        for (int j = 0; j < p; ++j) {
            acc[static_cast<std::size_t>(t) * s + j] += patches.at(t * p + j);
            ++(*count)[static_cast<std::size_t>(t) * s + j];
        }
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[i] = acc[i] / (*count)[i];
    return tape.node({n}, std::move(out), {&patches},
                     [patches, count, np, p, n, s](const double* g, Tape& t) {
                         auto* gp = t.grad_buffer(patches.id);
                         if (!gp) return;
                         for (int ti = 0; ti < np; ++ti)
                             for (int j = 0; j < p; ++j) {
                                 const int pos = ti * s + j;
                                 if (pos < n)
                                     (*gp)[static_cast<std::size_t>(ti) * p + j] +=
                                         g[pos] / (*count)[pos];
                             }
                     });
}

const NamedTensor& ModelParams::find(const std::string& name) const {
    return find_tensor(tensors, name);
}

NamedTensor& ModelParams::find(const std::string& name) {
    for (auto& t : tensors)
        if (t.name == name) return t;
    throw std::runtime_error("checkpoint: missing tensor " + name);
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ModelParams params;
    params.config = cfg;
    CounterRng rng(seed);
    for (const auto& spec : catalog(cfg)) {
        NamedTensor t;
        t.name = spec.name;
        t.shape = spec.shape;
        std::size_t n = 1;
        for (int d : spec.shape) n *= static_cast<std::size_t>(d);
        t.values.resize(n);
        switch (spec.init) {
            case TensorSpec::Init::Normal: {
                const std::uint64_t stream = CounterRng::stream_of(spec.name);
                for (std::size_t i = 0; i < n; ++i)
                    t.values[i] =
                        kInitScale * rng.normal(stream, static_cast<std::uint64_t>(i));
                break;
            }
            case TensorSpec::Init::Zero:
                break;
            case TensorSpec::Init::One:
                t.values.assign(n, 1.0);
                break;
        }
        params.tensors.push_back(std::move(t));
    }
    return params;
}

SharedParams make_shared_params(const ModelParams& params) {
    SharedParams sp;
    sp.config = params.config;
    sp.norm_mean = params.norm_mean;
    sp.norm_sd = params.norm_sd;
    for (const auto& t : params.tensors) {
        sp.names.push_back(t.name);
        sp.shapes.push_back(t.shape);
        sp.values.push_back(std::make_shared<std::vector<double>>(t.values));
    }
    return sp;
}

ModelParams to_model_params(const SharedParams& params) {
    ModelParams mp;
    mp.config = params.config;
    mp.norm_mean = params.norm_mean;
    mp.norm_sd = params.norm_sd;
    for (std::size_t i = 0; i < params.names.size(); ++i)
        mp.tensors.push_back(
            {params.names[i], params.shapes[i], *params.values[i]});
    return mp;
}

BoundModel bind_params(Tape& tape, const SharedParams& params, bool needs_grad) {
    BoundModel bm;
    bm.config = params.config;
    bm.names = params.names;
    bm.leaves.reserve(params.values.size());
    for (std::size_t i = 0; i < params.values.size(); ++i)
        bm.leaves.push_back(
            tape.leaf_shared(params.shapes[i], params.values[i], needs_grad));
    return bm;
}

BoundModel bind_params(Tape& tape, const ModelParams& params, bool needs_grad) {
    return bind_params(tape, make_shared_params(params), needs_grad);
}

const Tensor& BoundModel::get(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return leaves[i];
    throw std::runtime_error("model: unbound tensor " + name);
}

Tensor model_forward(Tape& tape, const BoundModel& bound,
                     const std::vector<double>& window, ForwardTrace* trace) {
    const ModelConfig& cfg = bound.config;
    if (static_cast<int>(window.size()) != cfg.history * cfg.n_cells)
        throw std::invalid_argument("model_forward: window size mismatch");
    const int np = n_patches(cfg);
    const int tok = cfg.history * cfg.patch;
    const int spec_w = cfg.history * 2 * cfg.modes;

    Tensor tokens = tape.leaf({np, tok}, tokenize_overlap(cfg, window.data()));
    if (trace) trace->tokens = tokens;

    Tensor x = tape.add(
        tape.linear(tokens, bound.get("spatial.embed.w"), bound.get("spatial.embed.b")),
        bound.get("spatial.pos"));
    for (int i = 0; i < cfg.depth; ++i)
        x = transformer_layer(
            tape, x, layer_refs(bound, "spatial.layer" + std::to_string(i) + "."),
            cfg.heads);
    Tensor spatial_out =
        tape.linear(x, bound.get("spatial.out.w"), bound.get("spatial.out.b"));
    if (trace) trace->spatial_out = spatial_out;

    Tensor merged = spatial_out;
    if (cfg.use_freq_path) {
        Tensor rows = tape.reshape(tokens, {np * cfg.history, cfg.patch});
        Tensor spec = tape.reshape(rfft_truncate(tape, rows, cfg.modes), {np, spec_w});
        if (trace) {
            trace->freq_modes = spec;
            trace->has_freq = true;
        }
        Tensor f = tape.linear(spec, bound.get("freq.embed.w"), bound.get("freq.embed.b"));
        for (int i = 0; i < cfg.depth; ++i)
            f = transformer_layer(
                tape, f, layer_refs(bound, "freq.layer" + std::to_string(i) + "."),
                cfg.heads);
        Tensor back = tape.reshape(
            tape.linear(f, bound.get("freq.spec.w"), bound.get("freq.spec.b")),
            {np * cfg.history, 2 * cfg.modes});
        Tensor resynth =
            tape.reshape(irfft_pad(tape, back, cfg.patch), {np, tok});
        Tensor freq_out =
            tape.linear(resynth, bound.get("freq.proj.w"), bound.get("freq.proj.b"));
        if (trace) trace->freq_out = freq_out;
        merged = tape.add(spatial_out, freq_out);
    }

    Tensor patches = tape.linear(merged, bound.get("head.w"), bound.get("head.b"));
    if (trace) trace->patches = patches;
    return detokenize_overlap(tape, cfg, patches);
}

void write_model(const std::string& path, const ModelParams& params) {
    params.config.validate();
    write_checkpoint(path, params.tensors);
    nlohmann::json j{{"config", config_to_json(params.config)},
                     {"norm_mean", params.norm_mean},
                     {"norm_sd", params.norm_sd}};
    std::ofstream f(path + ".json", std::ios::trunc);
    if (!f) throw std::runtime_error("model: cannot open " + path + ".json for writing");
    f << j.dump(2) << "\n";
}

ModelParams read_model(const std::string& path) {
    std::ifstream f(path + ".json");
    if (!f) throw std::runtime_error("model: cannot open " + path + ".json");
    nlohmann::json j;
    f >> j;
    ModelParams params;
    params.config = config_from_json(j.at("config"));
    params.norm_mean = j.at("norm_mean").get<double>();
    params.norm_sd = j.at("norm_sd").get<double>();
    auto loose = read_checkpoint(path);
    const auto specs = catalog(params.config);
    if (loose.size() != specs.size())
        throw std::runtime_error("model: checkpoint holds unexpected tensors");
    for (const auto& spec : specs) {
        std::size_t idx = loose.size();
        for (std::size_t i = 0; i < loose.size(); ++i)
            if (loose[i].name == spec.name) {
                idx = i;
                break;
            }
        if (idx == loose.size())
            throw std::runtime_error("checkpoint: missing tensor " + spec.name);
        if (loose[idx].shape != spec.shape)
            throw std::runtime_error("model: shape mismatch for tensor " + spec.name);
        params.tensors.push_back(std::move(loose[idx]));
    }
    return params;
}

}  // namespace emw
