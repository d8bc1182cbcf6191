#include "emw/train.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <thread>

#include "emw/rng.hpp"
#include "json.hpp"

namespace emw {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool test_mode() {
    const char* v = std::getenv("EMW_TEST_MODE");
    return v != nullptr && std::string(v) == "1";
}

std::vector<double> window_values(const Dataset& data, const Standardizer& st,
                                  const WindowRef& w, int history) {
    const int n = data.grid.n_cells;
    std::vector<double> win(static_cast<std::size_t>(history) * n);
    for (int i = 0; i < history; ++i) {
        const double* row = data.row(w.sample, w.t - history + 1 + i);
        for (int j = 0; j < n; ++j)
            win[static_cast<std::size_t>(i) * n + j] = st.fwd(row[j]);
    }
    return win;
}

std::vector<double> target_values(const Dataset& data, const Standardizer& st,
                                  const WindowRef& w) {
    const int n = data.grid.n_cells;
    const double* row = data.row(w.sample, w.t + 1);
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) out[j] = st.fwd(row[j]);
    return out;
}

struct WindowResult {
    double loss = 0.0;
    std::vector<std::vector<double>> grads;
};

WindowResult eval_window(const SharedParams& sp, const Dataset& data,
                         const WindowRef& w, bool with_grad) {
    const Standardizer st{sp.norm_mean, sp.norm_sd};
    Tape tape;
    BoundModel bm = bind_params(tape, sp, with_grad);
    Tensor pred =
        model_forward(tape, bm, window_values(data, st, w, sp.config.history));
    Tensor target = tape.leaf({sp.config.n_cells}, target_values(data, st, w));
    Tensor diff = tape.sub(pred, target);
    Tensor loss = tape.mean_all(tape.mul(diff, diff));
    WindowResult res;
    res.loss = loss.at(0);
    if (with_grad) {
        tape.backward(loss);
        res.grads.reserve(bm.leaves.size());
        for (const auto& leaf : bm.leaves) res.grads.push_back(tape.grad(leaf));
    }
    return res;
}

// Windows are evaluated independently and reduced in index order afterward,
// so results do not depend on the thread count.
std::vector<WindowResult> eval_windows(const SharedParams& sp, const Dataset& data,
                                       const std::vector<WindowRef>& refs,
                                       bool with_grad, int jobs) {
    std::vector<WindowResult> results(refs.size());
    jobs = std::min<int>(jobs, static_cast<int>(refs.size()));
    if (jobs <= 1) {
        for (std::size_t i = 0; i < refs.size(); ++i)
            results[i] = eval_window(sp, data, refs[i], with_grad);
        return results;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::string> errors(static_cast<std::size_t>(jobs));
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(jobs));
    for (int wk = 0; wk < jobs; ++wk)
        workers.emplace_back([&, wk] {
            try {
                for (std::size_t i = next.fetch_add(1); i < refs.size();
                     i = next.fetch_add(1))
                    results[i] = eval_window(sp, data, refs[i], with_grad);
            } catch (const std::exception& e) {
                errors[static_cast<std::size_t>(wk)] = e.what();
            }
        });
    for (auto& t : workers) t.join();
    for (const auto& e : errors)
        if (!e.empty()) throw std::runtime_error(e);
    return results;
}

struct AdamState {
    std::vector<std::vector<double>> m, v;
    long long t = 0;
};

AdamState make_adam_state(const SharedParams& sp) {
    AdamState st;
    st.m.reserve(sp.values.size());
    st.v.reserve(sp.values.size());
    for (const auto& val : sp.values) {
        st.m.emplace_back(val->size(), 0.0);
        st.v.emplace_back(val->size(), 0.0);
    }
    return st;
}

void clip_gradients(std::vector<std::vector<double>>& grads, double clip_norm) {
    if (clip_norm <= 0.0) return;
    double sq = 0.0;
    for (const auto& g : grads)
        for (double v : g) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm <= clip_norm) return;
    const double f = clip_norm / norm;
    for (auto& g : grads)
        for (double& v : g) v *= f;
}

void adam_step(SharedParams& sp, AdamState& st,
               const std::vector<std::vector<double>>& grads,
               const TrainConfig& cfg, double lr) {
    ++st.t;
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(st.t));
    for (std::size_t i = 0; i < sp.values.size(); ++i) {
        auto& w = *sp.values[i];
        auto& m = st.m[i];
        auto& v = st.v[i];
        const auto& g = grads[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            m[j] = cfg.adam_beta1 * m[j] + (1.0 - cfg.adam_beta1) * g[j];
            v[j] = cfg.adam_beta2 * v[j] + (1.0 - cfg.adam_beta2) * g[j] * g[j];
            w[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg.adam_eps);
        }
    }
}

nlohmann::json model_cfg_json(const ModelConfig& c) {
    return nlohmann::json{{"n_cells", c.n_cells},   {"history", c.history},
                          {"patch", c.patch},       {"overlap", c.overlap},
                          {"hidden", c.hidden},     {"depth", c.depth},
                          {"heads", c.heads},       {"modes", c.modes},
                          {"use_freq_path", c.use_freq_path}};
}

nlohmann::json train_cfg_json(const TrainConfig& c) {
    return nlohmann::json{{"seed", c.seed},
                          {"epochs", c.epochs},
                          {"batch_size", c.batch_size},
                          {"lr_max", c.lr_max},
                          {"lr_min", c.lr_min},
                          {"adam_beta1", c.adam_beta1},
                          {"adam_beta2", c.adam_beta2},
                          {"adam_eps", c.adam_eps},
                          {"clip_norm", c.clip_norm},
                          {"window_stride", c.window_stride},
                          {"val_window_stride", c.val_window_stride},
                          {"max_batches_per_epoch", c.max_batches_per_epoch}};
}

}  // namespace

int effective_jobs(int requested) {
    if (test_mode()) return 1;
    if (requested <= 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1 : static_cast<int>(hw);
    }
    return requested;
}

std::vector<WindowRef> make_windows(const Dataset& data, Split split, int history,
                                    int stride) {
    if (history < 1) throw std::invalid_argument("make_windows: history must be positive");
    if (stride < 1) throw std::invalid_argument("make_windows: stride must be positive");
    std::vector<WindowRef> refs;
    const int last_t = data.n_rows() - 2;
    for (int s : data.indices_of(split))
        for (int t = history - 1; t <= last_t; t += stride)
            refs.push_back({s, t});
    return refs;
}

Standardizer fit_standardizer(const Dataset& data) {
    double sum = 0.0;
    long long count = 0;
    const int n = data.grid.n_cells;
    const auto train = data.indices_of(Split::Train);
    for (int s : train)
        for (int t = 0; t < data.n_rows(); ++t) {
            const double* row = data.row(s, t);
            for (int j = 0; j < n; ++j) sum += row[j];
            count += n;
        }
    if (count == 0) throw std::runtime_error("standardizer: empty training split");
    Standardizer st;
    st.mean = sum / static_cast<double>(count);
    double sq = 0.0;
    for (int s : train)
        for (int t = 0; t < data.n_rows(); ++t) {
            const double* row = data.row(s, t);
            for (int j = 0; j < n; ++j) {
                const double d = row[j] - st.mean;
                sq += d * d;
            }
        }
    st.sd = std::sqrt(sq / static_cast<double>(count));
    if (!(st.sd > 0.0)) st.sd = 1.0;
    return st;
}

double cosine_lr(const TrainConfig& cfg, int epoch) {
    if (cfg.epochs <= 1) return cfg.lr_max;
    const double phase = kPi * static_cast<double>(epoch) /
                         static_cast<double>(cfg.epochs - 1);
    return cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + std::cos(phase));
}

TrainReport train_model(const Dataset& data, const ModelConfig& model_cfg,
                        const TrainConfig& train_cfg, const std::string& model_path) {
    model_cfg.validate();
    if (model_cfg.n_cells != data.grid.n_cells)
        throw std::invalid_argument("train: model n_cells does not match dataset");
    if (model_cfg.history + 1 > data.n_rows())
        throw std::invalid_argument("train: dataset too short for history length");

    const Standardizer st = fit_standardizer(data);
    ModelParams initial = init_params(model_cfg, train_cfg.seed);
    initial.norm_mean = st.mean;
    initial.norm_sd = st.sd;
    SharedParams sp = make_shared_params(initial);

    const auto train_w =
        make_windows(data, Split::Train, model_cfg.history, train_cfg.window_stride);
    const auto val_w =
        make_windows(data, Split::Val, model_cfg.history, train_cfg.val_window_stride);
    if (train_w.empty()) throw std::runtime_error("train: no training windows");
    if (val_w.empty()) throw std::runtime_error("train: no validation windows");

    AdamState adam = make_adam_state(sp);
    CounterRng rng(train_cfg.seed);
    const int jobs = effective_jobs(train_cfg.jobs);
    const auto t0 = std::chrono::steady_clock::now();

    TrainReport rep;
    rep.model_path = model_path;
    rep.n_train_windows = static_cast<int>(train_w.size());
    rep.n_val_windows = static_cast<int>(val_w.size());
    rep.best_val = std::numeric_limits<double>::infinity();

    for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
        const double lr = cosine_lr(train_cfg, epoch);
        const auto perm = rng.permutation(
            CounterRng::stream_of("shuffle") + static_cast<std::uint64_t>(epoch),
            static_cast<int>(train_w.size()));
        int n_batches = (static_cast<int>(train_w.size()) + train_cfg.batch_size - 1) /
                        train_cfg.batch_size;
        if (train_cfg.max_batches_per_epoch > 0)
            n_batches = std::min(n_batches, train_cfg.max_batches_per_epoch);

        double loss_sum = 0.0;
        long long n_seen = 0;
        for (int b = 0; b < n_batches; ++b) {
            const int lo = b * train_cfg.batch_size;
            const int hi = std::min<int>(lo + train_cfg.batch_size,
                                         static_cast<int>(train_w.size()));
            std::vector<WindowRef> batch;
            batch.reserve(static_cast<std::size_t>(hi - lo));
            for (int i = lo; i < hi; ++i) batch.push_back(train_w[perm[i]]);

            const auto results = eval_windows(sp, data, batch, true, jobs);
            const double inv_w = 1.0 / static_cast<double>(batch.size());
            std::vector<std::vector<double>> grads;
            grads.reserve(sp.values.size());
            for (const auto& val : sp.values) grads.emplace_back(val->size(), 0.0);
            double batch_loss = 0.0;
            for (const auto& res : results) {
                batch_loss += res.loss;
                for (std::size_t i = 0; i < grads.size(); ++i)
                    for (std::size_t j = 0; j < grads[i].size(); ++j)
                        grads[i][j] += res.grads[i][j];
            }
            batch_loss *= inv_w;
            for (auto& g : grads)
                for (double& v : g) v *= inv_w;

            clip_gradients(grads, train_cfg.clip_norm);
            adam_step(sp, adam, grads, train_cfg, lr);
            loss_sum += batch_loss * static_cast<double>(batch.size());
            n_seen += static_cast<long long>(batch.size());
        }

        const auto val_results = eval_windows(sp, data, val_w, false, jobs);
        double val_loss = 0.0;
        for (const auto& res : val_results) val_loss += res.loss;
        val_loss /= static_cast<double>(val_results.size());

        EpochStats es;
        es.epoch = epoch;
        es.lr = lr;
        es.train_loss = loss_sum / static_cast<double>(n_seen);
        es.val_loss = val_loss;
        rep.epochs.push_back(es);

        if (val_loss < rep.best_val) {
            rep.best_val = val_loss;
            rep.best_epoch = epoch;
            write_model(model_path, to_model_params(sp));
        }
    }

    rep.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

void write_train_report(const std::string& path, const TrainReport& report,
                        const ModelConfig& model_cfg, const TrainConfig& train_cfg) {
    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& e : report.epochs)
        epochs.push_back({{"epoch", e.epoch},
                          {"lr", e.lr},
                          {"train_loss", e.train_loss},
                          {"val_loss", e.val_loss}});
    nlohmann::json j{{"model", model_cfg_json(model_cfg)},
                     {"train", train_cfg_json(train_cfg)},
                     {"n_train_windows", report.n_train_windows},
                     {"n_val_windows", report.n_val_windows},
                     {"best_epoch", report.best_epoch},
                     {"best_val", report.best_val},
                     {"epochs", epochs},
                     {"model_path", report.model_path},
                     // wall time is zeroed in test mode so reruns are
                     // byte-identical
                     {"wall_seconds", test_mode() ? 0.0 : report.wall_seconds}};
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("train: cannot open " + path + " for writing");
    f << j.dump(2) << "\n";
}

std::vector<GridPoint> grid_search(const Dataset& data, const ModelConfig& base_model,
                                   const TrainConfig& train_cfg,
                                   const std::vector<int>& hiddens,
                                   const std::vector<int>& patches,
                                   const std::vector<int>& depths,
                                   const std::vector<int>& overlaps,
                                   const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::vector<GridPoint> points;
    for (int h : hiddens)
        for (int p : patches)
            for (int d : depths)
                for (int o : overlaps) {
                    ModelConfig mc = base_model;
                    mc.hidden = h;
                    mc.patch = p;
                    mc.depth = d;
                    mc.overlap = o;
                    const std::string path =
                        out_dir + "/model_h" + std::to_string(h) + "_p" +
                        std::to_string(p) + "_d" + std::to_string(d) + "_o" +
                        std::to_string(o) + ".emwt";
                    GridPoint pt;
                    pt.config = mc;
                    pt.report = train_model(data, mc, train_cfg, path);
                    points.push_back(std::move(pt));
                }
    std::stable_sort(points.begin(), points.end(),
                     [](const GridPoint& a, const GridPoint& b) {
                         if (a.report.best_val != b.report.best_val)
                             return a.report.best_val < b.report.best_val;
                         const auto ka = std::array<int, 4>{a.config.hidden, a.config.patch,
                                                            a.config.depth, a.config.overlap};
                         const auto kb = std::array<int, 4>{b.config.hidden, b.config.patch,
                                                            b.config.depth, b.config.overlap};
                         return ka < kb;
                     });
    return points;
}

void write_grid_report(const std::string& path, const std::vector<GridPoint>& points) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& pt = points[i];
        arr.push_back({{"rank", static_cast<int>(i)},
                       {"model", model_cfg_json(pt.config)},
                       {"best_val", pt.report.best_val},
                       {"best_epoch", pt.report.best_epoch},
                       {"model_path", pt.report.model_path}});
    }
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("train: cannot open " + path + " for writing");
    f << arr.dump(2) << "\n";
}

}  // namespace emw
