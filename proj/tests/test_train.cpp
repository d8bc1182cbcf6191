#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

#include "emw/rng.hpp"
#include "emw/train.hpp"
#include "helpers.hpp"
#include "json.hpp"

using namespace emw;
using emwtest::TempDir;

namespace {

struct EnvGuard {
    explicit EnvGuard(const char* value) { ::setenv("EMW_TEST_MODE", value, 1); }
    ~EnvGuard() { ::unsetenv("EMW_TEST_MODE"); }
};

const Dataset& train_ds() {
    static const Dataset ds = [] {
        GenerateOptions opt;
        opt.n_samples = 6;
        opt.n_cells = 64;
        return generate(TestCase::Case1, 3, opt);
    }();
    return ds;
}

ModelConfig tiny64() {
    ModelConfig cfg;
    cfg.n_cells = 64;
    cfg.history = 2;
    cfg.patch = 9;
    cfg.overlap = 1;
    cfg.hidden = 8;
    cfg.depth = 1;
    cfg.heads = 2;
    cfg.modes = 3;
    return cfg;
}

TrainConfig quick_train() {
    TrainConfig cfg;
    cfg.seed = 21;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.lr_max = 2e-3;
    cfg.lr_min = 1e-4;
    cfg.window_stride = 50;
    cfg.val_window_stride = 50;
    return cfg;
}

// standardized forward loss and optional parameter gradients for one window
double window_loss(const ModelParams& params, const Dataset& data, const WindowRef& w,
                   std::vector<std::vector<double>>* grads) {
    const Standardizer st{params.norm_mean, params.norm_sd};
    const int n = data.grid.n_cells;
    const int m = params.config.history;
    std::vector<double> window(static_cast<std::size_t>(m) * n);
    for (int i = 0; i < m; ++i) {
        const double* row = data.row(w.sample, w.t - m + 1 + i);
        for (int j = 0; j < n; ++j)
            window[static_cast<std::size_t>(i) * n + j] = st.fwd(row[j]);
    }
    std::vector<double> target(static_cast<std::size_t>(n));
    const double* trow = data.row(w.sample, w.t + 1);
    for (int j = 0; j < n; ++j) target[static_cast<std::size_t>(j)] = st.fwd(trow[j]);

    Tape tape;
    const BoundModel bm = bind_params(tape, params, grads != nullptr);
    const Tensor pred = model_forward(tape, bm, window);
    const Tensor tgt = tape.leaf({n}, target);
    const Tensor diff = tape.sub(pred, tgt);
    const Tensor loss = tape.mean_all(tape.mul(diff, diff));
    if (grads) {
        tape.backward(loss);
        grads->clear();
        for (const auto& leaf : bm.leaves) grads->push_back(tape.grad(leaf));
    }
    return loss.at(0);
}

}  // namespace

TEST_CASE("effective_jobs resolves requests and honors test mode") {
    CHECK(effective_jobs(3) == 3);
    CHECK(effective_jobs(1) == 1);
    CHECK(effective_jobs(0) >= 1);
    {
        EnvGuard guard("1");
        CHECK(effective_jobs(8) == 1);
        CHECK(effective_jobs(0) == 1);
    }
    CHECK(effective_jobs(8) == 8);
}

TEST_CASE("make_windows covers every valid target with the given stride") {
    Dataset ds;
    ds.grid = Grid1D(8, 0.0, 1.0);
    ds.n_steps = 10;  // rows 0..10
    ds.samples.resize(3);
    ds.split = {Split::Train, Split::Test, Split::Train};

    const auto w = make_windows(ds, Split::Train, 3, 2);
    // per train sample: t in {2, 4, 6, 8}; target t+1 <= 9 < n_rows
    REQUIRE(w.size() == 8);
    CHECK(w[0].sample == 0);
    CHECK(w[0].t == 2);
    CHECK(w[3].t == 8);
    CHECK(w[4].sample == 2);
    for (const auto& ref : w) {
        CHECK(ref.t >= 2);
        CHECK(ref.t + 1 <= ds.n_steps);
    }
    CHECK(make_windows(ds, Split::Test, 3, 1).size() == 8);  // t in 2..9
    CHECK(make_windows(ds, Split::Val, 3, 1).empty());
    CHECK_THROWS_AS(make_windows(ds, Split::Train, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_windows(ds, Split::Train, 3, 0), std::invalid_argument);
}

TEST_CASE("standardizer uses training-split population moments") {
    Dataset ds;
    ds.grid = Grid1D(8, 0.0, 1.0);
    ds.n_steps = 0;  // one row per sample
    ds.samples.resize(2);
    ds.split = {Split::Train, Split::Val};
    ds.samples[0].e_fields = {1, 3, 1, 3, 1, 3, 1, 3};
    ds.samples[1].e_fields = {100, 100, 100, 100, 100, 100, 100, 100};

    const auto st = fit_standardizer(ds);
    CHECK(st.mean == 2.0);  // val split values never contribute
    CHECK(st.sd == 1.0);    // population variance of {1,3}
    CHECK(st.fwd(3.0) == 1.0);
    CHECK(st.inv(st.fwd(0.7)) == doctest::Approx(0.7).epsilon(1e-15));

    // constant data degrades to sd = 1 instead of dividing by zero
    ds.samples[0].e_fields.assign(8, 5.0);
    const auto flat = fit_standardizer(ds);
    CHECK(flat.mean == 5.0);
    CHECK(flat.sd == 1.0);

    ds.split = {Split::Val, Split::Val};
    CHECK_THROWS_AS(fit_standardizer(ds), std::runtime_error);
}

TEST_CASE("cosine schedule spans lr_max to lr_min across epochs") {
    TrainConfig cfg;
    cfg.lr_max = 1e-2;
    cfg.lr_min = 1e-4;
    cfg.epochs = 5;
    CHECK(cosine_lr(cfg, 0) == doctest::Approx(1e-2).epsilon(1e-15));
    CHECK(cosine_lr(cfg, 4) == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(cosine_lr(cfg, 2) == doctest::Approx((1e-2 + 1e-4) / 2).epsilon(1e-12));
    CHECK(cosine_lr(cfg, 1) > cosine_lr(cfg, 2));
    cfg.epochs = 1;
    CHECK(cosine_lr(cfg, 0) == 1e-2);
}

TEST_CASE("one full optimizer step matches a hand-rolled replica") {
    const Dataset& ds = train_ds();
    const ModelConfig mc = tiny64();
    TrainConfig tc;
    tc.seed = 5;
    tc.epochs = 1;
    tc.batch_size = 64;  // one batch holds all windows
    tc.lr_max = 1e-3;
    tc.clip_norm = 1e9;  // stays inactive
    tc.window_stride = 50;
    tc.val_window_stride = 50;

    TempDir dir;
    const auto path = dir.file("step.emwt");
    const auto report = train_model(ds, mc, tc, path);
    REQUIRE(report.epochs.size() == 1);
    REQUIRE(report.n_train_windows == 20);
    REQUIRE(report.n_val_windows == 4);

    // replica: same init, same shuffle, batch-mean gradients, Adam t = 1
    const Standardizer st = fit_standardizer(ds);
    ModelParams params = init_params(mc, tc.seed);
    params.norm_mean = st.mean;
    params.norm_sd = st.sd;

    const auto train_w = make_windows(ds, Split::Train, mc.history, tc.window_stride);
    const auto val_w = make_windows(ds, Split::Val, mc.history, tc.val_window_stride);
    REQUIRE(train_w.size() == 20);
    const auto perm = CounterRng(tc.seed).permutation(
        CounterRng::stream_of("shuffle"), static_cast<int>(train_w.size()));

    std::vector<std::vector<double>> sum;
    for (const auto& t : params.tensors) sum.emplace_back(t.values.size(), 0.0);
    double loss_sum = 0.0;
    for (std::size_t i = 0; i < train_w.size(); ++i) {
        std::vector<std::vector<double>> g;
        loss_sum += window_loss(params, ds, train_w[perm[i]], &g);
        for (std::size_t a = 0; a < sum.size(); ++a)
            for (std::size_t b = 0; b < sum[a].size(); ++b) sum[a][b] += g[a][b];
    }
    const double inv_w = 1.0 / static_cast<double>(train_w.size());
    for (auto& g : sum)
        for (double& v : g) v *= inv_w;
    CHECK(report.epochs[0].train_loss ==
          doctest::Approx(loss_sum * inv_w).epsilon(1e-14));

    const double bc1 = 1.0 - std::pow(tc.adam_beta1, 1.0);
    const double bc2 = 1.0 - std::pow(tc.adam_beta2, 1.0);
    for (std::size_t a = 0; a < params.tensors.size(); ++a) {
        auto& w = params.tensors[a].values;
        for (std::size_t b = 0; b < w.size(); ++b) {
            const double g = sum[a][b];
            const double m = (1.0 - tc.adam_beta1) * g;
            const double v = (1.0 - tc.adam_beta2) * g * g;
            w[b] -= tc.lr_max * (m / bc1) / (std::sqrt(v / bc2) + tc.adam_eps);
        }
    }

    const auto saved = read_model(path);
    REQUIRE(saved.tensors.size() == params.tensors.size());
    for (std::size_t a = 0; a < params.tensors.size(); ++a)
        for (std::size_t b = 0; b < params.tensors[a].values.size(); ++b)
            CHECK(saved.tensors[a].values[b] == params.tensors[a].values[b]);

    // the reported validation loss is the post-step loss in window order
    double val = 0.0;
    for (const auto& w : val_w) val += window_loss(params, ds, w, nullptr);
    val /= static_cast<double>(val_w.size());
    CHECK(report.epochs[0].val_loss == doctest::Approx(val).epsilon(1e-14));
    CHECK(report.best_epoch == 0);
    CHECK(report.best_val == report.epochs[0].val_loss);
}

TEST_CASE("training is deterministic and invariant to the thread count") {
    const Dataset& ds = train_ds();
    const ModelConfig mc = tiny64();
    const TrainConfig tc = quick_train();

    TempDir dir;
    TrainConfig jobs1 = tc, jobs4 = tc;
    jobs1.jobs = 1;
    jobs4.jobs = 4;
    const auto r1 = train_model(ds, mc, jobs1, dir.file("a.emwt"));
    const auto r4 = train_model(ds, mc, jobs4, dir.file("b.emwt"));
    REQUIRE(r1.epochs.size() == r4.epochs.size());
    for (std::size_t e = 0; e < r1.epochs.size(); ++e) {
        CHECK(r1.epochs[e].train_loss == r4.epochs[e].train_loss);
        CHECK(r1.epochs[e].val_loss == r4.epochs[e].val_loss);
    }
    CHECK(emwtest::read_bytes(dir.file("a.emwt")) ==
          emwtest::read_bytes(dir.file("b.emwt")));
    CHECK(emwtest::read_bytes(dir.file("a.emwt.json")) ==
          emwtest::read_bytes(dir.file("b.emwt.json")));

    // a different seed trains a different model
    TrainConfig other = tc;
    other.seed = 22;
    train_model(ds, mc, other, dir.file("c.emwt"));
    CHECK(emwtest::read_bytes(dir.file("a.emwt")) !=
          emwtest::read_bytes(dir.file("c.emwt")));
}

TEST_CASE("training reduces the loss and tracks the best checkpoint") {
    const Dataset& ds = train_ds();
    const ModelConfig mc = tiny64();
    TrainConfig tc = quick_train();
    tc.epochs = 6;

    TempDir dir;
    const auto path = dir.file("model.emwt");
    const auto report = train_model(ds, mc, tc, path);
    REQUIRE(report.epochs.size() == 6);
    CHECK(report.epochs.back().train_loss < report.epochs.front().train_loss);

    double best = report.epochs[0].val_loss;
    int best_epoch = 0;
    for (const auto& e : report.epochs)
        if (e.val_loss < best) {
            best = e.val_loss;
            best_epoch = e.epoch;
        }
    CHECK(report.best_val == best);
    CHECK(report.best_epoch == best_epoch);

    // saved model carries the fitted standardizer
    const auto saved = read_model(path);
    const auto st = fit_standardizer(ds);
    CHECK(saved.norm_mean == st.mean);
    CHECK(saved.norm_sd == st.sd);

    // the checkpoint reproduces the reported best validation loss
    const auto val_w = make_windows(ds, Split::Val, mc.history, tc.val_window_stride);
    double val = 0.0;
    for (const auto& w : val_w) val += window_loss(saved, ds, w, nullptr);
    val /= static_cast<double>(val_w.size());
    CHECK(val == doctest::Approx(report.best_val).epsilon(1e-13));
}

TEST_CASE("training rejects incompatible model and data") {
    const Dataset& ds = train_ds();
    ModelConfig mc = tiny64();
    mc.n_cells = 32;
    TempDir dir;
    CHECK_THROWS_AS(train_model(ds, mc, quick_train(), dir.file("x.emwt")),
                    std::invalid_argument);

    Dataset shallow = ds;
    shallow.n_steps = 0;
    for (auto& s : shallow.samples) s.e_fields.resize(64);
    CHECK_THROWS_AS(train_model(shallow, tiny64(), quick_train(), dir.file("y.emwt")),
                    std::invalid_argument);
}

TEST_CASE("train report serializes the run and zeroes wall time in test mode") {
    const Dataset& ds = train_ds();
    const ModelConfig mc = tiny64();
    TrainConfig tc = quick_train();
    tc.epochs = 2;
    TempDir dir;
    const auto report = train_model(ds, mc, tc, dir.file("m.emwt"));

    {
        EnvGuard guard("1");
        write_train_report(dir.file("report.json"), report, mc, tc);
        const auto j = nlohmann::json::parse(emwtest::read_bytes(dir.file("report.json")));
        CHECK(j.at("wall_seconds").get<double>() == 0.0);
        CHECK(j.at("model").at("hidden").get<int>() == 8);
        CHECK(j.at("train").at("epochs").get<int>() == 2);
        CHECK(j.at("epochs").size() == 2);
        CHECK(j.at("best_epoch").get<int>() == report.best_epoch);
        CHECK(j.at("n_train_windows").get<int>() == report.n_train_windows);
    }
    write_train_report(dir.file("timed.json"), report, mc, tc);
    const auto timed = nlohmann::json::parse(emwtest::read_bytes(dir.file("timed.json")));
    CHECK(timed.at("wall_seconds").get<double>() > 0.0);
}

TEST_CASE("grid search ranks configurations by validation loss") {
    const Dataset& ds = train_ds();
    ModelConfig base = tiny64();
    TrainConfig tc = quick_train();
    tc.epochs = 2;

    TempDir dir;
    const auto out = (dir.path / "grid").string();
    const auto points = grid_search(ds, base, tc, {8}, {9, 17}, {1}, {1}, out);
    REQUIRE(points.size() == 2);
    CHECK(points[0].report.best_val <= points[1].report.best_val);
    for (const auto& pt : points) {
        CHECK(pt.config.hidden == 8);
        CHECK((pt.config.patch == 9 || pt.config.patch == 17));
        CHECK_NOTHROW(read_model(pt.report.model_path));
    }

    write_grid_report(dir.file("grid.json"), points);
    const auto j = nlohmann::json::parse(emwtest::read_bytes(dir.file("grid.json")));
    REQUIRE(j.is_array());
    REQUIRE(j.size() == 2);
    CHECK(j[0].at("rank").get<int>() == 0);
    CHECK(j[0].at("best_val").get<double>() == points[0].report.best_val);
    CHECK(j[1].at("model").at("patch").get<int>() == points[1].config.patch);
}
