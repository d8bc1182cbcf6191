// emwave — command-line driver for the finite-volume solver, dataset
// generation, surrogate training and evaluation.
//
// Exit codes: 0 success, 2 usage error, 3 invalid configuration,
// 4 missing or unreadable file, 5 runtime failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "emw/dataset.hpp"
#include "emw/eval.hpp"
#include "emw/field.hpp"
#include "emw/manifest.hpp"
#include "emw/model.hpp"
#include "emw/oracle.hpp"
#include "emw/solver.hpp"
#include "emw/train.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitMissingFile = 4;
constexpr int kExitRuntime = 5;

std::vector<std::string> g_args;

emw::TestCase parse_case(int case_no) {
    if (case_no == 1) return emw::TestCase::Case1;
    if (case_no == 2) return emw::TestCase::Case2;
    throw std::invalid_argument("case must be 1 or 2");
}

emw::Split parse_split(const std::string& s) {
    if (s == "train") return emw::Split::Train;
    if (s == "val") return emw::Split::Val;
    if (s == "test") return emw::Split::Test;
    throw std::invalid_argument("split must be train, val or test");
}

emw::Boundary parse_boundary(const std::string& s) {
    if (s == "outflow") return emw::Boundary::Outflow;
    if (s == "periodic") return emw::Boundary::Periodic;
    throw std::invalid_argument("boundary must be outflow or periodic");
}

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct ModelOpts {
    int history = 5;
    int patch = 33;
    int overlap = 1;
    int hidden = 128;
    int depth = 4;
    int heads = 4;
    int modes = 8;
    bool no_freq_path = false;

    emw::ModelConfig to_config(int n_cells) const {
        emw::ModelConfig mc;
        mc.n_cells = n_cells;
        mc.history = history;
        mc.patch = patch;
        mc.overlap = overlap;
        mc.hidden = hidden;
        mc.depth = depth;
        mc.heads = heads;
        mc.modes = modes;
        mc.use_freq_path = !no_freq_path;
        return mc;
    }
};

void add_model_options(CLI::App* cmd, ModelOpts& m) {
    cmd->add_option("--history", m.history, "Input snapshots per window");
    cmd->add_option("--patch", m.patch, "Patch length in cells");
    cmd->add_option("--overlap", m.overlap, "Shared cells between patches");
    cmd->add_option("--hidden", m.hidden, "Transformer width");
    cmd->add_option("--depth", m.depth, "Transformer layers per path");
    cmd->add_option("--heads", m.heads, "Attention heads");
    cmd->add_option("--modes", m.modes, "Kept Fourier modes per patch");
    cmd->add_flag("--no-freq-path", m.no_freq_path, "Disable the frequency path");
}

struct TrainOpts {
    std::uint64_t seed = 1;
    int epochs = 20;
    int batch_size = 16;
    double lr_max = 1e-3;
    double lr_min = 1e-5;
    double clip_norm = 1.0;
    int window_stride = 1;
    int val_window_stride = 1;
    int max_batches = 0;
    int jobs = 1;

    emw::TrainConfig to_config() const {
        emw::TrainConfig tc;
        tc.seed = seed;
        tc.epochs = epochs;
        tc.batch_size = batch_size;
        tc.lr_max = lr_max;
        tc.lr_min = lr_min;
        tc.clip_norm = clip_norm;
        tc.window_stride = window_stride;
        tc.val_window_stride = val_window_stride;
        tc.max_batches_per_epoch = max_batches;
        tc.jobs = jobs;
        return tc;
    }
};

void add_train_options(CLI::App* cmd, TrainOpts& t) {
    cmd->add_option("--seed", t.seed, "Seed for init and shuffling");
    cmd->add_option("--epochs", t.epochs, "Training epochs");
    cmd->add_option("--batch", t.batch_size, "Windows per optimizer step");
    cmd->add_option("--lr-max", t.lr_max, "Peak learning rate");
    cmd->add_option("--lr-min", t.lr_min, "Final learning rate");
    cmd->add_option("--clip", t.clip_norm, "Global gradient-norm clip (<=0 disables)");
    cmd->add_option("--window-stride", t.window_stride,
                    "Keep every k-th training window");
    cmd->add_option("--val-window-stride", t.val_window_stride,
                    "Keep every k-th validation window");
    cmd->add_option("--max-batches", t.max_batches,
                    "Cap on optimizer steps per epoch (0 = no cap)");
    cmd->add_option("--jobs", t.jobs, "Worker threads (0 = all cores)");
}

int find_sample_index(const emw::Dataset& ds, int sample_id) {
    if (sample_id < 0) {
        const auto idx = ds.indices_of(emw::Split::Test);
        if (idx.empty()) throw std::runtime_error("dataset has no test samples");
        return idx.front();
    }
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        if (static_cast<int>(ds.samples[i].id) == sample_id)
            return static_cast<int>(i);
    throw std::invalid_argument("sample id " + std::to_string(sample_id) +
                                " not in dataset");
}

void cmd_generate(int case_no, const std::string& out, std::uint64_t seed,
                  int samples, int cells, int jobs) {
    emw::GenerateOptions opt;
    opt.n_samples = samples;
    opt.n_cells = cells;
    opt.jobs = emw::effective_jobs(jobs);
    const emw::Dataset ds = emw::generate(parse_case(case_no), seed, opt);
    emw::write_dataset(ds, out);

    emw::RunManifest man;
    man.command = "generate";
    man.args = g_args;
    man.seed = seed;
    man.add_artifact(out);
    man.add_artifact(out + ".json");
    emw::write_manifest(out + ".manifest.json", man);
    std::cout << "wrote " << out << ": case=" << case_no << " samples=" << samples
              << " rows=" << ds.n_rows() << " cells=" << cells << "\n";
}

void cmd_solve(int case_no, double r1, double r2, double r3, int cells, int steps,
               double cfl, const std::string& boundary, bool validate,
               const std::string& out) {
    const auto [spec, mat] = emw::sample_spec(parse_case(case_no), r1, r2, r3);
    const emw::Grid1D grid(cells, 0.0, 1.0);
    emw::SolverConfig cfg;
    cfg.cfl = cfl;
    cfg.n_steps = steps;
    cfg.boundary = parse_boundary(boundary);

    const auto t0 = std::chrono::steady_clock::now();
    const emw::Trajectory traj = emw::simulate(emw::initial_state(spec, grid, mat),
                                               grid, mat, cfg);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "simulated " << steps << " steps in " << secs << " s\n";

    if (validate) {
        double worst = 0.0;
        for (const auto& st : traj.states) {
            const emw::FieldState ex =
                emw::oracle_state(spec, mat, grid, st.time, st.step);
            double num = 0.0, den = 0.0;
            for (int i = 0; i < cells; ++i) {
                num = std::max(num, std::abs(st.e[i] - ex.e[i]));
                den = std::max(den, std::abs(ex.e[i]));
            }
            worst = std::max(worst, num / den);
        }
        std::cout << "validate: max_rel_err=" << format_g17(worst) << "\n";
    }

    if (!out.empty()) {
        nlohmann::json energy = nlohmann::json::array();
        for (const auto& st : traj.states)
            energy.push_back(emw::em_energy(st, grid, mat));
        const auto& fin = traj.states.back();
        nlohmann::json j{{"case", case_no},
                         {"r1", r1},
                         {"r2", r2},
                         {"r3", r3},
                         {"c1", mat.c1},
                         {"c2", mat.c2},
                         {"x_j", mat.x_j},
                         {"cells", cells},
                         {"steps", steps},
                         {"cfl", cfl},
                         {"dt", traj.config.dt},
                         {"boundary", boundary},
                         {"energy", energy},
                         {"final_e", fin.e},
                         {"final_b", fin.b}};
        std::ofstream f(out, std::ios::trunc);
        if (!f) throw std::runtime_error("solve: cannot open " + out + " for writing");
        f << j.dump(2) << "\n";

        emw::RunManifest man;
        man.command = "solve";
        man.args = g_args;
        man.add_artifact(out);
        emw::write_manifest(out + ".manifest.json", man);
        std::cout << "wrote " << out << "\n";
    }
}

void cmd_train(const std::string& data, const std::string& out,
               const std::string& report, const ModelOpts& mo, const TrainOpts& to) {
    const emw::Dataset ds = emw::read_dataset(data);
    const emw::ModelConfig mc = mo.to_config(ds.grid.n_cells);
    const emw::TrainConfig tc = to.to_config();
    const emw::TrainReport rep = emw::train_model(ds, mc, tc, out);
    const std::string report_path = report.empty() ? out + ".report.json" : report;
    emw::write_train_report(report_path, rep, mc, tc);

    emw::RunManifest man;
    man.command = "train";
    man.args = g_args;
    man.seed = tc.seed;
    man.add_artifact(out);
    man.add_artifact(out + ".json");
    man.add_artifact(report_path);
    emw::write_manifest(out + ".manifest.json", man);
    std::cout << "best_epoch=" << rep.best_epoch << " best_val="
              << format_g17(rep.best_val) << " model=" << out << "\n";
}

void cmd_grid_search(const std::string& data, const std::string& out_dir,
                     const std::vector<int>& hiddens, const std::vector<int>& patches,
                     const std::vector<int>& depths, const std::vector<int>& overlaps,
                     const ModelOpts& mo, const TrainOpts& to) {
    const emw::Dataset ds = emw::read_dataset(data);
    const emw::ModelConfig base = mo.to_config(ds.grid.n_cells);
    const auto points = emw::grid_search(ds, base, to.to_config(), hiddens, patches,
                                         depths, overlaps, out_dir);
    const std::string report_path = out_dir + "/grid.json";
    emw::write_grid_report(report_path, points);

    emw::RunManifest man;
    man.command = "grid-search";
    man.args = g_args;
    man.seed = to.seed;
    man.add_artifact(report_path);
    for (const auto& pt : points) man.add_artifact(pt.report.model_path);
    emw::write_manifest(out_dir + "/manifest.json", man);
    for (std::size_t i = 0; i < points.size(); ++i)
        std::cout << "rank=" << i << " hidden=" << points[i].config.hidden
                  << " patch=" << points[i].config.patch
                  << " depth=" << points[i].config.depth
                  << " overlap=" << points[i].config.overlap
                  << " best_val=" << format_g17(points[i].report.best_val) << "\n";
}

void cmd_rollout(const std::string& model, const std::string& data, int sample_id,
                 int steps, const std::string& out) {
    const emw::ModelParams mp = emw::read_model(model);
    const emw::Dataset ds = emw::read_dataset(data);
    const int idx = find_sample_index(ds, sample_id);
    emw::RolloutResult rr = emw::rollout_sample(mp, ds, idx);
    std::size_t keep = rr.predictions.size();
    if (steps > 0) keep = std::min<std::size_t>(keep, static_cast<std::size_t>(steps));

    std::ofstream f(out, std::ios::trunc);
    if (!f) throw std::runtime_error("rollout: cannot open " + out + " for writing");
    f << "step,rel_err";
    for (int j = 0; j < ds.grid.n_cells; ++j) f << ",cell_" << j;
    f << "\n";
    for (std::size_t k = 0; k < keep; ++k) {
        f << (k + 1) << "," << format_g17(rr.rel_err[k]);
        for (double v : rr.predictions[k]) f << "," << format_g17(v);
        f << "\n";
    }
    f.close();

    emw::RunManifest man;
    man.command = "rollout";
    man.args = g_args;
    man.seed = ds.seed;
    man.add_artifact(out);
    emw::write_manifest(out + ".manifest.json", man);
    std::cout << "wrote " << out << ": sample=" << rr.sample_id << " steps=" << keep
              << "\n";
}

void write_eval_outputs(const emw::ModelParams& mp, const emw::Dataset& ds,
                        emw::Split split, int horizon,
                        const std::vector<int>& spectrum_steps, int spectrum_sample,
                        int jobs, const std::string& out_dir,
                        emw::RunManifest& man) {
    std::filesystem::create_directories(out_dir);
    const auto rolls = emw::rollout_split(mp, ds, split, jobs);
    const emw::ErrorCurve curve = emw::error_curve(rolls);

    const std::string curve_path = out_dir + "/error_curve.csv";
    emw::write_error_curve_csv(curve_path, curve);
    man.add_artifact(curve_path);

    nlohmann::json metrics{
        {"n_rollouts", rolls.size()},
        {"horizon", horizon},
        {"mean_rel_err_horizon", emw::mean_rel_err(curve, 1, horizon)},
        {"mean_rel_err_full",
         emw::mean_rel_err(curve, 1, static_cast<int>(curve.mean.size()))}};
    const std::string metrics_path = out_dir + "/metrics.json";
    std::ofstream mf(metrics_path, std::ios::trunc);
    if (!mf)
        throw std::runtime_error("eval: cannot open " + metrics_path + " for writing");
    mf << metrics.dump(2) << "\n";
    mf.close();
    man.add_artifact(metrics_path);

    const int idx = find_sample_index(ds, spectrum_sample);
    const emw::RolloutResult* rr = nullptr;
    for (const auto& r : rolls)
        if (r.sample_id == static_cast<int>(ds.samples[idx].id)) rr = &r;
    if (rr == nullptr)
        throw std::invalid_argument("spectrum sample is not in the evaluated split");
    const int m = mp.config.history;
    for (int k : spectrum_steps) {
        if (k < 1 || k > static_cast<int>(rr->predictions.size())) {
            std::cerr << "skipping spectrum step " << k << " (out of range)\n";
            continue;
        }
        char name[48];
        std::snprintf(name, sizeof name, "/spectrum_t%03d.csv", k);
        const std::string path = out_dir + name;
        emw::write_spectrum_csv(path, ds.row(idx, m + k - 1),
                                rr->predictions[static_cast<std::size_t>(k - 1)].data(),
                                ds.grid.n_cells);
        man.add_artifact(path);
    }
}

void cmd_eval(const std::string& model, const std::string& data,
              const std::string& split, int horizon,
              const std::vector<int>& spectrum_steps, int spectrum_sample, int jobs,
              const std::string& out_dir) {
    const emw::ModelParams mp = emw::read_model(model);
    const emw::Dataset ds = emw::read_dataset(data);
    emw::RunManifest man;
    man.command = "eval";
    man.args = g_args;
    man.seed = ds.seed;
    write_eval_outputs(mp, ds, parse_split(split), horizon, spectrum_steps,
                       spectrum_sample, jobs, out_dir, man);
    emw::write_manifest(out_dir + "/manifest.json", man);
    std::cout << "wrote evaluation outputs to " << out_dir << "\n";
}

void cmd_ablate(const std::vector<std::string>& data_paths,
                const std::vector<int>& mode_sweep, int horizon,
                const ModelOpts& mo, const TrainOpts& to,
                const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::vector<emw::Dataset> datasets;
    datasets.reserve(data_paths.size());
    for (const auto& p : data_paths) datasets.push_back(emw::read_dataset(p));
    std::vector<const emw::Dataset*> ptrs;
    for (const auto& d : datasets) ptrs.push_back(&d);

    emw::AblationSpec spec;
    spec.base_model = mo.to_config(datasets.front().grid.n_cells);
    spec.train = to.to_config();
    spec.mode_sweep = mode_sweep;
    spec.horizon = horizon;
    spec.jobs = to.jobs;
    const auto rows = emw::ablate(ptrs, spec, out_dir);

    const std::string csv_path = out_dir + "/ablation.csv";
    const std::string json_path = out_dir + "/ablation.json";
    emw::write_ablation_csv(csv_path, rows);
    emw::write_ablation_report(json_path, rows);

    emw::RunManifest man;
    man.command = "ablate";
    man.args = g_args;
    man.seed = to.seed;
    man.add_artifact(csv_path);
    man.add_artifact(json_path);
    emw::write_manifest(out_dir + "/manifest.json", man);
    for (const auto& r : rows)
        std::cout << "variant=" << r.variant << " case=" << r.test_case
                  << " metric=" << format_g17(r.metric) << "\n";
}

void cmd_export_plots(const std::string& model, const std::string& data,
                      const std::string& split, int horizon,
                      const std::vector<int>& spectrum_steps, int spectrum_sample,
                      int jobs, const std::string& ablation_report,
                      const std::string& out_dir) {
    const emw::ModelParams mp = emw::read_model(model);
    const emw::Dataset ds = emw::read_dataset(data);
    emw::RunManifest man;
    man.command = "export-plots";
    man.args = g_args;
    man.seed = ds.seed;
    write_eval_outputs(mp, ds, parse_split(split), horizon, spectrum_steps,
                       spectrum_sample, jobs, out_dir, man);

    if (!ablation_report.empty()) {
        std::ifstream f(ablation_report);
        if (!f)
            throw std::runtime_error("export-plots: cannot open " + ablation_report);
        nlohmann::json j;
        f >> j;
        std::vector<emw::AblationRow> rows;
        for (const auto& rj : j.at("rows"))
            rows.push_back({rj.at("variant").get<std::string>(),
                            rj.at("case").get<int>(), rj.at("metric").get<double>()});
        const std::string csv_path = out_dir + "/ablation.csv";
        emw::write_ablation_csv(csv_path, rows);
        man.add_artifact(csv_path);
    }
    emw::write_manifest(out_dir + "/manifest.json", man);
    std::cout << "wrote plot data to " << out_dir << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    for (int i = 0; i < argc; ++i) g_args.emplace_back(argv[i]);

    CLI::App app{
        "emwave: finite-volume solver and Fourier-transformer surrogate for\n"
        "1D electromagnetic wave propagation across a material interface"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "Generate a trajectory dataset");
    int gen_case = 1;
    std::string gen_out;
    std::uint64_t gen_seed = 1;
    int gen_samples = 200, gen_cells = 256, gen_jobs = 1;
    gen->add_option("--case", gen_case, "Test case (1 or 2)")->required();
    gen->add_option("--out", gen_out, "Output dataset path")->required();
    gen->add_option("--seed", gen_seed, "Dataset seed");
    gen->add_option("--samples", gen_samples, "Number of samples");
    gen->add_option("--cells", gen_cells, "Grid cells");
    gen->add_option("--jobs", gen_jobs, "Worker threads (0 = all cores)");
    gen->callback([&] {
        cmd_generate(gen_case, gen_out, gen_seed, gen_samples, gen_cells, gen_jobs);
    });

    // solve
    auto* sol = app.add_subcommand("solve", "Run one finite-volume trajectory");
    int sol_case = 1, sol_cells = 256, sol_steps = 200;
    double sol_r1 = 0.5, sol_r2 = 0.5, sol_r3 = 0.0, sol_cfl = 0.64;
    std::string sol_boundary = "outflow", sol_out;
    bool sol_validate = false;
    sol->add_option("--case", sol_case, "Test case (1 or 2)");
    sol->add_option("--r1", sol_r1, "Packet draw r1 in [0,1)");
    sol->add_option("--r2", sol_r2, "Packet draw r2 in [0,1)");
    sol->add_option("--r3", sol_r3, "Speed draw r3 in [0,1), case 2 only");
    sol->add_option("--cells", sol_cells, "Grid cells");
    sol->add_option("--steps", sol_steps, "Time steps");
    sol->add_option("--cfl", sol_cfl, "CFL number");
    sol->add_option("--boundary", sol_boundary, "outflow or periodic");
    sol->add_flag("--validate", sol_validate,
                  "Compare against the closed-form solution");
    sol->add_option("--out", sol_out, "Write a trajectory summary JSON");
    sol->callback([&] {
        cmd_solve(sol_case, sol_r1, sol_r2, sol_r3, sol_cells, sol_steps, sol_cfl,
                  sol_boundary, sol_validate, sol_out);
    });

    // train
    auto* trn = app.add_subcommand("train", "Train the surrogate on a dataset");
    std::string trn_data, trn_out, trn_report;
    ModelOpts trn_model;
    TrainOpts trn_train;
    trn->add_option("--data", trn_data, "Dataset path")->required();
    trn->add_option("--out", trn_out, "Output model path")->required();
    trn->add_option("--report", trn_report, "Training report path");
    add_model_options(trn, trn_model);
    add_train_options(trn, trn_train);
    trn->callback([&] { cmd_train(trn_data, trn_out, trn_report, trn_model, trn_train); });

    // grid-search
    auto* grd = app.add_subcommand("grid-search",
                                   "Train every configuration on a parameter grid");
    std::string grd_data, grd_out_dir = "grid";
    std::vector<int> grd_hidden = {256, 512};
    std::vector<int> grd_patch = {33, 66, 132};
    std::vector<int> grd_depth = {6, 10, 12};
    std::vector<int> grd_overlap = {0, 1};
    ModelOpts grd_model;
    TrainOpts grd_train;
    grd_model.heads = 8;
    grd->add_option("--data", grd_data, "Dataset path")->required();
    grd->add_option("--out-dir", grd_out_dir, "Output directory");
    grd->add_option("--grid-hidden", grd_hidden, "Hidden widths")->delimiter(',');
    grd->add_option("--grid-patch", grd_patch, "Patch lengths")->delimiter(',');
    grd->add_option("--grid-depth", grd_depth, "Depths")->delimiter(',');
    grd->add_option("--grid-overlap", grd_overlap, "Overlaps")->delimiter(',');
    add_model_options(grd, grd_model);
    add_train_options(grd, grd_train);
    grd->callback([&] {
        cmd_grid_search(grd_data, grd_out_dir, grd_hidden, grd_patch, grd_depth,
                        grd_overlap, grd_model, grd_train);
    });

    // rollout
    auto* rol = app.add_subcommand("rollout", "Autoregressive prediction for one sample");
    std::string rol_model, rol_data, rol_out;
    int rol_sample = -1, rol_steps = 0;
    rol->add_option("--model", rol_model, "Model checkpoint path")->required();
    rol->add_option("--data", rol_data, "Dataset path")->required();
    rol->add_option("--sample", rol_sample, "Sample id (default: first test sample)");
    rol->add_option("--steps", rol_steps, "Limit on predicted steps (0 = all)");
    rol->add_option("--out", rol_out, "Output CSV path")->required();
    rol->callback([&] { cmd_rollout(rol_model, rol_data, rol_sample, rol_steps, rol_out); });

    // eval
    auto* evl = app.add_subcommand("eval", "Evaluate a model over a dataset split");
    std::string evl_model, evl_data, evl_split = "test", evl_out_dir = "eval";
    int evl_horizon = 75, evl_sample = -1, evl_jobs = 1;
    std::vector<int> evl_spectrum = {25, 75, 110};
    evl->add_option("--model", evl_model, "Model checkpoint path")->required();
    evl->add_option("--data", evl_data, "Dataset path")->required();
    evl->add_option("--split", evl_split, "Split to evaluate");
    evl->add_option("--horizon", evl_horizon, "Steps averaged into the headline metric");
    evl->add_option("--spectrum-steps", evl_spectrum, "Prediction steps to dump spectra at")
        ->delimiter(',');
    evl->add_option("--spectrum-sample", evl_sample,
                    "Sample id for spectra (default: first test sample)");
    evl->add_option("--jobs", evl_jobs, "Worker threads (0 = all cores)");
    evl->add_option("--out-dir", evl_out_dir, "Output directory");
    evl->callback([&] {
        cmd_eval(evl_model, evl_data, evl_split, evl_horizon, evl_spectrum, evl_sample,
                 evl_jobs, evl_out_dir);
    });

    // ablate
    auto* abl = app.add_subcommand("ablate",
                                   "Train and score path/mode ablation variants");
    std::vector<std::string> abl_data;
    std::vector<int> abl_modes = {4, 8, 16};
    int abl_horizon = 75;
    std::string abl_out_dir = "ablation";
    ModelOpts abl_model;
    TrainOpts abl_train;
    abl_model.hidden = 64;
    abl_model.depth = 2;
    abl->add_option("--data", abl_data, "Dataset path (repeat for several cases)")
        ->required();
    abl->add_option("--mode-sweep", abl_modes, "Fourier mode counts")->delimiter(',');
    abl->add_option("--horizon", abl_horizon, "Steps averaged into the metric");
    abl->add_option("--out-dir", abl_out_dir, "Output directory");
    add_model_options(abl, abl_model);
    add_train_options(abl, abl_train);
    abl->callback([&] {
        cmd_ablate(abl_data, abl_modes, abl_horizon, abl_model, abl_train, abl_out_dir);
    });

    // export-plots
    auto* exp = app.add_subcommand("export-plots",
                                   "Write plot-ready CSVs for a trained model");
    std::string exp_model, exp_data, exp_split = "test", exp_out_dir = "plots";
    std::string exp_ablation;
    int exp_horizon = 75, exp_sample = -1, exp_jobs = 1;
    std::vector<int> exp_spectrum = {25, 75, 110};
    exp->add_option("--model", exp_model, "Model checkpoint path")->required();
    exp->add_option("--data", exp_data, "Dataset path")->required();
    exp->add_option("--split", exp_split, "Split to evaluate");
    exp->add_option("--horizon", exp_horizon, "Steps averaged into the metric");
    exp->add_option("--spectrum-steps", exp_spectrum, "Prediction steps to dump spectra at")
        ->delimiter(',');
    exp->add_option("--spectrum-sample", exp_sample,
                    "Sample id for spectra (default: first test sample)");
    exp->add_option("--jobs", exp_jobs, "Worker threads (0 = all cores)");
    exp->add_option("--ablation-report", exp_ablation,
                    "Existing ablation.json to re-emit as CSV");
    exp->add_option("--out-dir", exp_out_dir, "Output directory");
    exp->callback([&] {
        cmd_export_plots(exp_model, exp_data, exp_split, exp_horizon, exp_spectrum,
                         exp_sample, exp_jobs, exp_ablation, exp_out_dir);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return std::strstr(e.what(), "cannot open") != nullptr ? kExitMissingFile
                                                               : kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
