#include "emw/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "emw/fft.hpp"
#include "json.hpp"

namespace emw {

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

double row_rel_err(const double* pred, const double* truth, int n) {
    double num = 0.0, den = 0.0;
    for (int j = 0; j < n; ++j) {
        const double d = pred[j] - truth[j];
        num += d * d;
        den += truth[j] * truth[j];
    }
    if (den == 0.0) throw std::runtime_error("eval: zero-norm reference row");
    return std::sqrt(num / den);
}

double test_split_metric(const ModelParams& params, const Dataset& data,
                         int horizon, int jobs) {
    const auto rolls = rollout_split(params, data, Split::Test, jobs);
    return mean_rel_err(error_curve(rolls), 1, horizon);
}

}  // namespace

std::vector<std::vector<double>> rollout(const ModelParams& params,
                                         const std::vector<double>& seed_window,
                                         int n_steps) {
    const ModelConfig& cfg = params.config;
    const int m = cfg.history, n = cfg.n_cells;
    if (static_cast<int>(seed_window.size()) != m * n)
        throw std::invalid_argument("rollout: seed window size mismatch");
    if (n_steps < 0) throw std::invalid_argument("rollout: negative step count");
    const Standardizer st{params.norm_mean, params.norm_sd};
    SharedParams sp = make_shared_params(params);

    std::vector<double> window(seed_window);
    for (double& v : window) v = st.fwd(v);

    std::vector<std::vector<double>> out;
    out.reserve(static_cast<std::size_t>(n_steps));
    for (int step = 0; step < n_steps; ++step) {
        Tape tape;
        BoundModel bm = bind_params(tape, sp, false);
        Tensor pred = model_forward(tape, bm, window);
        std::move(window.begin() + n, window.end(), window.begin());
        std::vector<double> row(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j) {
            const double y = pred.at(j);
            window[static_cast<std::size_t>(m - 1) * n + j] = y;
            row[static_cast<std::size_t>(j)] = st.inv(y);
        }
        out.push_back(std::move(row));
    }
    return out;
}

RolloutResult rollout_sample(const ModelParams& params, const Dataset& data,
                             int sample_idx) {
    const ModelConfig& cfg = params.config;
    if (cfg.n_cells != data.grid.n_cells)
        throw std::invalid_argument("rollout: model n_cells does not match dataset");
    if (cfg.history >= data.n_rows())
        throw std::invalid_argument("rollout: dataset too short for history length");
    const int n = cfg.n_cells, m = cfg.history;
    std::vector<double> seed(static_cast<std::size_t>(m) * n);
    for (int t = 0; t < m; ++t) {
        const double* row = data.row(sample_idx, t);
        std::copy(row, row + n, seed.begin() + static_cast<std::size_t>(t) * n);
    }
    const int n_steps = data.n_rows() - m;

    RolloutResult res;
    res.sample_id = data.samples[static_cast<std::size_t>(sample_idx)].id;
    res.predictions = rollout(params, seed, n_steps);
    res.rel_err.reserve(static_cast<std::size_t>(n_steps));
    for (int k = 0; k < n_steps; ++k)
        res.rel_err.push_back(
            row_rel_err(res.predictions[static_cast<std::size_t>(k)].data(),
                        data.row(sample_idx, m + k), n));
    return res;
}

std::vector<RolloutResult> rollout_split(const ModelParams& params,
                                         const Dataset& data, Split split,
                                         int jobs) {
    const auto idx = data.indices_of(split);
    std::vector<RolloutResult> results(idx.size());
    jobs = std::min<int>(effective_jobs(jobs), static_cast<int>(idx.size()));
    if (jobs <= 1) {
        for (std::size_t i = 0; i < idx.size(); ++i)
            results[i] = rollout_sample(params, data, idx[i]);
        return results;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::string> errors(static_cast<std::size_t>(jobs));
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(jobs));
    for (int w = 0; w < jobs; ++w)
        workers.emplace_back([&, w] {
            try {
                for (std::size_t i = next.fetch_add(1); i < idx.size();
                     i = next.fetch_add(1))
                    results[i] = rollout_sample(params, data, idx[i]);
            } catch (const std::exception& e) {
                errors[static_cast<std::size_t>(w)] = e.what();
            }
        });
    for (auto& t : workers) t.join();
    for (const auto& e : errors)
        if (!e.empty()) throw std::runtime_error(e);
    return results;
}

ErrorCurve error_curve(const std::vector<RolloutResult>& rollouts) {
    if (rollouts.empty()) throw std::invalid_argument("error_curve: no rollouts");
    std::size_t len = rollouts[0].rel_err.size();
    for (const auto& r : rollouts) len = std::min(len, r.rel_err.size());
    ErrorCurve curve;
    curve.mean.resize(len);
    curve.sd.resize(len);
    const double inv = 1.0 / static_cast<double>(rollouts.size());
    for (std::size_t k = 0; k < len; ++k) {
        double s = 0.0;
        for (const auto& r : rollouts) s += r.rel_err[k];
        const double mu = s * inv;
        double sq = 0.0;
        for (const auto& r : rollouts) {
            const double d = r.rel_err[k] - mu;
            sq += d * d;
        }
        curve.mean[k] = mu;
        curve.sd[k] = std::sqrt(sq * inv);
    }
    return curve;
}

double mean_rel_err(const ErrorCurve& curve, int k0, int k1) {
    k0 = std::max(k0, 1);
    k1 = std::min<int>(k1, static_cast<int>(curve.mean.size()));
    if (k0 > k1) throw std::invalid_argument("mean_rel_err: empty step range");
    double s = 0.0;
    for (int k = k0; k <= k1; ++k) s += curve.mean[static_cast<std::size_t>(k - 1)];
    return s / static_cast<double>(k1 - k0 + 1);
}

std::vector<double> amplitude_spectrum(const double* row, int n) {
    const int r = max_modes(n);
    std::vector<double> re(static_cast<std::size_t>(r)), im(static_cast<std::size_t>(r));
    real_dft(row, n, r, re.data(), im.data());
    std::vector<double> amp(static_cast<std::size_t>(r));
    for (int k = 0; k < r; ++k)
        amp[static_cast<std::size_t>(k)] = std::hypot(re[static_cast<std::size_t>(k)],
                                                      im[static_cast<std::size_t>(k)]);
    return amp;
}

void write_error_curve_csv(const std::string& path, const ErrorCurve& curve) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("eval: cannot open " + path + " for writing");
    f << "step,mean,std\n";
    for (std::size_t k = 0; k < curve.mean.size(); ++k)
        f << (k + 1) << "," << format_double(curve.mean[k]) << ","
          << format_double(curve.sd[k]) << "\n";
}

void write_spectrum_csv(const std::string& path, const double* truth,
                        const double* pred, int n) {
    const auto amp_truth = amplitude_spectrum(truth, n);
    const auto amp_pred = amplitude_spectrum(pred, n);
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("eval: cannot open " + path + " for writing");
    f << "wavenumber,truth_amplitude,pred_amplitude\n";
    for (std::size_t k = 0; k < amp_truth.size(); ++k)
        f << k << "," << format_double(amp_truth[k]) << ","
          << format_double(amp_pred[k]) << "\n";
}

std::vector<AblationRow> ablate(const std::vector<const Dataset*>& datasets,
                                const AblationSpec& spec, const std::string& out_dir) {
    std::vector<AblationRow> rows;
    for (const Dataset* data : datasets) {
        const int case_no = data->test_case == TestCase::Case1 ? 1 : 2;
        for (int r : spec.mode_sweep) {
            ModelConfig mc = spec.base_model;
            mc.use_freq_path = true;
            mc.modes = r;
            const std::string variant = "f+e_r" + std::to_string(r);
            const std::string path = out_dir + "/ablate_case" +
                                     std::to_string(case_no) + "_fe_r" +
                                     std::to_string(r) + ".emwt";
            train_model(*data, mc, spec.train, path);
            const ModelParams best = read_model(path);
            rows.push_back(
                {variant, case_no,
                 test_split_metric(best, *data, spec.horizon, spec.jobs)});
        }
        ModelConfig mc = spec.base_model;
        mc.use_freq_path = false;
        const std::string path =
            out_dir + "/ablate_case" + std::to_string(case_no) + "_e.emwt";
        train_model(*data, mc, spec.train, path);
        const ModelParams best = read_model(path);
        rows.push_back(
            {"e", case_no, test_split_metric(best, *data, spec.horizon, spec.jobs)});
    }
    return rows;
}

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("eval: cannot open " + path + " for writing");
    f << "variant,case,metric\n";
    for (const auto& r : rows)
        f << r.variant << "," << r.test_case << "," << format_double(r.metric) << "\n";
}

void write_ablation_report(const std::string& path,
                           const std::vector<AblationRow>& rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows)
        arr.push_back(
            {{"variant", r.variant}, {"case", r.test_case}, {"metric", r.metric}});
    // Published full-scale results, kept alongside desk-scale runs for
    // side-by-side reading; never asserted against.
    const nlohmann::json reference{
        {"case1",
         {{"f+e_r4", 0.0825}, {"f+e_r8", 0.0506}, {"f+e_r16", 0.4795}, {"e", 0.3945}}},
        {"case2",
         {{"f+e_r4", 0.1191}, {"f+e_r8", 0.0827}, {"f+e_r16", 0.3099}, {"e", 0.1819}}}};
    nlohmann::json j{{"rows", arr}, {"full_scale_reference", reference}};
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("eval: cannot open " + path + " for writing");
    f << j.dump(2) << "\n";
}

}  // namespace emw
