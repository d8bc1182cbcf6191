#include "emw/dataset.hpp"

#include "emw/rng.hpp"

#include <json.hpp>

#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace emw {

namespace {

constexpr char kMagic[4] = {'E', 'M', 'W', '1'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::uint8_t kFlagPureGaussian = 0x01;

void put_bytes(std::string& buf, const void* p, std::size_t n) {
    buf.append(static_cast<const char*>(p), n);
}
void put_u8(std::string& buf, std::uint8_t v) { put_bytes(buf, &v, 1); }
void put_u32(std::string& buf, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    put_bytes(buf, b, 4);
}
void put_u64(std::string& buf, std::uint64_t v) {
    put_u32(buf, static_cast<std::uint32_t>(v));
    put_u32(buf, static_cast<std::uint32_t>(v >> 32));
}
void put_f64(std::string& buf, double v) { put_u64(buf, std::bit_cast<std::uint64_t>(v)); }

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n, const char* what) {
        if (pos + n > buf.size())
            throw std::runtime_error(std::string("dataset read: truncated ") + what +
                                     ": expected " + std::to_string(pos + n) +
                                     " bytes, file has " + std::to_string(buf.size()));
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return static_cast<std::uint8_t>(buf[pos++]);
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i)
            v = (v << 8) | static_cast<unsigned char>(buf[pos + i]);
        pos += 4;
        return v;
    }
    std::uint64_t u64(const char* what) {
        const std::uint64_t lo = u32(what);
        const std::uint64_t hi = u32(what);
        return lo | (hi << 32);
    }
    double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
};

Sample make_sample(TestCase c, std::uint32_t id, const CounterRng& rng,
                   const Grid1D& grid, int keep_from) {
    const std::uint64_t stream = CounterRng::stream_of("sample") + id;
    const double r1 = rng.unit(stream, 0);
    const double r2 = rng.unit(stream, 1);
    const double r3 = (c == TestCase::Case2) ? rng.unit(stream, 2) : 0.0;

    auto [spec, mat] = sample_spec(c, r1, r2, r3);
    SolverConfig cfg;
    cfg.n_steps = 200;
    const FieldState init = initial_state(spec, grid, mat);
    Trajectory traj;
    try {
        traj = simulate(init, grid, mat, cfg);
    } catch (const std::exception& e) {
        throw std::runtime_error("generate: sample " + std::to_string(id) + ": " + e.what());
    }

    Sample s;
    s.id = id;
    s.spec = spec;
    s.c2 = mat.c2;
    const int rows = 201 - keep_from;
    s.e_fields.resize(static_cast<std::size_t>(rows) * grid.n_cells);
    for (int t = 0; t < rows; ++t) {
        const auto& e = traj.states[keep_from + t].e;
        std::memcpy(s.e_fields.data() + static_cast<std::size_t>(t) * grid.n_cells,
                    e.data(), sizeof(double) * grid.n_cells);
    }
    return s;
}

}  // namespace

std::vector<int> Dataset::indices_of(Split s) const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(samples.size()); ++i)
        if (split[i] == s) out.push_back(i);
    return out;
}

std::pair<WavePacketSpec, MaterialLayout> sample_spec(TestCase c, double r1, double r2,
                                                      double r3) {
    WavePacketSpec spec = WavePacketSpec::from_draws(c, r1, r2, r3);
    const double c2 = (c == TestCase::Case1) ? 1.0 / 3.0 : 1.0 / (1.0 + 2.0 * r3);
    return {spec, MaterialLayout(1.0, c2, 0.5)};
}

std::vector<Split> assign_split(std::uint64_t seed, int n_samples) {
    const CounterRng rng(seed);
    const auto perm = rng.permutation(CounterRng::stream_of("split"), n_samples);
    const int n_train = static_cast<int>(std::lround(0.8 * n_samples));
    const int n_val = static_cast<int>(std::lround(0.1 * n_samples));
    std::vector<Split> split(n_samples, Split::Test);
    for (int i = 0; i < n_samples; ++i) {
        if (i < n_train)
            split[perm[i]] = Split::Train;
        else if (i < n_train + n_val)
            split[perm[i]] = Split::Val;
    }
    return split;
}

Dataset generate(TestCase c, std::uint64_t seed, const GenerateOptions& opt) {
    Dataset ds;
    ds.test_case = c;
    ds.grid = Grid1D(opt.n_cells, 0.0, 1.0);
    ds.time_offset = (c == TestCase::Case2) ? 100 : 0;
    ds.n_steps = (c == TestCase::Case2) ? 100 : 200;
    ds.seed = seed;
    ds.samples.resize(opt.n_samples);
    ds.split = assign_split(seed, opt.n_samples);

    const CounterRng rng(seed);
    const int keep_from = ds.time_offset;
    const int jobs = std::max(1, opt.jobs);
    if (jobs == 1 || opt.n_samples <= 1) {
        for (int i = 0; i < opt.n_samples; ++i)
            ds.samples[i] = make_sample(c, static_cast<std::uint32_t>(i), rng, ds.grid,
                                        keep_from);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        std::vector<std::string> errors(jobs);
        for (int w = 0; w < jobs; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (int i = next.fetch_add(1); i < opt.n_samples;
                         i = next.fetch_add(1))
                        ds.samples[i] = make_sample(c, static_cast<std::uint32_t>(i), rng,
                                                    ds.grid, keep_from);
                } catch (const std::exception& e) {
                    errors[w] = e.what();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (const auto& err : errors)
            if (!err.empty()) throw std::runtime_error(err);
    }
    return ds;
}

void write_dataset(const Dataset& ds, const std::string& path) {
    std::string buf;
    const auto n_samples = static_cast<std::uint32_t>(ds.samples.size());
    const std::size_t matrix = static_cast<std::size_t>(ds.n_rows()) * ds.grid.n_cells;
    buf.reserve(32 + n_samples * (62 + matrix * 8));

    put_bytes(buf, kMagic, 4);
    put_u32(buf, kFormatVersion);
    put_u8(buf, static_cast<std::uint8_t>(ds.test_case));
    put_u32(buf, n_samples);
    put_u32(buf, static_cast<std::uint32_t>(ds.n_steps));
    put_u32(buf, static_cast<std::uint32_t>(ds.grid.n_cells));
    put_u64(buf, ds.seed);
    for (const auto& s : ds.samples) {
        put_u32(buf, s.id);
        put_f64(buf, s.spec.r1);
        put_f64(buf, s.spec.r2);
        put_f64(buf, s.spec.r3);
        put_f64(buf, s.spec.sigma);
        put_f64(buf, s.spec.x_s);
        put_f64(buf, s.spec.k);
        put_u8(buf, s.spec.pure_gaussian ? kFlagPureGaussian : 0);
        put_f64(buf, s.c2);
        if (s.e_fields.size() != matrix)
            throw std::runtime_error("write_dataset: sample " + std::to_string(s.id) +
                                     " matrix shape mismatch");
        for (double v : s.e_fields) put_f64(buf, v);
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_dataset: cannot open " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("write_dataset: short write to " + path);
    out.close();

    nlohmann::json manifest;
    manifest["magic"] = "EMW1";
    manifest["format_version"] = kFormatVersion;
    manifest["case"] = static_cast<int>(ds.test_case);
    manifest["n_samples"] = n_samples;
    manifest["n_steps"] = ds.n_steps;
    manifest["n_cells"] = ds.grid.n_cells;
    manifest["time_offset"] = ds.time_offset;
    manifest["seed"] = ds.seed;
    nlohmann::json split_json;
    static const char* names[3] = {"train", "val", "test"};
    for (int s = 0; s < 3; ++s)
        split_json[names[s]] = ds.indices_of(static_cast<Split>(s));
    manifest["split"] = split_json;
    std::ofstream mout(path + ".json", std::ios::trunc);
    if (!mout) throw std::runtime_error("write_dataset: cannot open " + path + ".json");
    mout << manifest.dump(2) << "\n";
}

Dataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_dataset: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Reader r{buf};

    r.need(4, "magic");
    if (std::memcmp(buf.data(), kMagic, 4) != 0)
        throw std::runtime_error("read_dataset: bad magic in " + path);
    r.pos = 4;
    const auto version = r.u32("version");
    if (version != kFormatVersion)
        throw std::runtime_error("read_dataset: unsupported format version " +
                                 std::to_string(version));
    Dataset ds;
    const auto case_byte = r.u8("case");
    if (case_byte != 1 && case_byte != 2)
        throw std::runtime_error("read_dataset: bad case byte " + std::to_string(case_byte));
    ds.test_case = static_cast<TestCase>(case_byte);
    const auto n_samples = r.u32("n_samples");
    ds.n_steps = static_cast<int>(r.u32("n_steps"));
    const auto n_cells = r.u32("n_cells");
    ds.seed = r.u64("seed");
    ds.grid = Grid1D(static_cast<int>(n_cells), 0.0, 1.0);
    ds.time_offset = (ds.test_case == TestCase::Case2) ? 100 : 0;

    const std::size_t matrix = static_cast<std::size_t>(ds.n_rows()) * n_cells;
    const std::size_t per_sample = 4 + 6 * 8 + 1 + 8 + matrix * 8;
    const std::size_t expected = r.pos + n_samples * per_sample;
    if (buf.size() != expected)
        throw std::runtime_error("read_dataset: shape mismatch: expected " +
                                 std::to_string(expected) + " bytes, file has " +
                                 std::to_string(buf.size()));

    ds.samples.resize(n_samples);
    for (std::uint32_t i = 0; i < n_samples; ++i) {
        Sample& s = ds.samples[i];
        s.id = r.u32("sample id");
        WavePacketSpec& sp = s.spec;
        sp.r1 = r.f64("r1");
        sp.r2 = r.f64("r2");
        sp.r3 = r.f64("r3");
        sp.sigma = r.f64("sigma");
        sp.x_s = r.f64("x_s");
        sp.k = r.f64("k");
        sp.x_g = 0.25;
        sp.test_case = ds.test_case;
        const auto flags = r.u8("flags");
        sp.pure_gaussian = (flags & kFlagPureGaussian) != 0;
        s.c2 = r.f64("c2");
        s.e_fields.resize(matrix);
        for (std::size_t j = 0; j < matrix; ++j) s.e_fields[j] = r.f64("e matrix");
    }
    ds.split = assign_split(ds.seed, static_cast<int>(n_samples));
    return ds;
}

}  // namespace emw
