#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "emw/dataset.hpp"
#include "emw/rng.hpp"
#include "helpers.hpp"

using namespace emw;
using emwtest::TempDir;

namespace {

Dataset tiny_dataset() {
    Dataset ds;
    ds.test_case = TestCase::Case1;
    ds.grid = Grid1D(8, 0.0, 1.0);
    ds.n_steps = 1;
    ds.time_offset = 0;
    ds.seed = 11;
    Sample s;
    s.id = 0;
    s.spec = WavePacketSpec::from_draws(TestCase::Case1, 0.3, 0.6);
    s.c2 = 1.0 / 3.0;
    s.e_fields.resize(16);
    for (int i = 0; i < 16; ++i) s.e_fields[static_cast<std::size_t>(i)] = 0.25 * i - 1.0;
    ds.samples.push_back(s);
    ds.split = assign_split(ds.seed, 1);
    return ds;
}

}  // namespace

TEST_CASE("sample_spec fixes the material per test case") {
    const auto [s1, m1] = sample_spec(TestCase::Case1, 0.4, 0.7);
    CHECK(m1.c1 == 1.0);
    CHECK(m1.c2 == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(m1.x_j == 0.5);
    CHECK(s1.sigma == WavePacketSpec::from_draws(TestCase::Case1, 0.4, 0.7).sigma);

    const auto [s2a, m2a] = sample_spec(TestCase::Case2, 0.4, 0.7, 0.0);
    CHECK(m2a.c2 == 1.0);
    const auto [s2b, m2b] = sample_spec(TestCase::Case2, 0.4, 0.7, 1.0);
    CHECK(m2b.c2 == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    const auto [s2c, m2c] = sample_spec(TestCase::Case2, 0.4, 0.7, 0.5);
    CHECK(m2c.c2 == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(s2c.r3 == 0.5);
}

TEST_CASE("split assignment is a seeded 80/10/10 partition") {
    const auto split = assign_split(123, 200);
    REQUIRE(split.size() == 200);
    int n_train = 0, n_val = 0, n_test = 0;
    for (const Split s : split) {
        if (s == Split::Train) ++n_train;
        if (s == Split::Val) ++n_val;
        if (s == Split::Test) ++n_test;
    }
    CHECK(n_train == 160);
    CHECK(n_val == 20);
    CHECK(n_test == 20);

    CHECK(assign_split(123, 200) == split);
    CHECK(assign_split(124, 200) != split);

    const auto small = assign_split(9, 10);
    int t = 0, v = 0, e = 0;
    for (const Split s : small) {
        t += s == Split::Train;
        v += s == Split::Val;
        e += s == Split::Test;
    }
    CHECK(t == 8);
    CHECK(v == 1);
    CHECK(e == 1);
}

TEST_CASE("indices_of partitions the sample range") {
    Dataset ds;
    ds.split = {Split::Train, Split::Test, Split::Train, Split::Val};
    ds.samples.resize(4);
    CHECK(ds.indices_of(Split::Train) == std::vector<int>({0, 2}));
    CHECK(ds.indices_of(Split::Val) == std::vector<int>({3}));
    CHECK(ds.indices_of(Split::Test) == std::vector<int>({1}));
}

TEST_CASE("generate: case 1 keeps the full trajectory from t = 0") {
    GenerateOptions opt;
    opt.n_samples = 3;
    opt.n_cells = 64;
    const auto ds = generate(TestCase::Case1, 7, opt);
    CHECK(ds.n_steps == 200);
    CHECK(ds.time_offset == 0);
    CHECK(ds.n_rows() == 201);
    CHECK(ds.seed == 7);
    REQUIRE(ds.samples.size() == 3);
    REQUIRE(ds.split.size() == 3);

    for (std::uint32_t i = 0; i < 3; ++i) {
        const auto& s = ds.samples[i];
        CHECK(s.id == i);
        CHECK(s.c2 == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
        REQUIRE(s.e_fields.size() == 201u * 64u);

        // draws are addressable: reproduce the spec from the documented stream
        const CounterRng rng(7);
        const auto stream = CounterRng::stream_of("sample") + i;
        const auto expect =
            WavePacketSpec::from_draws(TestCase::Case1, rng.unit(stream, 0),
                                       rng.unit(stream, 1));
        CHECK(s.spec.sigma == expect.sigma);
        CHECK(s.spec.k == expect.k);
        CHECK(s.spec.pure_gaussian == expect.pure_gaussian);

        // row 0 is the initial cell-averaged state, bitwise
        const auto init = initial_state(s.spec, ds.grid, MaterialLayout(1.0, s.c2, 0.5));
        for (int x = 0; x < 64; ++x) CHECK(ds.row(static_cast<int>(i), 0)[x] == init.e[static_cast<std::size_t>(x)]);
    }

    // a row pointer indexes [t][x] row-major
    CHECK(ds.row(1, 5) == ds.samples[1].e_fields.data() + 5 * 64);
}

TEST_CASE("generate: case 2 reindexes the kept half to start at zero") {
    GenerateOptions opt;
    opt.n_samples = 2;
    opt.n_cells = 64;
    const auto ds = generate(TestCase::Case2, 19, opt);
    CHECK(ds.n_steps == 100);
    CHECK(ds.time_offset == 100);
    CHECK(ds.n_rows() == 101);
    REQUIRE(ds.samples[0].e_fields.size() == 101u * 64u);

    // sample 0 row 0 equals solver state at step 100 of a fresh simulation
    const CounterRng rng(19);
    const auto stream = CounterRng::stream_of("sample");
    const auto [spec, mat] = sample_spec(TestCase::Case2, rng.unit(stream, 0),
                                         rng.unit(stream, 1), rng.unit(stream, 2));
    CHECK(ds.samples[0].c2 == mat.c2);
    SolverConfig cfg;
    cfg.n_steps = 200;
    const auto traj = simulate(initial_state(spec, ds.grid, mat), ds.grid, mat, cfg);
    for (int x = 0; x < 64; ++x) {
        CHECK(ds.row(0, 0)[x] == traj.states[100].e[static_cast<std::size_t>(x)]);
        CHECK(ds.row(0, 100)[x] == traj.states[200].e[static_cast<std::size_t>(x)]);
    }
}

TEST_CASE("generation is invariant to the number of worker threads") {
    GenerateOptions one;
    one.n_samples = 3;
    one.n_cells = 64;
    GenerateOptions four = one;
    four.jobs = 4;
    const auto a = generate(TestCase::Case1, 31, one);
    const auto b = generate(TestCase::Case1, 31, four);
    for (int i = 0; i < 3; ++i) {
        CHECK(a.samples[static_cast<std::size_t>(i)].spec.sigma ==
              b.samples[static_cast<std::size_t>(i)].spec.sigma);
        CHECK(a.samples[static_cast<std::size_t>(i)].e_fields ==
              b.samples[static_cast<std::size_t>(i)].e_fields);
    }
}

TEST_CASE("container round trip preserves every field bitwise") {
    TempDir dir;
    const auto path = dir.file("case1.emw1");
    GenerateOptions opt;
    opt.n_samples = 2;
    opt.n_cells = 64;
    const auto ds = generate(TestCase::Case1, 5, opt);
    write_dataset(ds, path);
    const auto back = read_dataset(path);

    CHECK(back.test_case == ds.test_case);
    CHECK(back.n_steps == ds.n_steps);
    CHECK(back.time_offset == ds.time_offset);
    CHECK(back.seed == ds.seed);
    CHECK(back.grid.n_cells == 64);
    CHECK(back.split == ds.split);
    REQUIRE(back.samples.size() == ds.samples.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto& a = ds.samples[i];
        const auto& b = back.samples[i];
        CHECK(b.id == a.id);
        CHECK(b.spec.r1 == a.spec.r1);
        CHECK(b.spec.r2 == a.spec.r2);
        CHECK(b.spec.r3 == a.spec.r3);
        CHECK(b.spec.sigma == a.spec.sigma);
        CHECK(b.spec.x_s == a.spec.x_s);
        CHECK(b.spec.k == a.spec.k);
        CHECK(b.spec.pure_gaussian == a.spec.pure_gaussian);
        CHECK(b.spec.x_g == 0.25);
        CHECK(b.c2 == a.c2);
        CHECK(b.e_fields == a.e_fields);
    }

    // sidecar manifest parses and repeats the header facts
    const auto side = emwtest::read_bytes(path + ".json");
    CHECK(side.find("\"EMW1\"") != std::string::npos);
    CHECK(side.find("\"n_samples\": 2") != std::string::npos);
    CHECK(side.find("\"train\"") != std::string::npos);
}

TEST_CASE("container header layout is pinned") {
    TempDir dir;
    const auto path = dir.file("tiny.emw1");
    const auto ds = tiny_dataset();
    write_dataset(ds, path);
    const auto bytes = emwtest::read_bytes(path);

    // header: magic, version u32, case u8, n_samples u32, n_steps u32,
    // n_cells u32, seed u64; sample: id u32, six f64, flag u8, c2 f64, matrix
    REQUIRE(bytes.size() == 29u + 4u + 6u * 8u + 1u + 8u + 16u * 8u);
    CHECK(bytes.substr(0, 4) == "EMW1");
    CHECK(static_cast<unsigned char>(bytes[4]) == 1);   // version, little-endian
    CHECK(static_cast<unsigned char>(bytes[5]) == 0);
    CHECK(static_cast<unsigned char>(bytes[8]) == 1);   // case byte
    CHECK(static_cast<unsigned char>(bytes[9]) == 1);   // n_samples
    CHECK(static_cast<unsigned char>(bytes[13]) == 1);  // n_steps
    CHECK(static_cast<unsigned char>(bytes[17]) == 8);  // n_cells
    CHECK(static_cast<unsigned char>(bytes[21]) == 11); // seed low byte

    double r1 = 0.0;
    std::memcpy(&r1, bytes.data() + 33, 8);
    CHECK(r1 == 0.3);

    const auto back = read_dataset(path);
    CHECK(back.samples[0].e_fields == ds.samples[0].e_fields);
}

TEST_CASE("corrupt containers are rejected with diagnostics") {
    TempDir dir;
    const auto path = dir.file("tiny.emw1");
    write_dataset(tiny_dataset(), path);
    const auto good = emwtest::read_bytes(path);

    const auto write_raw = [&](const std::string& name, const std::string& b) {
        const auto p = dir.file(name);
        std::ofstream f(p, std::ios::binary);
        f.write(b.data(), static_cast<std::streamsize>(b.size()));
        return p;
    };

    auto magic = good;
    magic[0] = 'X';
    CHECK_THROWS_WITH_AS(read_dataset(write_raw("m.emw1", magic)),
                         doctest::Contains("bad magic"), std::runtime_error);

    auto version = good;
    version[4] = 9;
    CHECK_THROWS_WITH_AS(read_dataset(write_raw("v.emw1", version)),
                         doctest::Contains("version"), std::runtime_error);

    auto case_byte = good;
    case_byte[8] = 7;
    CHECK_THROWS_WITH_AS(read_dataset(write_raw("c.emw1", case_byte)),
                         doctest::Contains("case"), std::runtime_error);

    const auto trunc = good.substr(0, good.size() - 10);
    CHECK_THROWS_WITH_AS(read_dataset(write_raw("t.emw1", trunc)),
                         doctest::Contains("expected"), std::runtime_error);

    auto trail = good;
    trail.push_back('\0');
    CHECK_THROWS_AS(read_dataset(write_raw("x.emw1", trail)), std::runtime_error);

    CHECK_THROWS_WITH_AS(read_dataset(dir.file("absent.emw1")),
                         doctest::Contains("cannot open"), std::runtime_error);
}
