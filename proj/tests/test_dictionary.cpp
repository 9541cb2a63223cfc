#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "mpt/dictionary.hpp"
#include "mpt/errors.hpp"
#include "mpt/rng.hpp"
#include "test_support.hpp"

using namespace mpt;
using cd = std::complex<double>;
namespace fs = std::filesystem;

namespace {

double max_rel(const ComplexTensor3& a, const ComplexTensor3& b) {
    double scale = 0, diff = 0;
    for (int k = 0; k < 6; ++k) {
        scale = std::max(scale, std::abs(b.entries()[k]));
        diff = std::max(diff, std::abs(a.entries()[k] - b.entries()[k]));
    }
    return diff / scale;
}

ClassSpec sphere_class(int id, double m_alpha, double m_sigma, int v, double rel_sa = 0, double rel_ss = 0,
                       double mu_r = 1.0) {
    ClassSpec c;
    c.class_id = id;
    c.name = "class" + std::to_string(id);
    c.geometries.push_back({sphere_signature(m_alpha, m_sigma, mu_r, default_base_grid()), {}, {}});
    c.m_alpha = m_alpha;
    c.s_alpha = rel_sa * m_alpha;
    c.m_sigma = m_sigma;
    c.s_sigma = rel_ss * m_sigma;
    c.v_count = v;
    return c;
}

std::pair<double, double> skew_kurt(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double mean = 0;
    for (double x : v) mean += x;
    mean /= n;
    double m2 = 0, m3 = 0, m4 = 0;
    for (double x : v) {
        const double d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n, m3 /= n, m4 /= n;
    return {m3 / std::pow(m2, 1.5), m4 / (m2 * m2) - 3.0};
}

const std::vector<double> kBand = linear_grid(5.02e4, 8.67e4, 10);

}  // namespace

TEST_CASE("variations without spread return the means") {
    const auto v = sample_variations(0.001, 0.0, 5.96e7, 0.0, 25, 1);
    REQUIRE(v.size() == 25);
    for (const auto& p : v) {
        CHECK(p.alpha == 0.001);
        CHECK(p.sigma == 5.96e7);
    }
}

TEST_CASE("coin size spread keeps 99.74% of draws within three deviations") {
    const double m = 0.001, s = 8.4e-6;
    const auto v = sample_variations(m, s, 5.96e7, 0.0236333 * 5.96e7, 100000, 17);
    std::size_t inside = 0;
    double mean = 0;
    for (const auto& p : v) {
        inside += std::abs(p.alpha - m) <= 3 * s;
        mean += p.alpha;
    }
    mean /= static_cast<double>(v.size());
    const double frac = static_cast<double>(inside) / static_cast<double>(v.size());
    // binomial standard error at p = 0.9974 and n = 1e5 is 1.6e-4
    CHECK(std::abs(frac - 0.9974) < 6.5e-4);
    CHECK(std::abs(mean - m) < 3 * s / std::sqrt(static_cast<double>(v.size())));
}

TEST_CASE("variation draws are positive and seed-deterministic") {
    const auto a = sample_variations(1.0, 2.0, 1.0, 2.0, 2000, 3);
    for (const auto& p : a) {
        CHECK(p.alpha > 0.0);
        CHECK(p.sigma > 0.0);
    }
    const auto b = sample_variations(1.0, 2.0, 1.0, 2.0, 2000, 3);
    CHECK(std::equal(a.begin(), a.end(), b.begin(), [](auto& x, auto& y) { return x.alpha == y.alpha && x.sigma == y.sigma; }));
    CHECK_THROWS_AS(sample_variations(0.0, 1.0, 1.0, 1.0, 3, 0), DegenerateSpec);
    CHECK_THROWS_AS(sample_variations(1.0, 1.0, -1.0, 1.0, 3, 0), DegenerateSpec);
    ClassSpec bad = sphere_class(1, 0.01, 1e7, 3);
    bad.m_sigma = 0.0;
    CHECK_THROWS_AS(bad.validate(), DegenerateSpec);
}

TEST_CASE("log-frequency interpolation") {
    const auto sig = sphere_signature(0.001, 5.96e7, 1.0, default_base_grid());
    CHECK(interpolate(sig, sig.frequencies[4]) == sig.coefficients[4]);
    const double mid = std::sqrt(sig.frequencies[4] * sig.frequencies[5]);
    const cd expect = 0.5 * (sig.coefficients[4](0, 0) + sig.coefficients[5](0, 0));
    CHECK(std::abs(interpolate(sig, mid)(0, 0) - expect) <= 1e-12 * std::abs(expect));
    CHECK_THROWS_AS(interpolate(sig, 0.5), OutOfGrid);
    CHECK_THROWS_AS(interpolate(sig, 2e10), OutOfGrid);
}

TEST_CASE("scaling with unchanged size and conductivity is the identity") {
    const auto sig = sphere_signature(0.001, 5.96e7, 1.0, default_base_grid());
    CHECK(scale_signature(sig, 0.001, 5.96e7) == sig);
}

TEST_CASE("scaling matches the direct sphere solution") {
    const auto dense = log_grid(1e-2, 1e14, 400);
    const auto out = default_base_grid();
    for (double mu : {1.0, 8.0}) {
        const auto base = sphere_signature(0.001, 5.96e7, mu, dense);
        const std::pair<double, double> targets[] = {{0.002, 5.96e7}, {0.0005, 3e7}, {0.0013, 1.1e8}};
        for (auto [alpha, sigma] : targets) {
            const auto scaled = scale_signature(base, alpha, sigma, out);
            const auto direct = sphere_signature(alpha, sigma, mu, out);
            CHECK(scaled.mu_r == mu);
            for (std::size_t i = 0; i < out.size(); ++i) CHECK(max_rel(scaled.coefficients[i], direct.coefficients[i]) <= 0.01);
        }
    }
}

TEST_CASE("scaling onto exact grid nodes") {
    const auto grid = default_base_grid();
    const auto base = sphere_signature(0.001, 5.96e7, 1.0, grid);
    // omega factor 10^(5/6) maps node i onto node i + 1
    const double sigma_new = 5.96e7 * std::pow(10.0, 5.0 / 6.0);
    const std::vector<double> out(grid.begin(), grid.end() - 1);
    const auto scaled = scale_signature(base, 0.001, sigma_new, out);
    const auto direct = sphere_signature(0.001, sigma_new, 1.0, out);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(max_rel(scaled.coefficients[i], direct.coefficients[i]) <= 1e-6);
    CHECK_THROWS_AS(scale_signature(base, 0.001, sigma_new, grid), OutOfGrid);
}

TEST_CASE("similarity: doubling conductivity and halving alpha squared") {
    const auto w = default_base_grid();
    const double a = 0.004, s = 2e7;
    const double a2 = a / std::sqrt(2.0);
    const auto ref = sphere_signature(a, s, 1.0, w);
    const auto moved = sphere_signature(a2, 2 * s, 1.0, w);
    const auto scaled = scale_signature(ref, a2, 2 * s, w);
    for (std::size_t i = 0; i < w.size(); ++i) {
        const cd r = ref.coefficients[i](0, 0) / (a * a * a);
        CHECK(std::abs(moved.coefficients[i](0, 0) / (a2 * a2 * a2) - r) <= 1e-9 * std::abs(r));
        CHECK(std::abs(scaled.coefficients[i](0, 0) / (a2 * a2 * a2) - r) <= 1e-9 * std::abs(r));
    }
}

TEST_CASE("noise: infinite SNR leaves the signature unchanged") {
    const auto sig = sphere_signature(0.001, 5.96e7, 1.0, default_base_grid());
    CHECK(add_noise(sig, kNoNoise, 9) == sig);
    CHECK(add_noise(sig, 20.0, 9) == add_noise(sig, 20.0, 9));
    CHECK_FALSE(add_noise(sig, 20.0, 9) == add_noise(sig, 20.0, 10));
}

TEST_CASE("noise: empirical power matches the SNR") {
    SpectralSignature sig;
    sig.frequencies = {1e4};
    sig.coefficients.emplace_back(std::array<cd, 6>{{{3e-7, 1e-7}, {-2e-7, 4e-8}, {1e-9, 1e-9}, {5e-8, 0}, {0, 2e-8}, {-1e-8, -1e-8}}});
    sig.alpha = 0.01, sig.sigma = 1e7;
    for (double snr : {40.0, 20.0, 10.0, 0.0}) {
        std::array<double, 6> acc{};
        const int n = 10000;
        for (int d = 0; d < n; ++d) {
            const auto noisy = add_noise(sig, snr, derive_seed(1, 2, static_cast<std::uint64_t>(d)));
            for (int k = 0; k < 6; ++k) {
                const cd v = sig.coefficients[0].entries()[k];
                acc[k] += std::norm(noisy.coefficients[0].entries()[k] - v) / std::norm(v);
            }
        }
        for (int k = 0; k < 6; ++k) CHECK(std::abs(acc[k] / n / std::pow(10.0, -snr / 10) - 1.0) < 0.05);
    }
}

TEST_CASE("features of an isotropic tensor") {
    SpectralSignature sig;
    sig.frequencies = {1.0, 10.0};
    const double c = 2.5;
    sig.coefficients = {ComplexTensor3::scalar(c), ComplexTensor3::scalar(c)};
    sig.alpha = sig.sigma = 1;
    const auto x = build_features(sig, {1.0}, FeatureKind::Invariants);
    CHECK(x == std::vector<double>{3 * c, 3 * c * c, c * c * c, 0, 0, 0});
    const auto e = build_features(sig, {1.0}, FeatureKind::Eigenvalues);
    CHECK(e == std::vector<double>{c, c, c, 0, 0, 0});
    CHECK_THROWS_AS(build_features(sig, {11.0}, FeatureKind::Invariants), OutOfGrid);
}

TEST_CASE("feature block layout for two frequencies") {
    std::mt19937_64 rng(3);
    SpectralSignature sig;
    sig.frequencies = {1.0, 2.0};
    for (int m = 0; m < 2; ++m)
        sig.coefficients.emplace_back(testing::random_symmetric(rng, 1.0), testing::random_symmetric(rng, 1.0));
    sig.alpha = sig.sigma = 1;
    const auto x = build_features(sig, {1.0, 2.0}, FeatureKind::Invariants);
    REQUIRE(x.size() == 12);
    for (int m = 0; m < 2; ++m) {
        const auto re = principal_invariants(sig.coefficients[m].real());
        const auto im = principal_invariants(sig.coefficients[m].imag());
        CHECK(x[3 * m + 0] == re.i1);
        CHECK(x[3 * m + 1] == re.i2);
        CHECK(x[3 * m + 2] == re.i3);
        CHECK(x[6 + 3 * m + 0] == im.i1);
        CHECK(x[6 + 3 * m + 1] == im.i2);
        CHECK(x[6 + 3 * m + 2] == im.i3);
    }
}

TEST_CASE("features are rotation invariant") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        SpectralSignature sig;
        sig.frequencies = {1.0, 5.0, 9.0};
        for (int m = 0; m < 3; ++m)
            sig.coefficients.emplace_back(testing::random_symmetric(rng, 1e-6), testing::random_symmetric(rng, 1e-7));
        sig.alpha = sig.sigma = 1;
        SpectralSignature rot = sig;
        for (auto& t : rot.coefficients) t = rotate(t, testing::random_rotation(rng));
        for (auto kind : {FeatureKind::Invariants, FeatureKind::Eigenvalues}) {
            const auto a = build_features(sig, sig.frequencies, kind);
            const auto b = build_features(rot, sig.frequencies, kind);
            // compare each block entry against its natural scale s^j
            for (std::size_t i = 0; i < a.size(); ++i) {
                const int j = kind == FeatureKind::Invariants ? static_cast<int>(i % 3) + 1 : 1;
                const double s = (i < 9 ? 1e-6 : 1e-7) * 2.5;
                CHECK(std::abs(a[i] - b[i]) <= 1e-9 * std::pow(s, j));
            }
        }
    }
}

TEST_CASE("build: counts, labels and determinism") {
    const std::vector<ClassSpec> specs = {sphere_class(1, 0.001, 5.96e7, 10, 0.0084, 0.0236),
                                          sphere_class(2, 0.002, 3.5e7, 10, 0.0084, 0.0236)};
    const auto d = build_dictionary(specs, kBand, 20.0, FeatureKind::Invariants, 42);
    CHECK(d.size() == 20);
    CHECK(d.class_counts == std::vector<int>{10, 10});
    CHECK(d.num_features() == 60);
    CHECK_NOTHROW(d.validate());
    for (const auto& s : d.samples) {
        double sum = 0;
        for (double t : s.t) sum += t;
        CHECK(sum == 1.0);
    }
    const auto again = build_dictionary(specs, kBand, 20.0, FeatureKind::Invariants, 42, 4);
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(d.samples[i].x == again.samples[i].x);

    // spec order does not matter, ids must be 1..K
    const std::vector<ClassSpec> swapped = {specs[1], specs[0]};
    CHECK(build_dictionary(swapped, kBand, 20.0, FeatureKind::Invariants, 42).samples[0].x == d.samples[0].x);
    auto gap = specs;
    gap[1].class_id = 3;
    CHECK_THROWS_AS(build_dictionary(gap, kBand, 20.0, FeatureKind::Invariants, 42), ValidationError);
    CHECK_THROWS_AS(build_dictionary({specs[0]}, kBand, 20.0, FeatureKind::Invariants, 42), ValidationError);
}

TEST_CASE("build: no spread and no noise gives identical samples") {
    const std::vector<ClassSpec> specs = {sphere_class(1, 0.001, 5.96e7, 6), sphere_class(2, 0.002, 3.5e7, 6)};
    const auto d = build_dictionary(specs, kBand, kNoNoise, FeatureKind::Invariants, 1);
    for (std::size_t i = 1; i < 6; ++i) CHECK(d.samples[i].x == d.samples[0].x);
    for (std::size_t i = 7; i < 12; ++i) CHECK(d.samples[i].x == d.samples[6].x);
    CHECK_FALSE(d.samples[0].x == d.samples[6].x);
}

TEST_CASE("build: geometry entries multiply the per-class count") {
    auto c1 = sphere_class(1, 0.001, 5.96e7, 7);
    c1.geometries.push_back({sphere_signature(0.001, 5.96e7, 1.0, default_base_grid(), 1.2), 4e7, 0.0});
    c1.geometries.back().base.geometry_id = "bigger";
    const auto d = build_dictionary({c1, sphere_class(2, 0.002, 3.5e7, 3)}, kBand, kNoNoise, FeatureKind::Invariants, 1);
    CHECK(d.class_counts == std::vector<int>{14, 3});
    CHECK(d.samples[7].geometry_id == "bigger");
    CHECK(d.samples[7].sigma == 4e7);
}

TEST_CASE("split: 3:1 stratified and seed-deterministic") {
    const std::vector<ClassSpec> specs = {sphere_class(1, 0.001, 5.96e7, 2000, 0.0084, 0.0236),
                                          sphere_class(2, 0.002, 3.5e7, 2000, 0.0084, 0.0236)};
    const auto d = build_dictionary(specs, {6e4}, kNoNoise, FeatureKind::Invariants, 8);
    const auto s = split(d, 0.25, 99);
    CHECK(s.test.class_counts == std::vector<int>{500, 500});
    CHECK(s.train.class_counts == std::vector<int>{1500, 1500});
    const auto idx = split_indices(d, 0.25, 99);
    CHECK(idx.train == split_indices(d, 0.25, 99).train);
    CHECK(idx.test == split_indices(d, 0.25, 99).test);
    CHECK_FALSE(idx.test == split_indices(d, 0.25, 100).test);
    std::vector<std::size_t> all = idx.train;
    all.insert(all.end(), idx.test.begin(), idx.test.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);

    const auto small = build_dictionary({sphere_class(1, 0.001, 5.96e7, 3), sphere_class(2, 0.002, 3.5e7, 8)}, {6e4},
                                        kNoNoise, FeatureKind::Invariants, 8);
    CHECK_THROWS_AS(split(small, 0.25, 1), ClassTooSmall);
    // rounding per class: 0.25 * 6 = 1.5 rounds to 2
    const auto six = build_dictionary({sphere_class(1, 0.001, 5.96e7, 6), sphere_class(2, 0.002, 3.5e7, 9)}, {6e4},
                                      kNoNoise, FeatureKind::Invariants, 8);
    CHECK(split(six, 0.25, 1).test.class_counts == std::vector<int>{2, 2});
}

TEST_CASE("leave one geometry out") {
    ClassSpec knives;
    knives.class_id = 1;
    knives.m_alpha = 0.01, knives.s_alpha = 0.0002;
    knives.m_sigma = 1.5e6, knives.s_sigma = 3e4;
    knives.v_count = 12;
    const char* names[] = {"chef", "cutlet", "meat cleaver", "santoku", "wusthof"};
    double r = 0.8;
    for (const char* n : names) {
        auto g = sphere_signature(0.01, 1.5e6, 1.0, default_base_grid(), r);
        g.geometry_id = n;
        knives.geometries.push_back({g, {}, {}});
        r += 0.1;
    }
    const auto other = sphere_class(2, 0.02, 3.5e7, 40, 0.01, 0.02);
    LooOptions o;
    o.class_id = 1;
    o.geometry_id = "cutlet";
    o.eval_freqs = kBand;
    o.train_snr_db = kNoNoise;
    o.test_snr_db = 20.0;
    o.seed = 5;
    const auto s = build_loo_dictionary({knives, other}, o);
    std::map<std::string, int> train_geo, test_geo;
    for (const auto& x : s.train.samples)
        if (x.class_id() == 1) ++train_geo[x.geometry_id];
    for (const auto& x : s.test.samples)
        if (x.class_id() == 1) ++test_geo[x.geometry_id];
    CHECK(train_geo.count("cutlet") == 0);
    CHECK(train_geo.size() == 4);
    for (auto& [name, n] : train_geo) CHECK(n == 12);
    CHECK(test_geo == std::map<std::string, int>{{"cutlet", 12}});
    CHECK(s.train.class_counts == std::vector<int>{48, 30});
    CHECK(s.test.class_counts == std::vector<int>{12, 10});

    o.geometry_id = "butter";
    CHECK_THROWS_AS(build_loo_dictionary({knives, other}, o), GeometryNotFound);
    o.class_id = 2;
    o.geometry_id = "sphere";
    CHECK_THROWS_AS(build_loo_dictionary({knives, other}, o), LastGeometry);
}

TEST_CASE("standardized invariant of a single-geometry class is close to normal") {
    const std::vector<ClassSpec> specs = {sphere_class(1, 0.001, 5.96e7, 2000, 0.0084, 0.0236333),
                                          sphere_class(2, 0.002, 3.5e7, 4)};
    const auto d = build_dictionary(specs, kBand, kNoNoise, FeatureKind::Invariants, 2024);
    for (std::size_t m = 0; m < kBand.size(); m += 3) {
        std::vector<double> v;
        for (const auto& s : d.samples)
            if (s.class_id() == 1) v.push_back(s.x[3 * m]);
        const auto [skew, kurt] = skew_kurt(v);
        CHECK(std::abs(skew) < 0.2);
        CHECK(std::abs(kurt) < 0.3);
    }
}

TEST_CASE("dictionary CSV and sidecar round-trip") {
    const std::vector<ClassSpec> specs = {sphere_class(1, 0.001, 5.96e7, 5, 0.01, 0.02),
                                          sphere_class(2, 0.002, 3.5e7, 5, 0.01, 0.02)};
    const auto d = build_dictionary(specs, kBand, 10.0, FeatureKind::Eigenvalues, 77);
    const fs::path dir = fs::temp_directory_path() / "mpt_dictionary_tests";
    fs::create_directories(dir);
    DictionaryMetadata meta;
    meta.train_snr_db = 10.0;
    meta.test_snr_db = kNoNoise;
    meta.seed = 77;
    meta.class_names = {"a", "b"};
    write_dictionary(d, meta, dir / "d.csv", dir / "d.json");
    const auto back = read_dictionary(dir / "d.csv", dir / "d.json");
    CHECK(back.class_counts == d.class_counts);
    CHECK(back.eval_freqs == d.eval_freqs);
    CHECK(back.kind == FeatureKind::Eigenvalues);
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(back.samples[i].x == d.samples[i].x);
        CHECK(back.samples[i].t == d.samples[i].t);
    }
    std::ifstream side(dir / "d.json");
    const std::string text((std::istreambuf_iterator<char>(side)), std::istreambuf_iterator<char>());
    CHECK(text.find("\"test_snr_db\": \"none\"") != std::string::npos);
    CHECK(text.find("\"seed\": 77") != std::string::npos);
}
