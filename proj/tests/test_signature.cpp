#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "mpt/errors.hpp"
#include "mpt/signature.hpp"
#include "test_support.hpp"

using namespace mpt;
using cd = std::complex<double>;
namespace fs = std::filesystem;

namespace {

// Independent oracle: integrate the interior radial equation
//   f'' + 2 f'/r - 2 f / r^2 + k^2 f = 0,  k^2 = i omega sigma mu0 mu_r
// (A_phi = f(r) sin(theta)) with RK4 from the regular series start, then match
// to the exterior field A_phi = (B0 r / 2 + C / r^2) sin(theta) through
// continuity of A_phi and of H_theta. The polarizability is 4 pi C / B0.
cd ode_polarizability(double a, double sigma, double mu_r, double omega, int steps = 20000) {
    const cd k2(0.0, omega * sigma * kMu0 * mu_r);
    const double r0 = a * 1e-4;
    cd f = r0 * (1.0 - k2 * r0 * r0 / 10.0);
    cd fp = 1.0 - 3.0 * k2 * r0 * r0 / 10.0;
    const double h = (a - r0) / steps;
    auto rhs = [&](double r, cd y, cd yp) { return -2.0 * yp / r + 2.0 * y / (r * r) - k2 * y; };
    double r = r0;
    for (int s = 0; s < steps; ++s) {
        const cd k1y = fp, k1p = rhs(r, f, fp);
        const cd k2y = fp + 0.5 * h * k1p, k2p = rhs(r + 0.5 * h, f + 0.5 * h * k1y, fp + 0.5 * h * k1p);
        const cd k3y = fp + 0.5 * h * k2p, k3p = rhs(r + 0.5 * h, f + 0.5 * h * k2y, fp + 0.5 * h * k2p);
        const cd k4y = fp + h * k3p, k4p = rhs(r + h, f + h * k3y, fp + h * k3p);
        f += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        fp += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        r += h;
    }
    // Unknowns amplitude A and C with B0 = 1:
    //   A f(a)             - C / a^2 = a / 2
    //   A (f + a f')/mu_r  + C / a^2 = a
    const cd p = f, q = (f + a * fp) / mu_r;
    const cd amp = (a / 2.0 + a) / (p + q);
    const cd c = (amp * p - a / 2.0) * a * a;
    return 4.0 * std::numbers::pi * c;
}

double rel(cd a, cd b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

fs::path temp_path(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "mpt_signature_tests";
    fs::create_directories(dir);
    return dir / name;
}

SpectralSignature random_signature(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    SpectralSignature s;
    s.frequencies = log_grid(1.0, 1e10, n);
    for (std::size_t i = 0; i < n; ++i) {
        std::array<cd, 6> e{};
        for (auto& v : e) v = {u(rng) * 1e-7, u(rng) * 1e-9};
        s.coefficients.emplace_back(e);
    }
    s.alpha = 0.01 * (1.0 + u(rng) * 0.5);
    s.sigma = 1e7 * (1.5 + u(rng));
    s.mu_r = 1.0 + std::abs(u(rng)) * 10.0;
    s.geometry_id = "obj";
    s.class_id = 3;
    return s;
}

}  // namespace

TEST_CASE("sphere polarizability matches the radial ODE oracle") {
    // mid-frequency reference point, x about 2.7
    const cd oracle = ode_polarizability(0.001, 5.96e7, 1.0, 1e5);
    const cd m = sphere_polarizability(0.001, 5.96e7, 1.0, 1e5);
    CHECK(rel(m, oracle) < 1e-8);
    // both sides of the series / closed-form switch and permeable material
    const double omegas[] = {1e2, 1e3, 1e4, 3e4, 1e5, 1e6};
    const double mus[] = {1.0, 5.0, 50.0};
    for (double mu : mus)
        for (double w : omegas) {
            CAPTURE(mu);
            CAPTURE(w);
            CHECK(rel(sphere_polarizability(0.001, 5.96e7, mu, w), ode_polarizability(0.001, 5.96e7, mu, w)) < 1e-7);
        }
}

TEST_CASE("sphere limits") {
    const double a = 0.002, sigma = 3.5e7;
    const double vol = 2.0 * std::numbers::pi * a * a * a;
    // non-permeable: no static response
    CHECK(std::abs(sphere_polarizability(a, sigma, 1.0, 1e-6)) < 1e-9 * vol);  // ~ x^2 vol
    CHECK(sphere_polarizability(a, sigma, 1.0, 0.0) == cd(0.0, 0.0));
    // permeable static limit 4 pi a^3 (mu-1)/(mu+2)
    const double mu = 20.0;
    CHECK(rel(sphere_polarizability(a, sigma, mu, 1e-6), 2.0 * vol * (mu - 1) / (mu + 2)) < 1e-9);
    // perfect-conductor limit -2 pi a^3
    CHECK(rel(sphere_polarizability(a, sigma, 1.0, 1e16), cd(-vol, 0.0)) < 1e-4);
    CHECK(rel(sphere_polarizability(a, sigma, mu, 1e18), cd(-vol, 0.0)) < 1e-4);
}

TEST_CASE("absorption is non-negative and vanishes at both ends of a wide grid") {
    const double a = 0.001, sigma = 5.96e7;
    const double vol = 2.0 * std::numbers::pi * a * a * a;
    const auto grid = log_grid(1e-2, 1e14, 161);
    for (double w : grid) CHECK(sphere_polarizability(a, sigma, 1.0, w).imag() >= 0.0);
    double peak = 0;
    for (double w : grid) peak = std::max(peak, sphere_polarizability(a, sigma, 1.0, w).imag());
    CHECK(peak > 0.1 * vol);
    CHECK(sphere_polarizability(a, sigma, 1.0, grid.front()).imag() < 1e-6 * peak);
    CHECK(sphere_polarizability(a, sigma, 1.0, grid.back()).imag() < 1e-3 * peak);
}

TEST_CASE("series and closed form agree across the branch switch") {
    // |x| = 1.5 at omega = (1.5 / a)^2 / (sigma mu0 mu_r)
    const double a = 0.001, sigma = 5.96e7;
    for (double mu : {1.0, 7.0}) {
        const double w = std::pow(1.5 / a, 2) / (sigma * kMu0 * mu);
        const cd lo = sphere_polarizability(a, sigma, mu, w * (1 - 1e-9));
        const cd hi = sphere_polarizability(a, sigma, mu, w * (1 + 1e-9));
        CHECK(rel(lo, hi) < 1e-8);
    }
}

TEST_CASE("sphere signature is isotropic") {
    const auto sig = sphere_signature(0.001, 5.96e7, 1.0, default_base_grid());
    REQUIRE(sig.coefficients.size() == 13);
    CHECK(sig.geometry_id == "sphere");
    for (std::size_t i = 0; i < sig.frequencies.size(); ++i) {
        const auto& t = sig.coefficients[i];
        const cd m = t(0, 0);
        CHECK(t(1, 1) == m);
        CHECK(t(2, 2) == m);
        CHECK(t(0, 1) == cd(0, 0));
        CHECK(t(0, 2) == cd(0, 0));
        CHECK(t(1, 2) == cd(0, 0));
        for (const RealTensor3& part : {t.real(), t.imag()}) {
            const double v = part(0, 0);
            if (v == 0.0) continue;
            const auto inv = principal_invariants(part);
            CHECK(testing::rel_diff(inv.i1, 3 * v) < 1e-12);
            CHECK(testing::rel_diff(inv.i2, 3 * v * v) < 1e-12);
            CHECK(testing::rel_diff(inv.i3, v * v * v) < 1e-12);
        }
    }
}

TEST_CASE("shape radius sets the physical radius") {
    const auto w = default_base_grid();
    const auto a = sphere_signature(0.01, 1e7, 1.0, w, 0.5);
    const auto b = sphere_signature(0.005, 1e7, 1.0, w);
    CHECK(a.alpha == 0.01);
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(a.coefficients[i] == b.coefficients[i]);
    CHECK_THROWS_AS(sphere_signature(0.0, 1e7, 1.0, w), ValidationError);
    CHECK_THROWS_AS(sphere_signature(0.01, 1e7, 0.5, w), ValidationError);
}

TEST_CASE("grids") {
    const auto g = default_base_grid();
    REQUIRE(g.size() == 13);
    CHECK(g.front() == 1.0);
    CHECK(g.back() == 1e10);
    for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] / g[i - 1] == doctest::Approx(std::pow(10.0, 10.0 / 12)));
    const auto l = linear_grid(5.02e4, 8.67e4, 28);
    CHECK(l.size() == 28);
    CHECK(l.back() == 8.67e4);
    CHECK(l[1] - l[0] == doctest::Approx((8.67e4 - 5.02e4) / 27));
    CHECK(linear_grid(3.0, 9.0, 1) == std::vector<double>{3.0});
}

TEST_CASE("signature validation") {
    auto s = sphere_signature(0.001, 5.96e7, 1.0, default_base_grid());
    CHECK_NOTHROW(s.validate());
    auto bad = s;
    std::swap(bad.frequencies[2], bad.frequencies[3]);
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = s;
    bad.alpha = -1;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = s;
    bad.sigma = 0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = s;
    bad.mu_r = 0.9;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = s;
    bad.coefficients.pop_back();
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("CSV format") {
    const auto s = sphere_signature(0.001, 5.96e7, 1.0, default_base_grid());
    const auto path = temp_path("one.csv");
    write_signatures({s}, path, SignatureFormat::Csv);
    std::ifstream in(path);
    int data_rows = 0, header_rows = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("# ", 0) == 0) ++header_rows;
        else if (line.rfind("omega,", 0) != 0) ++data_rows;
    }
    CHECK(header_rows == 5);
    CHECK(data_rows == 13);
    const auto loaded = load_signatures(path, format_from_path(path));
    REQUIRE(loaded.size() == 1);
    CHECK(loaded.front() == s);

    const auto empty = temp_path("empty.csv");
    write_signatures({}, empty, SignatureFormat::Csv);
    CHECK(load_signatures(empty, SignatureFormat::Csv).empty());
    CHECK_THROWS_AS(write_signatures({s, s}, temp_path("two.csv"), SignatureFormat::Csv), ValidationError);
}

TEST_CASE("CSV parse errors") {
    const auto s = sphere_signature(0.001, 5.96e7, 1.0, log_grid(1, 100, 3));
    const std::string good = format_signature_csv(s);
    CHECK(parse_signature_csv(good) == s);

    // unsorted omega column
    auto lines = good;
    const auto p2 = lines.find("\n10,");
    const auto p3 = lines.find("\n100,");
    REQUIRE(p2 != std::string::npos);
    REQUIRE(p3 != std::string::npos);
    const std::string row2 = lines.substr(p2 + 1, p3 - p2);
    lines.erase(p2 + 1, p3 - p2);
    lines += row2;
    CHECK_THROWS_AS(parse_signature_csv(lines), ValidationError);

    CHECK_THROWS_AS(parse_signature_csv(good + "1e3,1,2\n"), ParseError);
    CHECK_THROWS_AS(parse_signature_csv(good + "1e3,1,2,3,4,5,6,7,8,9,10,11,abc\n"), ParseError);
    std::string no_alpha = good;
    no_alpha.erase(0, no_alpha.find('\n') + 1);
    CHECK_THROWS_AS(parse_signature_csv(no_alpha), ParseError);
    CHECK_THROWS_AS(load_signatures(temp_path("does_not_exist.csv"), SignatureFormat::Csv), IoError);
    CHECK_THROWS_AS(format_from_path("x.txt"), ValidationError);
}

TEST_CASE("write then load is bit-exact for random signatures") {
    std::mt19937_64 rng(5);
    std::vector<SpectralSignature> all;
    for (int i = 0; i < 20; ++i) {
        auto s = random_signature(rng, 1 + static_cast<std::size_t>(i % 13));
        const auto path = temp_path("rt.csv");
        write_signatures({s}, path, SignatureFormat::Csv);
        CHECK(load_signatures(path, SignatureFormat::Csv).front() == s);
        all.push_back(std::move(s));
    }
    const auto jpath = temp_path("rt.json");
    write_signatures(all, jpath, SignatureFormat::Json);
    CHECK(load_signatures(jpath, SignatureFormat::Json) == all);
    write_signatures({}, jpath, SignatureFormat::Json);
    CHECK(load_signatures(jpath, SignatureFormat::Json).empty());

    std::ofstream(temp_path("bad.json")) << "{\"not\": \"an array\"}";
    CHECK_THROWS_AS(load_signatures(temp_path("bad.json"), SignatureFormat::Json), ParseError);
    std::ofstream(temp_path("bad2.json")) << "[{\"alpha\": 1}]";
    CHECK_THROWS_AS(load_signatures(temp_path("bad2.json"), SignatureFormat::Json), ParseError);
}
