#include <cmath>
#include <numbers>

#include "mpt/errors.hpp"
#include "mpt/signature.hpp"

namespace mpt {

namespace {

using cd = std::complex<double>;

// Numerator and denominator of the bracket in
//   m = 2 pi a^3 [(2mu+1) j1(x) - x j0(x)] / [(mu-1) j1(x) + x j0(x)],
// both divided by x, summed term by term from the power series of j0 and j1
// so that the leading cancellation at mu = 1 is exact.
std::pair<cd, cd> bracket_series(cd x, double mu_r) {
    const cd q = -x * x / 2.0;
    cd term = 1.0;  // (-x^2/2)^k / (k! (2k+1)!!)
    cd num = 0.0, den = 0.0;
    for (int k = 0; k < 60; ++k) {
        const double odd = 2.0 * k + 3.0;
        num += ((2.0 * mu_r + 1.0) / odd - 1.0) * term;
        den += ((mu_r - 1.0) / odd + 1.0) * term;
        term *= q / ((k + 1.0) * (2.0 * k + 3.0));
        if (k >= 1 && std::abs(term) < 1e-18 * std::abs(den)) break;
    }
    return {num, den};
}

// Same bracket divided by sin(x); stable for Im(x) > 0 at any magnitude.
std::pair<cd, cd> bracket_cot(cd x, double mu_r) {
    const cd e2 = std::exp(cd(0.0, 2.0) * x);  // |e2| < 1 when Im x > 0
    const cd cot = cd(0.0, 1.0) * (e2 + 1.0) / (e2 - 1.0);
    const cd g = 1.0 / (x * x) - cot / x;  // j1(x) / sin(x)
    return {(2.0 * mu_r + 1.0) * g - 1.0, (mu_r - 1.0) * g + 1.0};
}

}  // namespace

std::complex<double> sphere_polarizability(double radius, double sigma, double mu_r, double omega) {
    const double volume_factor = 2.0 * std::numbers::pi * radius * radius * radius;
    if (omega == 0.0 || sigma == 0.0) return volume_factor * 2.0 * (mu_r - 1.0) / (mu_r + 2.0);
    const double s = radius * std::sqrt(omega * sigma * kMu0 * mu_r / 2.0);
    const cd x(s, s);  // a * sqrt(i omega sigma mu)
    const auto [num, den] = std::abs(x) < 1.5 ? bracket_series(x, mu_r) : bracket_cot(x, mu_r);
    return volume_factor * num / den;
}

SpectralSignature sphere_signature(double alpha, double sigma, double mu_r, const std::vector<double>& frequencies,
                                   double shape_radius) {
    if (!(alpha > 0.0) || !(sigma > 0.0)) throw ValidationError("sphere_signature: alpha and sigma must be positive");
    if (!(mu_r >= 1.0)) throw ValidationError("sphere_signature: mu_r must be >= 1");
    if (!(shape_radius > 0.0)) throw ValidationError("sphere_signature: shape radius must be positive");
    SpectralSignature sig;
    sig.frequencies = frequencies;
    sig.alpha = alpha;
    sig.sigma = sigma;
    sig.mu_r = mu_r;
    sig.geometry_id = "sphere";
    sig.coefficients.reserve(frequencies.size());
    for (double w : frequencies)
        sig.coefficients.push_back(ComplexTensor3::scalar(sphere_polarizability(alpha * shape_radius, sigma, mu_r, w)));
    sig.validate();
    return sig;
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
    if (n == 1) return {lo};
    std::vector<double> g(n);
    const double a = std::log10(lo), b = std::log10(hi);
    for (std::size_t i = 0; i < n; ++i) g[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
    g.front() = lo;
    g.back() = hi;
    return g;
}

std::vector<double> linear_grid(double lo, double hi, std::size_t n) {
    if (n == 1) return {lo};
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    g.back() = hi;
    return g;
}

std::vector<double> default_base_grid() { return log_grid(1.0, 1e10, 13); }

}  // namespace mpt
