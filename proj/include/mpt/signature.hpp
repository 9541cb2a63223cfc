#pragma once
// MPT spectral signatures: one object's complex symmetric polarizability
// tensor tabulated over an angular-frequency grid.

#include <complex>
#include <filesystem>
#include <string>
#include <vector>

#include "mpt/tensor.hpp"

namespace mpt {

inline constexpr double kMu0 = 1.25663706212e-6;  // H/m

struct SpectralSignature {
    std::vector<double> frequencies;            // rad/s, strictly increasing, > 0
    std::vector<ComplexTensor3> coefficients;   // m^3, one per frequency
    double alpha = 0.0;                         // size scale (m)
    double sigma = 0.0;                         // conductivity (S/m)
    double mu_r = 1.0;                          // relative permeability
    std::string geometry_id;
    int class_id = 0;

    // Throws ValidationError on any broken invariant.
    void validate() const;

    friend bool operator==(const SpectralSignature&, const SpectralSignature&) = default;
};

enum class SignatureFormat { Csv, Json };

// Infers the format from the extension (.csv / .json).
SignatureFormat format_from_path(const std::filesystem::path& path);

// CSV holds exactly one signature per file; JSON holds an array.
std::vector<SpectralSignature> load_signatures(const std::filesystem::path& path, SignatureFormat format);
void write_signatures(const std::vector<SpectralSignature>& signatures, const std::filesystem::path& path,
                      SignatureFormat format);

// In-memory CSV codec used by the file functions above.
SpectralSignature parse_signature_csv(const std::string& text);
std::string format_signature_csv(const SpectralSignature& sig);
// Header-only CSV for an empty signature list.
std::string empty_signature_csv();

// Scalar polarizability m(omega) of a homogeneous conducting, permeable
// sphere of the given radius; the MPT of a sphere is m * identity.
// Time convention e^{-i omega t}: the imaginary part (absorption) is >= 0.
std::complex<double> sphere_polarizability(double radius, double sigma, double mu_r, double omega);

// Signature of a sphere of physical radius alpha * shape_radius. The stored
// alpha is the size scale, so shape_radius plays the role of the unit-size
// geometry B and scaling alpha rescales the physical radius proportionally.
SpectralSignature sphere_signature(double alpha, double sigma, double mu_r, const std::vector<double>& frequencies,
                                   double shape_radius = 1.0);

// n points, logarithmically spaced over [lo, hi] (inclusive).
std::vector<double> log_grid(double lo, double hi, std::size_t n);
// n points, linearly spaced over [lo, hi] (inclusive). n == 1 yields {lo}.
std::vector<double> linear_grid(double lo, double hi, std::size_t n);

// Default base grid: 13 log-spaced points over [1, 1e10] rad/s.
std::vector<double> default_base_grid();

}  // namespace mpt
