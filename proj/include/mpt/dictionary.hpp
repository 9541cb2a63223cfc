#pragma once
// Labeled feature dictionaries built from class specifications: size and
// conductivity variations by similarity scaling, additive complex noise,
// rotation-invariant features and 1-of-K labels.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mpt/signature.hpp"

namespace mpt {

inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();

enum class FeatureKind { Invariants, Eigenvalues };

std::string to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(const std::string& s);

// One geometry (or geometry/material combination) of a class. The sampled
// conductivity mean defaults to the class value; materials with their own
// conductivity override it here.
struct GeometryEntry {
    SpectralSignature base;
    std::optional<double> m_sigma;
    std::optional<double> s_sigma;
};

struct ClassSpec {
    int class_id = 0;
    std::string name;
    std::vector<GeometryEntry> geometries;
    double m_alpha = 0, s_alpha = 0;  // m
    double m_sigma = 0, s_sigma = 0;  // S/m
    int v_count = 1;                  // variations drawn per geometry entry

    // Throws DegenerateSpec / ValidationError.
    void validate() const;
    double sigma_mean(const GeometryEntry& g) const { return g.m_sigma.value_or(m_sigma); }
    double sigma_std(const GeometryEntry& g) const { return g.s_sigma.value_or(s_sigma); }
};

struct Variation {
    double alpha = 0;
    double sigma = 0;
};

// alpha ~ N(m_alpha, s_alpha), sigma ~ N(m_sigma, s_sigma), i.i.d.;
// non-positive draws are rejected and redrawn.
std::vector<Variation> sample_variations(const ClassSpec& spec, std::uint64_t seed);
std::vector<Variation> sample_variations(double m_alpha, double s_alpha, double m_sigma, double s_sigma, int count,
                                         std::uint64_t seed);

// Tensor at omega, linearly interpolated in log(omega) (real and imaginary
// parts separately). Throws OutOfGrid outside the tabulated range.
ComplexTensor3 interpolate(const SpectralSignature& sig, double omega);

// Rescales a signature to a new size and conductivity using the eddy-current
// similarity: the tensor depends on (omega, sigma, alpha) through
// omega * sigma * alpha^2, times an alpha^3 volume factor. Output is tabulated
// on `frequencies` (the base grid when omitted).
SpectralSignature scale_signature(const SpectralSignature& base, double alpha_new, double sigma_new);
SpectralSignature scale_signature(const SpectralSignature& base, double alpha_new, double sigma_new,
                                  const std::vector<double>& frequencies);

// Perturbs each of the six independent complex coefficients at each frequency
// by e = sqrt(noise / 2) (u + i w), noise = |v|^2 / 10^(snr/10). snr_db = +inf
// (kNoNoise) returns the input unchanged.
SpectralSignature add_noise(const SpectralSignature& sig, double snr_db, std::uint64_t seed);

// x in R^{6M}: block 1 holds (I1, I2, I3) of the real part at each frequency,
// block 2 the same for the imaginary part; frequency-major inside each block.
// Eigenvalues (ascending) replace the invariants for FeatureKind::Eigenvalues.
std::vector<double> build_features(const SpectralSignature& sig, const std::vector<double>& eval_freqs, FeatureKind kind);

struct LabeledSample {
    std::vector<double> x;
    std::vector<double> t;  // 1-of-K
    std::string geometry_id;
    double alpha = 0;
    double sigma = 0;

    // 1-based class id encoded by t.
    int class_id() const;
};

struct Dictionary {
    std::vector<LabeledSample> samples;
    std::vector<int> class_counts;  // P^(k), k = 1..K
    std::vector<double> eval_freqs;
    FeatureKind kind = FeatureKind::Invariants;

    int num_classes() const { return static_cast<int>(class_counts.size()); }
    int num_features() const { return samples.empty() ? 0 : static_cast<int>(samples.front().x.size()); }
    std::size_t size() const { return samples.size(); }
    // Subset by sample index, recomputing class counts.
    Dictionary subset(const std::vector<std::size_t>& indices) const;
    void validate() const;
};

struct SplitDictionary {
    Dictionary train;
    Dictionary test;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

// Stratified split: each class contributes round(test_fraction * P^(k))
// samples to the test side, drawn without replacement. Throws ClassTooSmall
// when a class has fewer than 4 samples.
SplitIndices split_indices(const Dictionary& d, double test_fraction, std::uint64_t seed);
SplitDictionary split(const Dictionary& d, double test_fraction, std::uint64_t seed);

struct BuildOptions {
    std::vector<double> eval_freqs;
    double snr_db = kNoNoise;
    FeatureKind kind = FeatureKind::Invariants;
    std::uint64_t seed = 0;
    std::uint64_t noise_stream = 0x22;  // stream::kNoise
    int threads = 1;
};

Dictionary build_dictionary(const std::vector<ClassSpec>& specs, const BuildOptions& options);
Dictionary build_dictionary(const std::vector<ClassSpec>& specs, const std::vector<double>& eval_freqs, double snr_db,
                            FeatureKind kind, std::uint64_t seed, int threads = 1);

// Same samples (same size/conductivity draws) observed twice: once with the
// training SNR and once with an independent test-noise realisation. When the
// two SNRs coincide, test aliases train.
struct NoisyDictionaries {
    Dictionary train_view;
    Dictionary test_view;
};

NoisyDictionaries build_dictionaries(const std::vector<ClassSpec>& specs, const std::vector<double>& eval_freqs,
                                     double train_snr_db, double test_snr_db, FeatureKind kind, std::uint64_t seed,
                                     int threads = 1);

struct LooOptions {
    int class_id = 0;
    std::string geometry_id;
    std::vector<double> eval_freqs;
    double train_snr_db = kNoNoise;
    double test_snr_db = kNoNoise;
    FeatureKind kind = FeatureKind::Invariants;
    double test_fraction = 0.25;
    std::uint64_t seed = 0;
    int threads = 1;
};

// Leave-one-geometry-out: the held-out class trains on all samples of its
// remaining geometries and tests only on the held-out geometry; every other
// class is split stratified as usual. Throws GeometryNotFound / LastGeometry.
SplitDictionary build_loo_dictionary(const std::vector<ClassSpec>& specs, const LooOptions& options);

struct DictionaryMetadata {
    double train_snr_db = kNoNoise;
    double test_snr_db = kNoNoise;
    std::uint64_t seed = 0;
    std::vector<std::string> class_names;
};

// CSV: class_id, t_1..t_K, x_1..x_F. The JSON sidecar records evaluation
// frequencies, feature kind, SNR, seed and per-class counts.
void write_dictionary(const Dictionary& d, const DictionaryMetadata& meta, const std::filesystem::path& csv_path,
                      const std::filesystem::path& sidecar_path);
Dictionary read_dictionary(const std::filesystem::path& csv_path, const std::filesystem::path& sidecar_path);

}  // namespace mpt
