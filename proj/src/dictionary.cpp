#include "mpt/dictionary.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mpt/errors.hpp"
#include "mpt/parallel.hpp"
#include "mpt/rng.hpp"

namespace mpt {

std::string to_string(FeatureKind kind) { return kind == FeatureKind::Invariants ? "invariants" : "eigenvalues"; }

FeatureKind feature_kind_from_string(const std::string& s) {
    if (s == "invariants") return FeatureKind::Invariants;
    if (s == "eigenvalues") return FeatureKind::Eigenvalues;
    throw ValidationError("unknown feature kind '" + s + "' (expected invariants or eigenvalues)");
}

void ClassSpec::validate() const {
    if (!(m_alpha > 0.0)) throw DegenerateSpec("class " + std::to_string(class_id) + ": m_alpha must be positive");
    if (!(s_alpha >= 0.0) || !(s_sigma >= 0.0))
        throw DegenerateSpec("class " + std::to_string(class_id) + ": standard deviations must be >= 0");
    if (geometries.empty()) throw ValidationError("class " + std::to_string(class_id) + " has no geometries");
    if (v_count < 1) throw ValidationError("class " + std::to_string(class_id) + ": v_count must be >= 1");
    for (const auto& g : geometries) {
        g.base.validate();
        if (!(sigma_mean(g) > 0.0))
            throw DegenerateSpec("class " + std::to_string(class_id) + ": m_sigma must be positive");
        if (!(sigma_std(g) >= 0.0)) throw DegenerateSpec("class " + std::to_string(class_id) + ": s_sigma must be >= 0");
    }
}

std::vector<Variation> sample_variations(double m_alpha, double s_alpha, double m_sigma, double s_sigma, int count,
                                         std::uint64_t seed) {
    if (!(m_alpha > 0.0) || !(m_sigma > 0.0)) throw DegenerateSpec("sample_variations: means must be positive");
    if (!(s_alpha >= 0.0) || !(s_sigma >= 0.0)) throw DegenerateSpec("sample_variations: stddevs must be >= 0");
    Rng rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    auto draw_positive = [&](double m, double s) {
        if (s == 0.0) return m;
        for (;;) {
            const double v = m + s * z(rng);
            if (v > 0.0) return v;
        }
    };
    std::vector<Variation> out(static_cast<std::size_t>(std::max(count, 0)));
    for (auto& v : out) {
        v.alpha = draw_positive(m_alpha, s_alpha);
        v.sigma = draw_positive(m_sigma, s_sigma);
    }
    return out;
}

std::vector<Variation> sample_variations(const ClassSpec& spec, std::uint64_t seed) {
    return sample_variations(spec.m_alpha, spec.s_alpha, spec.m_sigma, spec.s_sigma, spec.v_count, seed);
}

ComplexTensor3 interpolate(const SpectralSignature& sig, double omega) {
    const auto& w = sig.frequencies;
    constexpr double kSnap = 1e-12;
    if (w.empty()) throw OutOfGrid("signature has no frequencies");
    if (omega < w.front() * (1.0 - kSnap) || omega > w.back() * (1.0 + kSnap) || !std::isfinite(omega)) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "omega=%.6g rad/s outside signature grid [%.6g, %.6g]", omega, w.front(), w.back());
        throw OutOfGrid(buf);
    }
    auto hi = std::upper_bound(w.begin(), w.end(), omega);
    if (hi == w.begin()) return sig.coefficients.front();
    if (hi == w.end()) return sig.coefficients.back();
    const std::size_t i1 = static_cast<std::size_t>(hi - w.begin());
    const std::size_t i0 = i1 - 1;
    if (std::abs(omega - w[i0]) <= kSnap * w[i0]) return sig.coefficients[i0];
    if (std::abs(w[i1] - omega) <= kSnap * w[i1]) return sig.coefficients[i1];
    const double t = (std::log(omega) - std::log(w[i0])) / (std::log(w[i1]) - std::log(w[i0]));
    std::array<std::complex<double>, 6> e{};
    const auto& a = sig.coefficients[i0].entries();
    const auto& b = sig.coefficients[i1].entries();
    for (int k = 0; k < 6; ++k) e[k] = a[k] + t * (b[k] - a[k]);
    return ComplexTensor3(e);
}

SpectralSignature scale_signature(const SpectralSignature& base, double alpha_new, double sigma_new) {
    return scale_signature(base, alpha_new, sigma_new, base.frequencies);
}

SpectralSignature scale_signature(const SpectralSignature& base, double alpha_new, double sigma_new,
                                  const std::vector<double>& frequencies) {
    if (!(alpha_new > 0.0) || !(sigma_new > 0.0)) throw ValidationError("scale_signature: alpha and sigma must be positive");
    const double size_ratio = alpha_new / base.alpha;
    const double omega_factor = (sigma_new * alpha_new * alpha_new) / (base.sigma * base.alpha * base.alpha);
    const double volume = size_ratio * size_ratio * size_ratio;
    SpectralSignature out;
    out.frequencies = frequencies;
    out.alpha = alpha_new;
    out.sigma = sigma_new;
    out.mu_r = base.mu_r;
    out.geometry_id = base.geometry_id;
    out.class_id = base.class_id;
    out.coefficients.reserve(frequencies.size());
    const bool identity = alpha_new == base.alpha && sigma_new == base.sigma;
    for (double w : frequencies) {
        ComplexTensor3 t = interpolate(base, identity ? w : w * omega_factor);
        if (!identity)
            for (auto& c : t.entries()) c *= volume;
        out.coefficients.push_back(t);
    }
    return out;
}

SpectralSignature add_noise(const SpectralSignature& sig, double snr_db, std::uint64_t seed) {
    if (std::isinf(snr_db) && snr_db > 0) return sig;
    if (std::isnan(snr_db)) throw ValidationError("add_noise: SNR must not be NaN");
    const double ratio = std::pow(10.0, snr_db / 10.0);
    Rng rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    SpectralSignature out = sig;
    for (auto& tensor : out.coefficients) {
        for (auto& v : tensor.entries()) {
            const double noise = std::norm(v) / ratio;  // conj(v) v / 10^(SNR/10)
            const double scale = std::sqrt(noise / 2.0);
            const double u = z(rng);
            const double w = z(rng);
            v += std::complex<double>(scale * u, scale * w);
        }
    }
    return out;
}

std::vector<double> build_features(const SpectralSignature& sig, const std::vector<double>& eval_freqs, FeatureKind kind) {
    const std::size_t m_count = eval_freqs.size();
    std::vector<double> x(6 * m_count);
    for (std::size_t m = 0; m < m_count; ++m) {
        const ComplexTensor3 t = interpolate(sig, eval_freqs[m]);
        const RealTensor3 parts[2] = {t.real(), t.imag()};
        for (int p = 0; p < 2; ++p) {
            double* dst = x.data() + p * 3 * m_count + 3 * m;
            if (kind == FeatureKind::Invariants) {
                const Invariants inv = principal_invariants(parts[p]);
                dst[0] = inv.i1;
                dst[1] = inv.i2;
                dst[2] = inv.i3;
            } else {
                const auto ev = eigenvalues_sym(parts[p]);
                std::copy(ev.begin(), ev.end(), dst);
            }
        }
    }
    return x;
}

int LabeledSample::class_id() const {
    for (std::size_t k = 0; k < t.size(); ++k)
        if (t[k] == 1.0) return static_cast<int>(k) + 1;
    throw ValidationError("label vector has no entry equal to 1");
}

Dictionary Dictionary::subset(const std::vector<std::size_t>& indices) const {
    Dictionary d;
    d.eval_freqs = eval_freqs;
    d.kind = kind;
    d.class_counts.assign(class_counts.size(), 0);
    d.samples.reserve(indices.size());
    for (std::size_t i : indices) {
        d.samples.push_back(samples.at(i));
        ++d.class_counts[static_cast<std::size_t>(d.samples.back().class_id() - 1)];
    }
    return d;
}

void Dictionary::validate() const {
    const std::size_t k_count = class_counts.size();
    std::vector<int> counts(k_count, 0);
    const std::size_t f = samples.empty() ? 0 : samples.front().x.size();
    if (f != 6 * eval_freqs.size() && !samples.empty())
        throw ValidationError("feature length " + std::to_string(f) + " != 6M for M = " + std::to_string(eval_freqs.size()));
    for (const auto& s : samples) {
        if (s.x.size() != f) throw ValidationError("samples disagree on feature length");
        if (s.t.size() != k_count) throw ValidationError("samples disagree on class count");
        int ones = 0;
        double sum = 0;
        for (double v : s.t) {
            if (v == 1.0) ++ones;
            else if (v != 0.0) throw ValidationError("label vector entries must be 0 or 1");
            sum += v;
        }
        if (ones != 1 || sum != 1.0) throw ValidationError("label vector must be 1-of-K");
        ++counts[static_cast<std::size_t>(s.class_id() - 1)];
    }
    if (counts != class_counts) throw ValidationError("class counts do not match samples");
}

SplitIndices split_indices(const Dictionary& d, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ValidationError("test fraction must lie in (0, 1)");
    std::vector<std::vector<std::size_t>> by_class(d.class_counts.size());
    for (std::size_t i = 0; i < d.samples.size(); ++i)
        by_class[static_cast<std::size_t>(d.samples[i].class_id() - 1)].push_back(i);
    SplitIndices out;
    for (std::size_t k = 0; k < by_class.size(); ++k) {
        auto& idx = by_class[k];
        if (idx.size() < 4)
            throw ClassTooSmall("class " + std::to_string(k + 1) + " has " + std::to_string(idx.size()) +
                                " samples; at least 4 are needed to split");
        const auto n_test = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(idx.size())));
        Rng rng(derive_seed(seed, stream::kSplit, k));
        // Partial Fisher-Yates: the first n_test slots become the test draw.
        for (std::size_t i = 0; i < n_test; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
            std::swap(idx[i], idx[pick(rng)]);
        }
        out.test.insert(out.test.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
        out.train.insert(out.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

SplitDictionary split(const Dictionary& d, double test_fraction, std::uint64_t seed) {
    const SplitIndices s = split_indices(d, test_fraction, seed);
    return {d.subset(s.train), d.subset(s.test)};
}

namespace {

struct SamplePlan {
    std::size_t class_index;
    const GeometryEntry* geometry;
    Variation variation;
};

std::vector<const ClassSpec*> ordered_specs(const std::vector<ClassSpec>& specs) {
    if (specs.size() < 2) throw ValidationError("a dictionary needs at least two classes");
    std::vector<const ClassSpec*> ordered;
    for (const auto& s : specs) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->class_id < b->class_id; });
    for (std::size_t k = 0; k < ordered.size(); ++k) {
        if (ordered[k]->class_id != static_cast<int>(k) + 1)
            throw ValidationError("class ids must be exactly 1..K");
        ordered[k]->validate();
    }
    return ordered;
}

std::vector<SamplePlan> plan_samples(const std::vector<const ClassSpec*>& ordered, std::uint64_t seed) {
    std::vector<SamplePlan> plan;
    for (std::size_t k = 0; k < ordered.size(); ++k) {
        const ClassSpec& spec = *ordered[k];
        for (std::size_t g = 0; g < spec.geometries.size(); ++g) {
            const GeometryEntry& entry = spec.geometries[g];
            const auto draws = sample_variations(spec.m_alpha, spec.s_alpha, spec.sigma_mean(entry), spec.sigma_std(entry),
                                                 spec.v_count, derive_seed(seed, stream::kVariations, (k << 20) | g));
            for (const auto& v : draws) plan.push_back({k, &entry, v});
        }
    }
    return plan;
}

Dictionary realise(const std::vector<SamplePlan>& plan, std::size_t k_count, const std::vector<double>& eval_freqs,
                   double snr_db, FeatureKind kind, std::uint64_t seed, std::uint64_t noise_stream, int threads) {
    Dictionary d;
    d.eval_freqs = eval_freqs;
    d.kind = kind;
    d.class_counts.assign(k_count, 0);
    d.samples.resize(plan.size());
    parallel_for(plan.size(), threads, [&](std::size_t i) {
        const SamplePlan& p = plan[i];
        const SpectralSignature scaled =
            scale_signature(p.geometry->base, p.variation.alpha, p.variation.sigma, eval_freqs);
        const SpectralSignature noisy = add_noise(scaled, snr_db, derive_seed(seed, noise_stream, i));
        LabeledSample& s = d.samples[i];
        s.x = build_features(noisy, eval_freqs, kind);
        s.t.assign(k_count, 0.0);
        s.t[p.class_index] = 1.0;
        s.geometry_id = p.geometry->base.geometry_id;
        s.alpha = p.variation.alpha;
        s.sigma = p.variation.sigma;
    });
    for (const auto& p : plan) ++d.class_counts[p.class_index];
    return d;
}

}  // namespace

Dictionary build_dictionary(const std::vector<ClassSpec>& specs, const BuildOptions& o) {
    if (o.eval_freqs.empty()) throw ValidationError("at least one evaluation frequency is required");
    const auto ordered = ordered_specs(specs);
    const auto plan = plan_samples(ordered, o.seed);
    return realise(plan, ordered.size(), o.eval_freqs, o.snr_db, o.kind, o.seed, o.noise_stream, o.threads);
}

Dictionary build_dictionary(const std::vector<ClassSpec>& specs, const std::vector<double>& eval_freqs, double snr_db,
                            FeatureKind kind, std::uint64_t seed, int threads) {
    BuildOptions o;
    o.eval_freqs = eval_freqs;
    o.snr_db = snr_db;
    o.kind = kind;
    o.seed = seed;
    o.threads = threads;
    return build_dictionary(specs, o);
}

NoisyDictionaries build_dictionaries(const std::vector<ClassSpec>& specs, const std::vector<double>& eval_freqs,
                                     double train_snr_db, double test_snr_db, FeatureKind kind, std::uint64_t seed,
                                     int threads) {
    if (eval_freqs.empty()) throw ValidationError("at least one evaluation frequency is required");
    const auto ordered = ordered_specs(specs);
    const auto plan = plan_samples(ordered, seed);
    NoisyDictionaries out;
    out.train_view = realise(plan, ordered.size(), eval_freqs, train_snr_db, kind, seed, stream::kNoise, threads);
    if (train_snr_db == test_snr_db)
        out.test_view = out.train_view;
    else
        out.test_view = realise(plan, ordered.size(), eval_freqs, test_snr_db, kind, seed, stream::kTestNoise, threads);
    return out;
}

SplitDictionary build_loo_dictionary(const std::vector<ClassSpec>& specs, const LooOptions& o) {
    const ClassSpec* held = nullptr;
    for (const auto& s : specs)
        if (s.class_id == o.class_id) held = &s;
    if (!held) throw GeometryNotFound("no class with id " + std::to_string(o.class_id));
    std::set<std::string> ids;
    bool found = false;
    for (const auto& g : held->geometries) {
        ids.insert(g.base.geometry_id);
        found = found || g.base.geometry_id == o.geometry_id;
    }
    if (!found)
        throw GeometryNotFound("class " + std::to_string(o.class_id) + " has no geometry '" + o.geometry_id + "'");
    if (ids.size() < 2)
        throw LastGeometry("class " + std::to_string(o.class_id) + " has a single geometry; nothing would remain to train on");

    const auto views =
        build_dictionaries(specs, o.eval_freqs, o.train_snr_db, o.test_snr_db, o.kind, o.seed, o.threads);
    const SplitIndices base = split_indices(views.train_view, o.test_fraction, o.seed);

    std::vector<std::size_t> train, test;
    auto in_held_class = [&](std::size_t i) { return views.train_view.samples[i].class_id() == o.class_id; };
    for (std::size_t i : base.train)
        if (!in_held_class(i)) train.push_back(i);
    for (std::size_t i : base.test)
        if (!in_held_class(i)) test.push_back(i);
    for (std::size_t i = 0; i < views.train_view.size(); ++i) {
        if (!in_held_class(i)) continue;
        if (views.train_view.samples[i].geometry_id == o.geometry_id) test.push_back(i);
        else train.push_back(i);
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {views.train_view.subset(train), views.test_view.subset(test)};
}

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

nlohmann::json snr_json(double snr) {
    if (std::isinf(snr)) return "none";
    return snr;
}

}  // namespace

void write_dictionary(const Dictionary& d, const DictionaryMetadata& meta, const std::filesystem::path& csv_path,
                      const std::filesystem::path& sidecar_path) {
    std::ofstream csv(csv_path, std::ios::binary | std::ios::trunc);
    if (!csv) throw IoError("cannot write " + csv_path.string());
    const int k_count = d.num_classes();
    const int f_count = d.num_features();
    csv << "class_id";
    for (int k = 1; k <= k_count; ++k) csv << ",t_" << k;
    for (int f = 1; f <= f_count; ++f) csv << ",x_" << f;
    csv << "\n";
    for (const auto& s : d.samples) {
        csv << s.class_id();
        for (double v : s.t) csv << "," << (v == 1.0 ? "1" : "0");
        for (double v : s.x) csv << "," << fmt17(v);
        csv << "\n";
    }
    if (!csv) throw IoError("write failed for " + csv_path.string());

    nlohmann::json side;
    side["eval_frequencies_radps"] = d.eval_freqs;
    side["feature_kind"] = to_string(d.kind);
    side["train_snr_db"] = snr_json(meta.train_snr_db);
    side["test_snr_db"] = snr_json(meta.test_snr_db);
    side["seed"] = meta.seed;
    side["class_counts"] = d.class_counts;
    side["class_names"] = meta.class_names;
    side["num_features"] = f_count;
    side["num_samples"] = d.size();
    std::ofstream js(sidecar_path, std::ios::binary | std::ios::trunc);
    if (!js) throw IoError("cannot write " + sidecar_path.string());
    js << side.dump(2) << "\n";
}

Dictionary read_dictionary(const std::filesystem::path& csv_path, const std::filesystem::path& sidecar_path) {
    std::ifstream js(sidecar_path);
    if (!js) throw IoError("cannot open " + sidecar_path.string());
    nlohmann::json side;
    try {
        js >> side;
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(sidecar_path.string() + ": " + ex.what());
    }
    Dictionary d;
    d.eval_freqs = side.at("eval_frequencies_radps").get<std::vector<double>>();
    d.kind = feature_kind_from_string(side.at("feature_kind").get<std::string>());
    const auto k_count = side.at("class_counts").size();
    d.class_counts.assign(k_count, 0);

    std::ifstream csv(csv_path);
    if (!csv) throw IoError("cannot open " + csv_path.string());
    std::string line;
    if (!std::getline(csv, line)) throw ParseError(csv_path.string() + ": empty file");
    int lineno = 1;
    while (std::getline(csv, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            char* end = nullptr;
            row.push_back(std::strtod(cell.c_str(), &end));
            if (end == cell.c_str()) throw ParseError(csv_path.string() + ": bad number at line " + std::to_string(lineno));
        }
        if (row.size() < 1 + k_count) throw ParseError(csv_path.string() + ": short row at line " + std::to_string(lineno));
        LabeledSample s;
        s.t.assign(row.begin() + 1, row.begin() + 1 + static_cast<std::ptrdiff_t>(k_count));
        s.x.assign(row.begin() + 1 + static_cast<std::ptrdiff_t>(k_count), row.end());
        ++d.class_counts.at(static_cast<std::size_t>(s.class_id() - 1));
        d.samples.push_back(std::move(s));
    }
    d.validate();
    return d;
}

}  // namespace mpt
