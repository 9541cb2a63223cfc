#include "mpt/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"
#include "mpt/errors.hpp"
#include "mpt/parallel.hpp"
#include "mpt/rng.hpp"

namespace mpt {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : "nan"; }

void check_class(const ConfusionMatrix& c, int k) {
    if (k < 1 || k > c.num_classes()) throw ValidationError("class " + std::to_string(k) + " out of range");
}

std::optional<double> ratio(long num, long den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

long ConfusionMatrix::total() const {
    long n = 0;
    for (const auto& row : counts) n = std::accumulate(row.begin(), row.end(), n);
    return n;
}

long ConfusionMatrix::row_sum(int k) const {
    check_class(*this, k);
    const auto& row = counts[static_cast<std::size_t>(k - 1)];
    return std::accumulate(row.begin(), row.end(), 0L);
}

long ConfusionMatrix::col_sum(int k) const {
    check_class(*this, k);
    long n = 0;
    for (const auto& row : counts) n += row[static_cast<std::size_t>(k - 1)];
    return n;
}

long ConfusionMatrix::tp(int k) const {
    check_class(*this, k);
    return counts[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(k - 1)];
}

long ConfusionMatrix::fp(int k) const { return col_sum(k) - tp(k); }
long ConfusionMatrix::fn(int k) const { return row_sum(k) - tp(k); }
long ConfusionMatrix::tn(int k) const { return total() - tp(k) - fp(k) - fn(k); }

std::vector<std::vector<double>> ConfusionMatrix::normalized() const {
    const double n = static_cast<double>(total());
    std::vector<std::vector<double>> out;
    for (const auto& row : counts) {
        std::vector<double> r(row.size(), 0.0);
        if (n > 0)
            for (std::size_t j = 0; j < row.size(); ++j) r[j] = static_cast<double>(row[j]) / n;
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<std::vector<double>> ConfusionMatrix::row_normalized() const {
    std::vector<std::vector<double>> out;
    for (const auto& row : counts) {
        const double s = static_cast<double>(std::accumulate(row.begin(), row.end(), 0L));
        std::vector<double> r(row.size(), 0.0);
        if (s > 0)
            for (std::size_t j = 0; j < row.size(); ++j) r[j] = static_cast<double>(row[j]) / s;
        out.push_back(std::move(r));
    }
    return out;
}

ConfusionMatrix confusion_matrix(const std::vector<int>& truth, const std::vector<int>& predicted, int k) {
    if (k < 1) throw ValidationError("confusion matrix needs at least one class");
    if (truth.size() != predicted.size()) throw ValidationError("truth and prediction lengths differ");
    ConfusionMatrix c;
    c.counts.assign(static_cast<std::size_t>(k), std::vector<long>(static_cast<std::size_t>(k), 0));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 1 || truth[i] > k || predicted[i] < 1 || predicted[i] > k)
            throw ValidationError("label outside [1, K] at sample " + std::to_string(i));
        ++c.counts[static_cast<std::size_t>(truth[i] - 1)][static_cast<std::size_t>(predicted[i] - 1)];
    }
    return c;
}

ConfusionMatrix confusion_matrix(const ClassifierModel& model, const Dataset& test) {
    if (test.size() == 0) throw EmptySubset("empty test set");
    if (test.num_classes != 0 && test.num_classes != model.num_classes())
        throw DimensionMismatch("test set has " + std::to_string(test.num_classes) + " classes, model has " +
                                std::to_string(model.num_classes()));
    std::vector<int> predicted;
    predicted.reserve(test.size());
    for (const auto& x : test.x) predicted.push_back(model.predict(x));
    return confusion_matrix(test.y, predicted, model.num_classes());
}

ConfusionMatrix confusion_matrix(const ClassifierModel& model, const Dictionary& test) {
    return confusion_matrix(model, to_dataset(test));
}

ClassMetrics class_metrics(const ConfusionMatrix& c) {
    ClassMetrics m;
    for (int k = 1; k <= c.num_classes(); ++k) {
        const long tp = c.tp(k), fp = c.fp(k), fn = c.fn(k), tn = c.tn(k);
        m.precision.push_back(ratio(tp, tp + fp));
        m.sensitivity.push_back(ratio(tp, tp + fn));
        m.specificity.push_back(ratio(tn, tn + fp));
    }
    return m;
}

double accuracy(const ConfusionMatrix& c) {
    const long n = c.total();
    if (n == 0) throw ValidationError("accuracy of an empty confusion matrix");
    long diag = 0;
    for (int k = 1; k <= c.num_classes(); ++k) diag += c.tp(k);
    return static_cast<double>(diag) / static_cast<double>(n);
}

double random_accuracy(const ConfusionMatrix& c) {
    const long n = c.total();
    if (n == 0) throw ValidationError("random accuracy of an empty confusion matrix");
    // integer numerator keeps hand-checked cases exact
    long double s = 0;
    for (int k = 1; k <= c.num_classes(); ++k)
        s += static_cast<long double>(c.tp(k) + c.fn(k)) * static_cast<long double>(c.tp(k) + c.fp(k));
    return static_cast<double>(s / (static_cast<long double>(n) * static_cast<long double>(n)));
}

double kappa(const ConfusionMatrix& c) {
    const long long n = c.total();
    if (n == 0) throw ValidationError("kappa of an empty confusion matrix");
    // both terms multiplied through by N^2: one rounding, in the final division
    long long diag = 0, chance = 0;
    for (int k = 1; k <= c.num_classes(); ++k) {
        diag += c.tp(k);
        chance += static_cast<long long>(c.tp(k) + c.fn(k)) * (c.tp(k) + c.fp(k));
    }
    const long long num = n * diag - chance, den = n * n - chance;
    if (den == 0) throw DegenerateChance("random accuracy is 1; kappa undefined");
    return static_cast<double>(num) / static_cast<double>(den);
}

double percentile_sorted(const std::vector<double>& sorted, double y) {
    if (sorted.empty()) throw EmptySubset("percentile of no values");
    const double n = static_cast<double>(sorted.size());
    const double pos = std::clamp(y / 100.0 * n - 0.5, 0.0, n - 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double percentile(std::vector<double> values, double y) {
    std::sort(values.begin(), values.end());
    return percentile_sorted(values, y);
}

UncertaintySummary summarize_posteriors(const std::vector<std::vector<double>>& gammas, int true_class) {
    if (gammas.empty()) throw EmptySubset("no posteriors to summarise");
    const std::size_t k = gammas.front().size();
    UncertaintySummary s;
    s.true_class = true_class;
    s.samples = gammas.size();
    std::vector<double> col(gammas.size());
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < gammas.size(); ++i) {
            if (gammas[i].size() != k) throw DimensionMismatch("posterior vectors differ in length");
            col[i] = gammas[i][c];
        }
        std::sort(col.begin(), col.end());
        s.classes.push_back({percentile_sorted(col, 5), percentile_sorted(col, 25), percentile_sorted(col, 50),
                             percentile_sorted(col, 75), percentile_sorted(col, 95)});
    }
    return s;
}

UncertaintySummary uncertainty_summary(const ClassifierModel& model, const Dictionary& test, int true_class) {
    if (!is_probabilistic(model.method()))
        throw NonProbabilisticModel(to_string(model.method()) + " outputs votes, not posteriors");
    std::vector<std::vector<double>> gammas;
    for (const auto& s : test.samples)
        if (s.class_id() == true_class) gammas.push_back(model.predict_proba(s.x));
    if (gammas.empty()) throw EmptySubset("no test samples of class " + std::to_string(true_class));
    return summarize_posteriors(gammas, true_class);
}

KappaStats kappa_stats(const std::vector<double>& kappas) {
    if (kappas.empty()) throw EmptySubset("no kappa values");
    std::vector<double> s = kappas;
    std::sort(s.begin(), s.end());
    KappaStats k;
    k.mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    k.min = s.front();
    k.max = s.back();
    k.q1 = percentile_sorted(s, 25);
    k.median = percentile_sorted(s, 50);
    k.q3 = percentile_sorted(s, 75);
    return k;
}

McCvReport mccv(Method method, const Hyperparams& hp, const Dictionary& d, int iterations, double test_fraction,
                std::uint64_t seed, int threads) {
    return mccv(method, hp, d, d, iterations, test_fraction, seed, threads);
}

McCvReport mccv(Method method, const Hyperparams& hp, const Dictionary& train_view, const Dictionary& test_view,
                int iterations, double test_fraction, std::uint64_t seed, int threads) {
    if (iterations < 1) throw ValidationError("mccv needs at least one iteration");
    if (train_view.size() != test_view.size() || train_view.class_counts != test_view.class_counts)
        throw DimensionMismatch("train and test views describe different samples");
    McCvReport r;
    r.iterations.resize(static_cast<std::size_t>(iterations));
    parallel_for(r.iterations.size(), threads, [&](std::size_t i) {
        const auto idx = split_indices(train_view, test_fraction, derive_seed(seed, stream::kMccv, i));
        const auto model = train(method, hp, train_view.subset(idx.train), derive_seed(seed, stream::kModel, i));
        auto& it = r.iterations[i];
        it.confusion = confusion_matrix(model, test_view.subset(idx.test));
        it.metrics = class_metrics(it.confusion);
        it.kappa = kappa(it.confusion);
    });
    std::vector<double> kappas;
    for (const auto& it : r.iterations) kappas.push_back(it.kappa);
    r.kappa = kappa_stats(kappas);
    return r;
}

Posterior as_posterior(const ClassifierModel& model) {
    return [model](const std::vector<double>& x) { return model.predict_proba(x); };
}

MseEstimate mse_vs_reference(const Posterior& model, const Posterior& reference,
                             const std::vector<std::vector<double>>& points) {
    if (points.empty()) throw EmptySubset("no sample points");
    std::vector<double> e;
    e.reserve(points.size());
    for (const auto& x : points) {
        const auto g = model(x), p = reference(x);
        if (g.size() != p.size()) throw DimensionMismatch("model and reference disagree on K");
        double s = 0;
        for (std::size_t k = 0; k < g.size(); ++k) s += (g[k] - p[k]) * (g[k] - p[k]);
        e.push_back(s);
    }
    const double n = static_cast<double>(e.size());
    const double mean = std::accumulate(e.begin(), e.end(), 0.0) / n;
    double ss = 0;
    for (double v : e) ss += (v - mean) * (v - mean);
    MseEstimate out;
    out.mse = mean;
    out.std_error = e.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    out.samples = e.size();
    return out;
}

double GaussianMixture::prior(int k) const {
    if (priors.empty()) return 1.0 / static_cast<double>(num_classes());
    return priors.at(static_cast<std::size_t>(k - 1));
}

std::vector<double> GaussianMixture::posterior(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != num_features()) throw DimensionMismatch("point has the wrong dimension");
    std::vector<double> a;
    for (int k = 1; k <= num_classes(); ++k) {
        const auto& m = means[static_cast<std::size_t>(k - 1)];
        double d2 = 0;
        for (std::size_t j = 0; j < x.size(); ++j) d2 += (x[j] - m[j]) * (x[j] - m[j]);
        a.push_back(std::log(prior(k)) - 0.5 * d2 / (stddev * stddev));
    }
    return softmax(a);
}

Dataset GaussianMixture::sample(std::size_t n, std::uint64_t seed) const {
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, stddev);
    Dataset d;
    d.num_classes = num_classes();
    for (int k = 1; k <= num_classes(); ++k) {
        const auto count = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(prior(k) * static_cast<double>(n))));
        for (std::size_t i = 0; i < count; ++i) {
            std::vector<double> x = means[static_cast<std::size_t>(k - 1)];
            for (auto& v : x) v += normal(rng);
            d.x.push_back(std::move(x));
            d.y.push_back(k);
        }
    }
    return d;
}

std::vector<std::vector<double>> GaussianMixture::sample_points(std::size_t n, std::uint64_t seed) const {
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, stddev);
    std::vector<double> w;
    for (int k = 1; k <= num_classes(); ++k) w.push_back(prior(k));
    std::discrete_distribution<int> pick(w.begin(), w.end());
    std::vector<std::vector<double>> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x = means[static_cast<std::size_t>(pick(rng))];
        for (auto& v : x) v += normal(rng);
        out.push_back(std::move(x));
    }
    return out;
}

Problem make_problem(const GaussianMixture& g, std::size_t train_size) {
    return {[g, train_size](std::uint64_t seed) { return g.sample(train_size, seed); },
            [g](const std::vector<double>& x) { return g.posterior(x); }};
}

Learner method_learner(Method method, const Hyperparams& hp) {
    return [method, hp](const Dataset& train_set, std::uint64_t seed) {
        return as_posterior(train(method, hp, train_set, seed));
    };
}

BiasVariance bias_variance(const Learner& learner, const Problem& problem, const std::vector<std::vector<double>>& grid,
                           int n_trainsets, std::uint64_t seed, int threads) {
    if (n_trainsets < 1) throw ValidationError("bias_variance needs at least one training set");
    if (grid.empty()) throw EmptySubset("empty evaluation grid");
    const auto nd = static_cast<std::size_t>(n_trainsets), nx = grid.size();
    // gamma[d][x] = posterior vector
    std::vector<std::vector<std::vector<double>>> gamma(nd);
    parallel_for(nd, threads, [&](std::size_t d) {
        const auto model = learner(problem.draw_trainset(derive_seed(seed, stream::kTrainset, d)),
                                   derive_seed(seed, stream::kModel, d));
        gamma[d].reserve(nx);
        for (const auto& x : grid) gamma[d].push_back(model(x));
    });

    BiasVariance out;
    out.trainsets = n_trainsets;
    out.points = nx;
    std::vector<double> per_set(nd, 0.0);
    for (std::size_t i = 0; i < nx; ++i) {
        const auto p = problem.truth(grid[i]);
        std::vector<double> avg(p.size(), 0.0);
        for (std::size_t d = 0; d < nd; ++d) {
            if (gamma[d][i].size() != p.size()) throw DimensionMismatch("learner and truth disagree on K");
            for (std::size_t k = 0; k < p.size(); ++k) avg[k] += gamma[d][i][k];
        }
        for (auto& v : avg) v /= static_cast<double>(nd);
        for (std::size_t k = 0; k < p.size(); ++k) out.bias += (p[k] - avg[k]) * (p[k] - avg[k]);
        for (std::size_t d = 0; d < nd; ++d)
            for (std::size_t k = 0; k < p.size(); ++k) {
                const double dv = gamma[d][i][k] - avg[k], de = gamma[d][i][k] - p[k];
                out.variance += dv * dv / static_cast<double>(nd);
                per_set[d] += de * de;
            }
    }
    out.bias /= static_cast<double>(nx);
    out.variance /= static_cast<double>(nx);
    for (auto& v : per_set) v /= static_cast<double>(nx);
    out.learning_error = std::accumulate(per_set.begin(), per_set.end(), 0.0) / static_cast<double>(nd);
    if (nd > 1) {
        double ss = 0;
        for (double v : per_set) ss += (v - out.learning_error) * (v - out.learning_error);
        out.learning_error_se = std::sqrt(ss / static_cast<double>(nd - 1) / static_cast<double>(nd));
    }
    return out;
}

BiasVariance bias_variance(Method method, const Hyperparams& hp, const Problem& problem,
                           const std::vector<std::vector<double>>& grid, int n_trainsets, std::uint64_t seed,
                           int threads) {
    return bias_variance(method_learner(method, hp), problem, grid, n_trainsets, seed, threads);
}

FeatureReport feature_distribution_report(const std::vector<double>& values, int bins) {
    if (values.size() < 30) throw ValidationError("feature report needs at least 30 samples");
    if (bins < 1) throw ValidationError("feature report needs at least one bin");
    FeatureReport r;
    const double n = static_cast<double>(values.size());
    r.samples = values.size();
    r.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.stddev = std::sqrt(ss / (n - 1.0));
    // relative test: a feature of size 1e-12 with spread 1e-28 is constant
    const double scale = std::max(std::abs(r.mean), 1e-300);
    r.zero_variance = !(r.stddev > 1e-12 * scale);
    r.z.resize(values.size(), 0.0);
    r.counts.assign(static_cast<std::size_t>(bins), 0);
    if (r.zero_variance) {
        r.edges = linear_grid(-0.5, 0.5, static_cast<std::size_t>(bins) + 1);
        r.counts[static_cast<std::size_t>(bins) / 2] = values.size();
        return r;
    }
    double m2 = 0, m3 = 0, m4 = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        r.z[i] = (values[i] - r.mean) / r.stddev;
        const double d = values[i] - r.mean, d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n, m3 /= n, m4 /= n;
    r.skewness = m3 / std::pow(m2, 1.5);
    r.excess_kurtosis = m4 / (m2 * m2) - 3.0;
    const auto [lo, hi] = std::minmax_element(r.z.begin(), r.z.end());
    r.edges = linear_grid(*lo, *hi, static_cast<std::size_t>(bins) + 1);
    const double width = (*hi - *lo) / bins;
    for (double z : r.z) {
        auto b = static_cast<long>(std::floor((z - *lo) / width));
        b = std::clamp<long>(b, 0, bins - 1);
        ++r.counts[static_cast<std::size_t>(b)];
    }
    return r;
}

FeatureReport feature_distribution_report(const Dictionary& d, std::size_t feature, int bins) {
    if (feature >= static_cast<std::size_t>(d.num_features()))
        throw ValidationError("feature index " + std::to_string(feature) + " out of range");
    std::vector<double> v;
    v.reserve(d.size());
    for (const auto& s : d.samples) v.push_back(s.x[feature]);
    return feature_distribution_report(v, bins);
}

std::string confusion_csv(const ConfusionMatrix& c) {
    std::ostringstream os;
    os << "true";
    for (int k = 1; k <= c.num_classes(); ++k) os << ",pred_" << k;
    os << '\n';
    for (int i = 0; i < c.num_classes(); ++i) {
        os << i + 1;
        for (long v : c.counts[static_cast<std::size_t>(i)]) os << ',' << v;
        os << '\n';
    }
    return os.str();
}

std::string normalized_confusion_csv(const ConfusionMatrix& c) {
    std::ostringstream os;
    os << "true,predicted,fraction\n";
    const auto rn = c.row_normalized();
    for (std::size_t i = 0; i < rn.size(); ++i)
        for (std::size_t j = 0; j < rn[i].size(); ++j) os << i + 1 << ',' << j + 1 << ',' << num(rn[i][j]) << '\n';
    return os.str();
}

std::string metrics_csv(const ClassMetrics& m) {
    std::ostringstream os;
    os << "class,precision,sensitivity,specificity\n";
    for (std::size_t k = 0; k < m.precision.size(); ++k)
        os << k + 1 << ',' << num(m.precision[k]) << ',' << num(m.sensitivity[k]) << ',' << num(m.specificity[k])
           << '\n';
    return os.str();
}

std::string kappa_csv(const McCvReport& r) {
    std::ostringstream os;
    os << "iteration,kappa\n";
    for (std::size_t i = 0; i < r.iterations.size(); ++i) os << i + 1 << ',' << num(r.iterations[i].kappa) << '\n';
    return os.str();
}

namespace {

nlohmann::json opt_json(const std::vector<std::optional<double>>& v) {
    auto a = nlohmann::json::array();
    for (const auto& x : v) a.push_back(x ? nlohmann::json(*x) : nlohmann::json(nullptr));
    return a;
}

}  // namespace

std::string mccv_json(const McCvReport& r) {
    using nlohmann::json;
    json its = json::array();
    for (const auto& it : r.iterations)
        its.push_back({{"kappa", it.kappa},
                       {"confusion", it.confusion.counts},
                       {"precision", opt_json(it.metrics.precision)},
                       {"sensitivity", opt_json(it.metrics.sensitivity)},
                       {"specificity", opt_json(it.metrics.specificity)}});
    const auto& k = r.kappa;
    json j = {{"iterations", its},
              {"kappa",
               {{"mean", k.mean}, {"min", k.min}, {"max", k.max}, {"q1", k.q1}, {"median", k.median}, {"q3", k.q3}}}};
    return j.dump(1);
}

std::string uncertainty_csv(const UncertaintySummary& s) {
    std::ostringstream os;
    os << "true_class,class,p5,q1,median,q3,p95\n";
    for (std::size_t k = 0; k < s.classes.size(); ++k) {
        const auto& c = s.classes[k];
        os << s.true_class << ',' << k + 1 << ',' << num(c.p5) << ',' << num(c.q1) << ',' << num(c.median) << ','
           << num(c.q3) << ',' << num(c.p95) << '\n';
    }
    return os.str();
}

std::string feature_report_json(const FeatureReport& r) {
    nlohmann::json j = {{"samples", r.samples},
                        {"mean", r.mean},
                        {"stddev", r.stddev},
                        {"skewness", r.skewness},
                        {"excess_kurtosis", r.excess_kurtosis},
                        {"zero_variance", r.zero_variance},
                        {"edges", r.edges},
                        {"counts", r.counts}};
    return j.dump(1);
}

}  // namespace mpt
