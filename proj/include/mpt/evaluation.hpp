#pragma once
// Scoring trained classifiers: confusion matrices, per-class rates, Cohen's
// kappa, Monte Carlo cross validation, percentile summaries of posteriors and
// Monte Carlo error decompositions on synthetic problems with a known posterior.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mpt/classifiers.hpp"
#include "mpt/dictionary.hpp"

namespace mpt {

// Rows = true class, columns = predicted class, both 0-based here; the
// accessors below take 1-based class ids.
struct ConfusionMatrix {
    std::vector<std::vector<long>> counts;

    int num_classes() const { return static_cast<int>(counts.size()); }
    long total() const;
    long row_sum(int k) const;
    long col_sum(int k) const;
    long tp(int k) const;
    long fp(int k) const;
    long fn(int k) const;
    long tn(int k) const;
    // Entries divided by the total (sums to 1).
    std::vector<std::vector<double>> normalized() const;
    // Each row divided by its sum; empty rows stay zero.
    std::vector<std::vector<double>> row_normalized() const;

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

// Throws ValidationError for labels outside [1, k] or mismatched lengths.
ConfusionMatrix confusion_matrix(const std::vector<int>& truth, const std::vector<int>& predicted, int k);
// Throws DimensionMismatch when the data disagrees with the model's shape.
ConfusionMatrix confusion_matrix(const ClassifierModel& model, const Dataset& test);
ConfusionMatrix confusion_matrix(const ClassifierModel& model, const Dictionary& test);

// nullopt marks 0/0.
struct ClassMetrics {
    std::vector<std::optional<double>> precision;
    std::vector<std::optional<double>> sensitivity;
    std::vector<std::optional<double>> specificity;

    friend bool operator==(const ClassMetrics&, const ClassMetrics&) = default;
};

ClassMetrics class_metrics(const ConfusionMatrix& c);

double accuracy(const ConfusionMatrix& c);
// sum_k (TP+FN)(TP+FP) / N^2
double random_accuracy(const ConfusionMatrix& c);
// Throws ValidationError on an empty matrix, DegenerateChance when the random
// accuracy is 1.
double kappa(const ConfusionMatrix& c);

// Percentile of unsorted values: position (y/100) n - 0.5 in the ascending
// order (0-based), clamped to the ends, linear between neighbours.
double percentile(std::vector<double> values, double y);
double percentile_sorted(const std::vector<double>& sorted, double y);

struct PosteriorPercentiles {
    double p5 = 0, q1 = 0, median = 0, q3 = 0, p95 = 0;
};

struct UncertaintySummary {
    int true_class = 0;  // 0 when unknown
    std::size_t samples = 0;
    std::vector<PosteriorPercentiles> classes;  // index k-1
};

// gammas[i] is the posterior vector of sample i. Throws EmptySubset.
UncertaintySummary summarize_posteriors(const std::vector<std::vector<double>>& gammas, int true_class = 0);
// Posterior spread over the test samples whose true class is `true_class`.
// Throws NonProbabilisticModel for SVMs and EmptySubset when no sample matches.
UncertaintySummary uncertainty_summary(const ClassifierModel& model, const Dictionary& test, int true_class);

struct McCvIteration {
    double kappa = 0;
    ConfusionMatrix confusion;
    ClassMetrics metrics;
};

struct KappaStats {
    double mean = 0, min = 0, max = 0, q1 = 0, median = 0, q3 = 0;
};

struct McCvReport {
    std::vector<McCvIteration> iterations;
    KappaStats kappa;
};

KappaStats kappa_stats(const std::vector<double>& kappas);

// l stratified splits, each with seed derive_seed(seed, kMccv, i); the model
// of split i is trained with derive_seed(seed, kModel, i). Iterations run on
// up to `threads` workers; the report does not depend on the count.
McCvReport mccv(Method method, const Hyperparams& hp, const Dictionary& d, int iterations, double test_fraction,
                std::uint64_t seed, int threads = 1);
// Trains on train_view and scores the matching samples of test_view, which
// must list the same objects in the same order (see build_dictionaries).
McCvReport mccv(Method method, const Hyperparams& hp, const Dictionary& train_view, const Dictionary& test_view,
                int iterations, double test_fraction, std::uint64_t seed, int threads = 1);

using Posterior = std::function<std::vector<double>(const std::vector<double>&)>;

Posterior as_posterior(const ClassifierModel& model);

struct MseEstimate {
    double mse = 0;
    double std_error = 0;
    std::size_t samples = 0;
};

// Mean over the sample points of sum_k (gamma_k(x) - p(C_k|x))^2.
MseEstimate mse_vs_reference(const Posterior& model, const Posterior& reference,
                             const std::vector<std::vector<double>>& points);

// K isotropic Gaussians with a shared standard deviation.
struct GaussianMixture {
    std::vector<std::vector<double>> means;  // K x F
    double stddev = 1.0;
    std::vector<double> priors;  // empty = uniform

    int num_classes() const { return static_cast<int>(means.size()); }
    int num_features() const { return means.empty() ? 0 : static_cast<int>(means.front().size()); }
    double prior(int k) const;  // 1-based
    std::vector<double> posterior(const std::vector<double>& x) const;
    // round(n * prior_k) points of class k (at least 1), classes in order.
    Dataset sample(std::size_t n, std::uint64_t seed) const;
    // n points from the mixture itself.
    std::vector<std::vector<double>> sample_points(std::size_t n, std::uint64_t seed) const;
};

struct Problem {
    std::function<Dataset(std::uint64_t seed)> draw_trainset;
    Posterior truth;
};

Problem make_problem(const GaussianMixture& g, std::size_t train_size);

using Learner = std::function<Posterior(const Dataset& train, std::uint64_t seed)>;

Learner method_learner(Method method, const Hyperparams& hp);

struct BiasVariance {
    double bias = 0;      // E_x sum_k (p_k(x) - E_D gamma_k(x))^2
    double variance = 0;  // E_x E_D sum_k (gamma_k(x) - E_D gamma_k(x))^2
    double learning_error = 0;  // E_D E_x sum_k (gamma_k(x) - p_k(x))^2, estimated directly
    double learning_error_se = 0;
    int trainsets = 0;
    std::size_t points = 0;
};

// Training set d is drawn with derive_seed(seed, kTrainset, d) and learned
// with derive_seed(seed, kModel, d).
BiasVariance bias_variance(const Learner& learner, const Problem& problem, const std::vector<std::vector<double>>& grid,
                           int n_trainsets, std::uint64_t seed, int threads = 1);
BiasVariance bias_variance(Method method, const Hyperparams& hp, const Problem& problem,
                           const std::vector<std::vector<double>>& grid, int n_trainsets, std::uint64_t seed,
                           int threads = 1);

struct FeatureReport {
    std::size_t samples = 0;
    double mean = 0;
    double stddev = 0;  // n - 1 denominator
    double skewness = 0;
    double excess_kurtosis = 0;
    bool zero_variance = false;
    // Histogram of Z = (X - mean) / stddev; `bins` + 1 edges.
    std::vector<double> edges;
    std::vector<std::size_t> counts;
    std::vector<double> z;
};

// Throws ValidationError with fewer than 30 values or bins < 1.
FeatureReport feature_distribution_report(const std::vector<double>& values, int bins = 20);
FeatureReport feature_distribution_report(const Dictionary& d, std::size_t feature, int bins = 20);

// Exports. Numbers are printed with 17 significant digits; undefined metrics
// as "nan" in CSV and null in JSON.
std::string confusion_csv(const ConfusionMatrix& c);
// Long format (true, predicted, fraction of the true-class row).
std::string normalized_confusion_csv(const ConfusionMatrix& c);
std::string metrics_csv(const ClassMetrics& m);
std::string kappa_csv(const McCvReport& r);
std::string mccv_json(const McCvReport& r);
std::string uncertainty_csv(const UncertaintySummary& s);
std::string feature_report_json(const FeatureReport& r);

}  // namespace mpt
