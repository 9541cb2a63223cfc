#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "json.hpp"
#include "mpt/errors.hpp"
#include "mpt/evaluation.hpp"
#include "mpt/rng.hpp"

using namespace mpt;

namespace {

ConfusionMatrix matrix(std::vector<std::vector<long>> c) { return ConfusionMatrix{std::move(c)}; }

// Brute force: walk the (truth, prediction) pairs and count.
struct Counts {
    long tp = 0, fp = 0, tn = 0, fn = 0;
};

Counts recount(const std::vector<int>& truth, const std::vector<int>& pred, int k) {
    Counts c;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool is_k = truth[i] == k, said_k = pred[i] == k;
        if (is_k && said_k) ++c.tp;
        else if (!is_k && said_k) ++c.fp;
        else if (is_k && !said_k) ++c.fn;
        else ++c.tn;
    }
    return c;
}

// Independent percentile: 1-based rank r = p n + 1/2, then interpolate
// between the floor(r)-th and ceil(r)-th smallest values.
double oracle_percentile(std::vector<double> v, double y) {
    const double n = static_cast<double>(v.size());
    double r = y / 100.0 * n + 0.5;
    r = std::min(std::max(r, 1.0), n);
    const auto a = static_cast<std::size_t>(std::floor(r)), b = static_cast<std::size_t>(std::ceil(r));
    std::nth_element(v.begin(), v.begin() + static_cast<long>(a - 1), v.end());
    const double va = v[a - 1];
    std::nth_element(v.begin(), v.begin() + static_cast<long>(b - 1), v.end());
    const double vb = v[b - 1];
    return va + (r - std::floor(r)) * (vb - va);
}

ClassifierModel constant_model(int k, int f, int winner) {
    LogisticParams p;
    p.weights.assign(static_cast<std::size_t>(k - 1), std::vector<double>(static_cast<std::size_t>(f), 0.0));
    p.intercepts.assign(static_cast<std::size_t>(k - 1), 0.0);
    if (winner < k) p.intercepts[static_cast<std::size_t>(winner - 1)] = 5.0;
    else
        for (auto& b : p.intercepts) b = -5.0;
    Normalizer n;
    n.mean.assign(static_cast<std::size_t>(f), 0.0);
    n.scale.assign(static_cast<std::size_t>(f), 1.0);
    return ClassifierModel(Method::Logistic, k, f, n, p);
}

GaussianMixture three_blobs(double sd = 1.0) {
    GaussianMixture g;
    g.means = {{0.0, 0.0}, {3.0, 0.0}, {0.0, 3.0}};
    g.stddev = sd;
    return g;
}

Dictionary to_dictionary(const Dataset& d) {
    Dictionary out;
    out.class_counts.assign(static_cast<std::size_t>(d.num_classes), 0);
    for (std::size_t i = 0; i < d.size(); ++i) {
        LabeledSample s;
        s.x = d.x[i];
        s.t.assign(static_cast<std::size_t>(d.num_classes), 0.0);
        s.t[static_cast<std::size_t>(d.y[i] - 1)] = 1.0;
        out.samples.push_back(std::move(s));
        ++out.class_counts[static_cast<std::size_t>(d.y[i] - 1)];
    }
    out.eval_freqs = {1.0};
    return out;
}

}  // namespace

TEST_CASE("hand matrix rates") {
    const auto c = matrix({{5, 1}, {2, 4}});
    const auto m = class_metrics(c);
    CHECK(*m.precision[0] == 5.0 / 7.0);
    CHECK(*m.sensitivity[0] == 5.0 / 6.0);
    CHECK(*m.specificity[0] == 4.0 / 6.0);
    CHECK(*m.precision[1] == 4.0 / 5.0);
    CHECK(*m.sensitivity[1] == 4.0 / 6.0);
    CHECK(*m.specificity[1] == 5.0 / 6.0);
}

TEST_CASE("kappa hand values") {
    const auto c = matrix({{40, 10}, {20, 30}});
    CHECK(accuracy(c) == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(random_accuracy(c) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(kappa(c) == 0.4);
    CHECK(kappa(matrix({{25, 25}, {25, 25}})) == 0.0);
    CHECK(kappa(matrix({{7, 0, 0}, {0, 3, 0}, {0, 0, 11}})) == 1.0);
    CHECK_THROWS_AS(kappa(matrix({{9, 0}, {0, 0}})), DegenerateChance);
    CHECK_THROWS_AS(kappa(matrix({{0, 0}, {0, 0}})), ValidationError);
}

TEST_CASE("zero denominators are undefined, not zero") {
    // nothing predicted as class 2, no true class 3
    const auto m = class_metrics(matrix({{4, 0, 1}, {3, 0, 2}, {0, 0, 0}}));
    CHECK_FALSE(m.precision[1].has_value());
    CHECK(m.sensitivity[1].value() == 0.0);
    CHECK_FALSE(m.sensitivity[2].has_value());
    CHECK(m.precision[2].value() == 0.0);
}

TEST_CASE("confusion counts agree with brute-force recount") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const int k = 2 + trial % 6;
        std::uniform_int_distribution<int> lab(1, k);
        std::vector<int> truth(static_cast<std::size_t>(20 + 7 * trial)), pred(truth.size());
        for (std::size_t i = 0; i < truth.size(); ++i) {
            truth[i] = lab(rng);
            pred[i] = (rng() % 3 == 0) ? lab(rng) : truth[i];
        }
        const auto c = confusion_matrix(truth, pred, k);
        CHECK(c.total() == static_cast<long>(truth.size()));
        const auto m = class_metrics(c);
        for (int cls = 1; cls <= k; ++cls) {
            const auto o = recount(truth, pred, cls);
            CHECK(c.tp(cls) == o.tp);
            CHECK(c.fp(cls) == o.fp);
            CHECK(c.fn(cls) == o.fn);
            CHECK(c.tn(cls) == o.tn);
            CHECK(c.row_sum(cls) == std::count(truth.begin(), truth.end(), cls));
            const auto idx = static_cast<std::size_t>(cls - 1);
            if (o.tp + o.fp > 0) CHECK(*m.precision[idx] == static_cast<double>(o.tp) / static_cast<double>(o.tp + o.fp));
            if (o.tp + o.fn > 0) CHECK(*m.sensitivity[idx] == static_cast<double>(o.tp) / static_cast<double>(o.tp + o.fn));
            if (o.tn + o.fp > 0) CHECK(*m.specificity[idx] == static_cast<double>(o.tn) / static_cast<double>(o.tn + o.fp));
        }
        // kappa straight from the recount
        long diag = 0;
        double chance = 0;
        const double n = static_cast<double>(truth.size());
        for (int cls = 1; cls <= k; ++cls) {
            const auto o = recount(truth, pred, cls);
            diag += o.tp;
            chance += static_cast<double>((o.tp + o.fn) * (o.tp + o.fp)) / (n * n);
        }
        const double acc = static_cast<double>(diag) / n;
        if (chance < 1.0) CHECK(kappa(c) == doctest::Approx((acc - chance) / (1.0 - chance)).epsilon(1e-13));
    }
}

TEST_CASE("kappa bounded by one, equal to one only on the diagonal") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<long> cnt(0, 9);
    for (int trial = 0; trial < 500; ++trial) {
        const int k = 2 + trial % 4;
        ConfusionMatrix c;
        c.counts.assign(static_cast<std::size_t>(k), std::vector<long>(static_cast<std::size_t>(k)));
        bool diagonal = true;
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) {
                const long v = (i == j) ? cnt(rng) + 1 : (rng() % 4 == 0 ? cnt(rng) : 0);
                c.counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = v;
                if (i != j && v) diagonal = false;
            }
        const double kp = kappa(c);
        CHECK(kp <= 1.0);
        CHECK((kp == 1.0) == diagonal);
    }
}

TEST_CASE("normalised views") {
    const auto c = matrix({{3, 1, 0}, {0, 0, 0}, {2, 2, 4}});
    double s = 0;
    for (const auto& r : c.normalized())
        for (double v : r) s += v;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
    const auto rn = c.row_normalized();
    CHECK(rn[0][0] == 0.75);
    CHECK(rn[1] == std::vector<double>{0, 0, 0});
    CHECK(rn[2][2] == 0.5);
}

TEST_CASE("confusion from a model") {
    const auto g = three_blobs(0.2);
    const auto test = g.sample(90, 3);
    const auto perfect = train(Method::Logistic, {}, g.sample(90, 4), 1);
    const auto c = confusion_matrix(perfect, test);
    for (int k = 1; k <= 3; ++k) {
        CHECK(c.tp(k) == c.row_sum(k));
        CHECK(c.row_sum(k) == 30);
    }
    const auto constant = confusion_matrix(constant_model(3, 2, 1), test);
    CHECK(constant.col_sum(1) == 90);
    CHECK(confusion_matrix(constant_model(3, 2, 3), to_dictionary(test)).col_sum(3) == 90);

    Dataset wrong = test;
    for (auto& x : wrong.x) x.push_back(0.0);
    CHECK_THROWS_AS(confusion_matrix(perfect, wrong), DimensionMismatch);
}

TEST_CASE("percentile conventions") {
    CHECK(percentile({0.0, 1.0}, 50) == 0.5);
    CHECK(percentile({0.25, 0.25, 0.25, 0.25}, 5) == 0.25);
    CHECK(percentile({3.0}, 95) == 3.0);
    CHECK(percentile({1.0, 2.0, 3.0, 4.0}, 0) == 1.0);
    CHECK(percentile({1.0, 2.0, 3.0, 4.0}, 100) == 4.0);
    CHECK_THROWS_AS(percentile({}, 50), EmptySubset);
}

TEST_CASE("percentiles match sort-and-interpolate oracle") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v(1000);
        for (auto& x : v) x = u(rng);
        for (double y : {5.0, 25.0, 50.0, 75.0, 95.0, 0.01, 33.3, 99.97})
            CHECK(std::abs(percentile(v, y) - oracle_percentile(v, y)) <= 1e-12);
    }
}

TEST_CASE("uncertainty summary") {
    const auto g = three_blobs();
    const auto d = to_dictionary(g.sample(300, 8));
    const auto model = train(Method::Logistic, {}, d, 2);
    for (int cls = 1; cls <= 3; ++cls) {
        const auto s = uncertainty_summary(model, d, cls);
        CHECK(s.samples == 100);
        CHECK(s.classes.size() == 3);
        for (const auto& p : s.classes) {
            CHECK(p.p5 <= p.q1);
            CHECK(p.q1 <= p.median);
            CHECK(p.median <= p.q3);
            CHECK(p.q3 <= p.p95);
        }
        CHECK(s.classes[static_cast<std::size_t>(cls - 1)].median > 0.5);
    }
    const auto svm = train(Method::Svm, {}, d, 2);
    CHECK_THROWS_AS(uncertainty_summary(svm, d, 1), NonProbabilisticModel);
    CHECK_THROWS_AS(uncertainty_summary(model, d.subset({0, 3, 6}), 2), EmptySubset);

    const auto flat = summarize_posteriors(std::vector<std::vector<double>>(17, {0.2, 0.8}), 2);
    CHECK(flat.classes[1].p5 == 0.8);
    CHECK(flat.classes[1].p95 == 0.8);
}

TEST_CASE("percentile summary stays monotone on arbitrary posteriors") {
    std::mt19937_64 rng(4);
    std::gamma_distribution<double> gam(0.3, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::vector<double>> gammas(1 + trial % 37, std::vector<double>(4));
        for (auto& g : gammas) {
            double s = 0;
            for (auto& v : g) s += v = gam(rng) + 1e-12;
            for (auto& v : g) v /= s;
        }
        for (const auto& p : summarize_posteriors(gammas).classes)
            CHECK((p.p5 <= p.q1 && p.q1 <= p.median && p.median <= p.q3 && p.q3 <= p.p95));
    }
}

TEST_CASE("mccv") {
    const auto g = three_blobs(1.2);
    const auto d = to_dictionary(g.sample(240, 9));
    const auto one = mccv(Method::Logistic, {}, d, 1, 0.25, 7);
    CHECK(one.iterations.size() == 1);
    CHECK(one.iterations[0].confusion.total() == 60);
    CHECK(one.kappa.min == one.kappa.max);

    const auto a = mccv(Method::Logistic, {}, d, 12, 0.25, 7, 1);
    const auto b = mccv(Method::Logistic, {}, d, 12, 0.25, 7, 4);
    REQUIRE(a.iterations.size() == 12);
    for (std::size_t i = 0; i < 12; ++i) {
        CHECK(a.iterations[i].kappa == b.iterations[i].kappa);
        CHECK(a.iterations[i].confusion == b.iterations[i].confusion);
    }
    CHECK(mccv_json(a) == mccv_json(b));
    CHECK(a.kappa.min <= a.kappa.q1);
    CHECK(a.kappa.q1 <= a.kappa.median);
    CHECK(a.kappa.median <= a.kappa.q3);
    CHECK(a.kappa.q3 <= a.kappa.max);
    CHECK(a.kappa.median > 0.5);
    // different iterations see different splits
    bool differ = false;
    for (std::size_t i = 1; i < 12; ++i) differ |= !(a.iterations[i].confusion == a.iterations[0].confusion);
    CHECK(differ);
    CHECK_THROWS_AS(mccv(Method::Logistic, {}, d, 0, 0.25, 7), ValidationError);
}

TEST_CASE("mccv with separate test view scores the test view") {
    const auto g = three_blobs(0.3);
    const auto train_view = to_dictionary(g.sample(120, 1));
    // test view: same labels, features pushed into the class-1 blob
    Dictionary test_view = train_view;
    for (auto& s : test_view.samples) s.x = {0.0, 0.0};
    const auto r = mccv(Method::Logistic, {}, train_view, test_view, 3, 0.25, 2);
    for (const auto& it : r.iterations) CHECK(it.confusion.col_sum(1) == it.confusion.total());
    Dictionary short_view = train_view.subset({0, 1, 2});
    CHECK_THROWS_AS(mccv(Method::Logistic, {}, train_view, short_view, 1, 0.25, 2), DimensionMismatch);
}

TEST_CASE("mse against a reference posterior") {
    GaussianMixture g;
    g.means = {{-2.0}, {2.0}};
    g.stddev = 1.0;
    const auto pts = g.sample_points(40000, 17);
    const Posterior truth = [&](const std::vector<double>& x) { return g.posterior(x); };
    const auto exact = mse_vs_reference(truth, truth, pts);
    CHECK(exact.mse == 0.0);
    CHECK(exact.std_error == 0.0);

    // uniform guess: 2 E[(1/2 - p_1(x))^2], x from the mixture, by Simpson quadrature
    const Posterior uniform = [](const std::vector<double>&) { return std::vector<double>{0.5, 0.5}; };
    const int n = 4000;
    const double lo = -12, hi = 12, h = (hi - lo) / n;
    double q = 0;
    for (int i = 0; i <= n; ++i) {
        const double x = lo + i * h;
        const double dens = 0.5 * (std::exp(-0.5 * (x + 2) * (x + 2)) + std::exp(-0.5 * (x - 2) * (x - 2))) /
                            std::sqrt(2 * M_PI);
        const double p1 = 1.0 / (1.0 + std::exp(4.0 * x));  // class 1 sits at -2
        const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
        q += w * dens * 2.0 * (0.5 - p1) * (0.5 - p1);
    }
    q *= h / 3.0;
    const auto est = mse_vs_reference(uniform, truth, pts);
    CHECK(est.mse >= 0.0);
    CHECK(std::abs(est.mse - q) < 4.0 * est.std_error);
    CHECK(est.std_error < 0.01 * q);
}

TEST_CASE("gaussian mixture posterior") {
    const auto g = three_blobs();
    const auto p = g.posterior({0.0, 0.0});
    CHECK(p[0] > p[1]);
    CHECK(p[1] == doctest::Approx(p[2]).epsilon(1e-14));
    CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0).epsilon(1e-15));
    // equidistant point is uniform
    const auto mid = g.posterior({1.5, 1.5});
    CHECK(mid[1] == doctest::Approx(mid[2]).epsilon(1e-14));
    const auto s = g.sample(30, 1);
    CHECK(s.size() == 30);
    CHECK(std::count(s.y.begin(), s.y.end(), 2) == 10);
}

TEST_CASE("bias and variance") {
    const auto g = three_blobs(1.5);
    const auto problem = make_problem(g, 60);
    const auto grid = g.sample_points(200, 99);

    const Learner constant = [](const Dataset&, std::uint64_t) {
        return Posterior([](const std::vector<double>&) { return std::vector<double>{0.5, 0.3, 0.2}; });
    };
    const auto c = bias_variance(constant, problem, grid, 8, 1);
    CHECK(c.variance < 1e-30);
    CHECK(c.bias > 0.0);

    const Learner oracle = [&](const Dataset&, std::uint64_t) { return problem.truth; };
    const auto o = bias_variance(oracle, problem, grid, 4, 1);
    CHECK(o.bias == 0.0);
    CHECK(o.variance == 0.0);
    CHECK(o.learning_error == 0.0);

    Hyperparams hp;
    const auto a = bias_variance(Method::Logistic, hp, problem, grid, 16, 3, 1);
    const auto b = bias_variance(Method::Logistic, hp, problem, grid, 16, 3, 4);
    CHECK(a.bias == b.bias);
    CHECK(a.variance == b.variance);
    CHECK(a.variance > 0.0);
    CHECK(a.bias + a.variance == doctest::Approx(a.learning_error).epsilon(1e-10));
    CHECK(std::abs(a.bias + a.variance - a.learning_error) <= 3.0 * a.learning_error_se + 1e-12);
}

TEST_CASE("feature distribution report") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(3.0, 2.0);
    std::vector<double> v(10000);
    for (auto& x : v) x = n(rng);
    const auto r = feature_distribution_report(v, 30);
    CHECK_FALSE(r.zero_variance);
    // 4 standard errors of the sample moments at N = 1e4
    CHECK(std::abs(r.skewness) < 4.0 * std::sqrt(6.0 / 1e4));
    CHECK(std::abs(r.excess_kurtosis) < 4.0 * std::sqrt(24.0 / 1e4));
    double zm = 0, zs = 0;
    for (double z : r.z) zm += z;
    zm /= 1e4;
    for (double z : r.z) zs += (z - zm) * (z - zm);
    CHECK(std::abs(zm) < 1e-12);
    CHECK(std::sqrt(zs / (1e4 - 1)) == doctest::Approx(1.0).epsilon(1e-12));
    std::size_t total = 0;
    for (auto c : r.counts) total += c;
    CHECK(total == 10000);
    CHECK(r.edges.size() == 31);

    const auto flat = feature_distribution_report(std::vector<double>(40, 7.5));
    CHECK(flat.zero_variance);
    CHECK(flat.stddev == 0.0);
    CHECK_THROWS_AS(feature_distribution_report(std::vector<double>(29, 1.0)), ValidationError);

    const auto d = to_dictionary(three_blobs().sample(60, 1));
    CHECK(feature_distribution_report(d, 1).samples == 60);
    CHECK_THROWS_AS(feature_distribution_report(d, 2), ValidationError);
}

TEST_CASE("normalised confusion rows settle as the test set grows") {
    // fixed MAP classifier of the true posterior, fresh test sets per seed
    const auto g = three_blobs(1.5);
    double prev = 1e9;
    for (std::size_t size : {60, 600, 6000}) {
        std::vector<double> entry;
        for (std::uint64_t s = 0; s < 24; ++s) {
            const auto t = g.sample(size, derive_seed(s, 1));
            std::vector<int> pred;
            for (const auto& x : t.x) pred.push_back(argmax_class(g.posterior(x)));
            entry.push_back(confusion_matrix(t.y, pred, 3).row_normalized()[0][0]);
        }
        double m = 0, var = 0;
        for (double e : entry) m += e;
        m /= static_cast<double>(entry.size());
        for (double e : entry) var += (e - m) * (e - m);
        const double sd = std::sqrt(var / static_cast<double>(entry.size() - 1));
        CHECK(sd < prev);
        prev = sd;
    }
}

TEST_CASE("exports") {
    const auto c = matrix({{5, 1}, {2, 4}});
    CHECK(confusion_csv(c) == "true,pred_1,pred_2\n1,5,1\n2,2,4\n");
    const auto nc = normalized_confusion_csv(c);
    CHECK(nc.rfind("true,predicted,fraction\n1,1,0.8333333333333333", 0) == 0);
    const auto m = metrics_csv(class_metrics(matrix({{1, 0}, {1, 0}})));
    CHECK(m == "class,precision,sensitivity,specificity\n1,0.5,1,0\n2,nan,0,1\n");

    const auto d = to_dictionary(three_blobs().sample(90, 2));
    const auto r = mccv(Method::Tree, {}, d, 3, 0.25, 1);
    const auto j = nlohmann::json::parse(mccv_json(r));
    CHECK(j.at("iterations").size() == 3);
    CHECK(j.at("kappa").at("median").get<double>() == r.kappa.median);
    CHECK(kappa_csv(r).rfind("iteration,kappa\n1,", 0) == 0);
    const auto u = uncertainty_csv(summarize_posteriors({{0.1, 0.9}}, 2));
    CHECK(u == "true_class,class,p5,q1,median,q3,p95\n2,1,0.10000000000000001,0.10000000000000001,"
               "0.10000000000000001,0.10000000000000001,0.10000000000000001\n2,2,0.90000000000000002,"
               "0.90000000000000002,0.90000000000000002,0.90000000000000002,0.90000000000000002\n");
    const auto fj = nlohmann::json::parse(feature_report_json(feature_distribution_report(std::vector<double>(30, 1.0))));
    CHECK(fj.at("zero_variance").get<bool>());
}
