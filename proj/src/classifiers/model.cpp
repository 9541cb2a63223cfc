#include <algorithm>
#include <cmath>

#include "internal.hpp"
#include "mpt/errors.hpp"
#include "mpt/parallel.hpp"

namespace mpt {

std::string to_string(Method m) {
    switch (m) {
        case Method::Logistic: return "logistic";
        case Method::Tree: return "tree";
        case Method::Forest: return "forest";
        case Method::GBoost: return "gboost";
        case Method::Svm: return "svm";
        case Method::Mlp: return "mlp";
    }
    return "unknown";
}

Method method_from_string(const std::string& s) {
    for (Method m : all_methods())
        if (to_string(m) == s) return m;
    throw ValidationError("unknown method '" + s + "' (expected logistic, tree, forest, gboost, svm or mlp)");
}

const std::vector<Method>& all_methods() {
    static const std::vector<Method> all = {Method::Logistic, Method::Tree, Method::Forest,
                                            Method::GBoost,   Method::Svm,  Method::Mlp};
    return all;
}

Dataset to_dataset(const Dictionary& d) {
    Dataset out;
    out.num_classes = d.num_classes();
    out.x.reserve(d.size());
    out.y.reserve(d.size());
    for (const auto& s : d.samples) {
        out.x.push_back(s.x);
        out.y.push_back(s.class_id());
    }
    return out;
}

Normalizer Normalizer::fit(const std::vector<std::vector<double>>& x) {
    Normalizer n;
    if (x.empty()) return n;
    const std::size_t f = x.front().size();
    n.mean.assign(f, 0.0);
    n.scale.assign(f, 0.0);
    for (const auto& row : x)
        for (std::size_t j = 0; j < f; ++j) n.mean[j] += row[j];
    for (auto& m : n.mean) m /= static_cast<double>(x.size());
    for (const auto& row : x)
        for (std::size_t j = 0; j < f; ++j) n.scale[j] += (row[j] - n.mean[j]) * (row[j] - n.mean[j]);
    for (auto& s : n.scale) {
        s = std::sqrt(s / static_cast<double>(x.size()));
        if (!(s > 0.0)) s = 1.0;
    }
    return n;
}

std::vector<double> Normalizer::apply(const std::vector<double>& x) const {
    std::vector<double> z(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) z[j] = (x[j] - mean[j]) / scale[j];
    return z;
}

std::vector<double> softmax(const std::vector<double>& a) {
    const double top = *std::max_element(a.begin(), a.end());
    std::vector<double> p(a.size());
    double sum = 0;
    for (std::size_t k = 0; k < a.size(); ++k) sum += p[k] = std::exp(a[k] - top);
    for (auto& v : p) v /= sum;
    return p;
}

int argmax_class(const std::vector<double>& gamma) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < gamma.size(); ++k)
        if (gamma[k] > gamma[best]) best = k;
    return static_cast<int>(best) + 1;
}

const std::vector<double>& DecisionTree::leaf_value(const double* z) const {
    return nodes[static_cast<std::size_t>(detail::leaf_index(*this, z))].value;
}

int DecisionTree::depth() const {
    // nodes are stored parent-before-child
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        best = std::max(best, d[i]);
        if (nodes[i].feature >= 0) {
            d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
        }
    }
    return best;
}

int DecisionTree::leaf_count() const {
    return static_cast<int>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

ClassifierModel::ClassifierModel(Method method, int num_classes, int num_features, Normalizer norm, Params params,
                                 Hyperparams hyper, TrainingInfo info)
    : method_(method), k_(num_classes), f_(num_features), norm_(std::move(norm)), params_(std::move(params)),
      hyper_(std::move(hyper)), info_(std::move(info)) {}

std::vector<double> ClassifierModel::scores(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != f_)
        throw DimensionMismatch("expected " + std::to_string(f_) + " features, got " + std::to_string(x.size()));
    const auto z = norm_.apply(x);
    const auto k = static_cast<std::size_t>(k_);
    if (const auto* p = std::get_if<LogisticParams>(&params_)) {
        std::vector<double> a(k, 0.0);
        for (std::size_t c = 0; c + 1 < k; ++c) {
            double s = p->intercepts[c];
            for (std::size_t j = 0; j < z.size(); ++j) s += p->weights[c][j] * z[j];
            a[c] = s;
        }
        return a;
    }
    if (const auto* p = std::get_if<GBoostParams>(&params_)) {
        std::vector<double> a(k, 0.0);
        for (std::size_t m = 0; m < p->stages.size(); ++m)
            for (std::size_t c = 0; c < k; ++c) a[c] += p->steps[m] * p->stages[m][c].leaf_value(z.data())[0];
        return a;
    }
    return {};
}

std::vector<double> ClassifierModel::proba_normalized(const std::vector<double>& z) const {
    const auto k = static_cast<std::size_t>(k_);
    switch (method_) {
        case Method::Tree: return std::get<TreeParams>(params_).tree.leaf_value(z.data());
        case Method::Forest: {
            const auto& p = std::get<ForestParams>(params_);
            std::vector<double> g(k, 0.0);
            for (const auto& t : p.trees) {
                const auto& v = t.leaf_value(z.data());
                for (std::size_t c = 0; c < k; ++c) g[c] += v[c];
            }
            for (auto& v : g) v /= static_cast<double>(p.trees.size());
            return g;
        }
        case Method::Svm: return detail::svm_votes(std::get<SvmParams>(params_), k_, z);
        case Method::Mlp: return mlp_forward(std::get<MlpParams>(params_), z);
        default: return {};
    }
}

std::vector<double> ClassifierModel::predict_proba(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != f_)
        throw DimensionMismatch("expected " + std::to_string(f_) + " features, got " + std::to_string(x.size()));
    if (method_ == Method::Logistic || method_ == Method::GBoost) return softmax(scores(x));
    return proba_normalized(norm_.apply(x));
}

int ClassifierModel::predict(const std::vector<double>& x) const { return argmax_class(predict_proba(x)); }

namespace detail {

RowMatrix normalized_matrix(const Dataset& data, const Normalizer& norm) {
    const auto n = static_cast<Eigen::Index>(data.size());
    const auto f = static_cast<Eigen::Index>(data.num_features());
    RowMatrix z(n, f);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = data.x[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < f; ++j)
            z(i, j) = (row[static_cast<std::size_t>(j)] - norm.mean[static_cast<std::size_t>(j)]) /
                      norm.scale[static_cast<std::size_t>(j)];
    }
    return z;
}

}  // namespace detail

namespace {

void check_dataset(const Dataset& data) {
    if (data.size() == 0) throw ValidationError("training data is empty");
    if (data.num_classes < 2) throw ValidationError("at least two classes are required");
    if (data.y.size() != data.x.size()) throw ValidationError("one label per sample is required");
    const std::size_t f = data.x.front().size();
    if (f == 0) throw ValidationError("samples have no features");
    std::vector<int> seen(static_cast<std::size_t>(data.num_classes), 0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data.x[i].size() != f) throw DimensionMismatch("samples disagree on feature length");
        if (data.y[i] < 1 || data.y[i] > data.num_classes)
            throw ValidationError("label " + std::to_string(data.y[i]) + " outside 1.." + std::to_string(data.num_classes));
        for (double v : data.x[i])
            if (!std::isfinite(v)) throw ValidationError("training features must be finite");
        ++seen[static_cast<std::size_t>(data.y[i] - 1)];
    }
    for (std::size_t k = 0; k < seen.size(); ++k)
        if (seen[k] == 0) throw MissingClass("class " + std::to_string(k + 1) + " has no training samples");
}

}  // namespace

ClassifierModel train(Method method, const Hyperparams& hp, const Dataset& data, std::uint64_t seed) {
    check_dataset(data);
    const int k = data.num_classes;
    const int f = data.num_features();
    Normalizer norm = Normalizer::fit(data.x);
    const detail::RowMatrix z = detail::normalized_matrix(data, norm);
    std::vector<int> labels(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) labels[i] = data.y[i] - 1;

    TrainingInfo info;
    ClassifierModel::Params params;
    switch (method) {
        case Method::Logistic:
            params = hp.logistic.generative ? detail::fit_logistic_generative(z, labels, k)
                                            : detail::fit_logistic(z, labels, k, hp.logistic, info);
            break;
        case Method::Tree: {
            const auto sorted = detail::Presorted::build(z);
            const std::vector<double> w(data.size(), 1.0);
            detail::TreeGrowth g{hp.tree.max_depth, hp.tree.min_samples_split, hp.tree.min_samples_leaf, 0};
            TreeParams p{detail::grow_classification_tree(z, labels, k, w, sorted, g, nullptr)};
            if (hp.tree.ccp_alpha > 0.0) detail::prune_cost_complexity(p.tree, hp.tree.ccp_alpha);
            params = std::move(p);
            break;
        }
        case Method::Forest: {
            const auto& o = hp.forest;
            if (o.n_trees < 1) throw ValidationError("forest needs at least one tree");
            ForestParams p;
            p.max_features = o.max_features > 0 ? std::min(o.max_features, f)
                                                : std::max(1, static_cast<int>(std::floor(std::sqrt(f))));
            p.trees.resize(static_cast<std::size_t>(o.n_trees));
            const auto sorted = detail::Presorted::build(z);
            detail::TreeGrowth g{o.tree.max_depth, o.tree.min_samples_split, o.tree.min_samples_leaf, p.max_features};
            parallel_for(p.trees.size(), hp.threads, [&](std::size_t t) {
                Rng rng(derive_seed(seed, stream::kModel, t));
                std::vector<double> w(data.size(), o.bootstrap ? 0.0 : 1.0);
                if (o.bootstrap) {
                    std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
                    for (std::size_t i = 0; i < data.size(); ++i) w[pick(rng)] += 1.0;
                }
                p.trees[t] = detail::grow_classification_tree(z, labels, k, w, sorted, g, &rng);
                if (o.tree.ccp_alpha > 0.0) detail::prune_cost_complexity(p.trees[t], o.tree.ccp_alpha);
            });
            params = std::move(p);
            break;
        }
        case Method::GBoost: params = detail::fit_gboost(z, labels, k, hp.gboost, hp.threads, info); break;
        case Method::Svm: params = detail::fit_svm(z, labels, k, hp.svm, hp.threads, info); break;
        case Method::Mlp: params = detail::fit_mlp(z, labels, k, hp.mlp, derive_seed(seed, stream::kModel), info); break;
    }
    return ClassifierModel(method, k, f, std::move(norm), std::move(params), hp, std::move(info));
}

ClassifierModel train(Method method, const Hyperparams& hp, const Dictionary& d, std::uint64_t seed) {
    return train(method, hp, to_dataset(d), seed);
}

double logloss(const ClassifierModel& model, const Dataset& data) {
    double loss = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto p = model.predict_proba(data.x[i]);
        loss -= std::log(std::max(p[static_cast<std::size_t>(data.y[i] - 1)], 1e-300));
    }
    return loss;
}

}  // namespace mpt
