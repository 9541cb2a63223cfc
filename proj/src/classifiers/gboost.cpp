#include <cmath>

#include "internal.hpp"
#include "mpt/parallel.hpp"

namespace mpt::detail {

namespace {

double summed_logloss(const RowMatrix& a, const std::vector<int>& labels) {
    double loss = 0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        const double top = a.row(i).maxCoeff();
        const double lse = top + std::log((a.row(i).array() - top).exp().sum());
        loss += lse - a(i, labels[static_cast<std::size_t>(i)]);
    }
    return loss;
}

}  // namespace

// Multiclass gradient boosting from a_k = 0. Each stage fits one regression
// tree per class to the residuals t_k - gamma_k, replaces the leaf means by
// the one-step Newton value (K-1)/K sum r / sum |r|(1-|r|), and takes a
// learning-rate step. The step is halved while it would raise the training
// loss, so the recorded loss never increases.
GBoostParams fit_gboost(const RowMatrix& z, const std::vector<int>& labels, int k, const GBoostOptions& o, int threads,
                        TrainingInfo& info) {
    const Eigen::Index n = z.rows();
    const auto kk = static_cast<std::size_t>(k);
    const Presorted sorted = Presorted::build(z);
    const TreeGrowth growth{o.max_depth, 2, o.min_samples_leaf, 0};

    RowMatrix a = RowMatrix::Zero(n, k);
    RowMatrix prob(n, k);
    RowMatrix update(n, k);
    double loss = summed_logloss(a, labels);
    info.loss_history = {loss};

    GBoostParams p;
    for (int m = 0; m < o.n_estimators; ++m) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double top = a.row(i).maxCoeff();
            prob.row(i) = (a.row(i).array() - top).exp();
            prob.row(i) /= prob.row(i).sum();
        }
        std::vector<DecisionTree> stage(kk);
        parallel_for(kk, threads, [&](std::size_t c) {
            std::vector<double> r(static_cast<std::size_t>(n));
            for (Eigen::Index i = 0; i < n; ++i)
                r[static_cast<std::size_t>(i)] = (labels[static_cast<std::size_t>(i)] == static_cast<int>(c) ? 1.0 : 0.0) -
                                                 prob(i, static_cast<Eigen::Index>(c));
            DecisionTree tree = grow_regression_tree(z, r, sorted, growth);
            std::vector<double> num(tree.nodes.size(), 0.0), den(tree.nodes.size(), 0.0);
            std::vector<int> leaf_of(static_cast<std::size_t>(n));
            for (Eigen::Index i = 0; i < n; ++i) {
                const int leaf = leaf_index(tree, z.row(i).data());
                leaf_of[static_cast<std::size_t>(i)] = leaf;
                const double ri = r[static_cast<std::size_t>(i)];
                num[static_cast<std::size_t>(leaf)] += ri;
                den[static_cast<std::size_t>(leaf)] += std::abs(ri) * (1.0 - std::abs(ri));
            }
            for (std::size_t j = 0; j < tree.nodes.size(); ++j) {
                if (tree.nodes[j].feature >= 0) continue;
                tree.nodes[j].value = {den[j] < 1e-150 ? 0.0 : (k - 1.0) / k * num[j] / den[j]};
            }
            for (Eigen::Index i = 0; i < n; ++i)
                update(i, static_cast<Eigen::Index>(c)) =
                    tree.nodes[static_cast<std::size_t>(leaf_of[static_cast<std::size_t>(i)])].value[0];
            stage[c] = std::move(tree);
        });

        double step = o.learning_rate;
        double next = summed_logloss(a + step * update, labels);
        for (int halvings = 0; next > loss && halvings < 30; ++halvings) {
            step *= 0.5;
            next = summed_logloss(a + step * update, labels);
        }
        if (next > loss) {
            step = 0.0;
            next = loss;
        }
        a += step * update;
        loss = next;
        info.loss_history.push_back(loss);
        p.stages.push_back(std::move(stage));
        p.steps.push_back(step);
    }
    info.iterations = o.n_estimators;
    info.final_loss = loss;
    info.converged = true;
    return p;
}

}  // namespace mpt::detail
