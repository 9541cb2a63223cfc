#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mpt/classifiers.hpp"
#include "mpt/rng.hpp"

namespace mpt::detail {

// Samples in rows.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

RowMatrix normalized_matrix(const Dataset& data, const Normalizer& norm);

// Per-feature sample order, sorted by value (stable, ties by index). Shared
// by every tree grown on the same normalised data.
struct Presorted {
    std::vector<std::vector<int>> order;
    static Presorted build(const RowMatrix& z);
};

struct TreeGrowth {
    int max_depth = 0;  // 0 = unlimited
    int min_samples_split = 2;
    int min_samples_leaf = 1;
    int max_features = 0;  // 0 = all features at every node
};

// Gini CART. labels are 0-based; weight 0 excludes a sample (bootstrap).
// rng is required when max_features limits the candidate set.
DecisionTree grow_classification_tree(const RowMatrix& z, const std::vector<int>& labels, int num_classes,
                                      const std::vector<double>& weights, const Presorted& sorted,
                                      const TreeGrowth& g, Rng* rng);

// Least-squares regression tree with the Friedman improvement criterion. Leaf
// values are the target means; callers may overwrite them.
DecisionTree grow_regression_tree(const RowMatrix& z, const std::vector<double>& target, const Presorted& sorted,
                                  const TreeGrowth& g);

int leaf_index(const DecisionTree& tree, const double* z);

// Minimal cost-complexity pruning: collapse weakest links while their
// effective alpha is <= alpha.
void prune_cost_complexity(DecisionTree& tree, double alpha);

LogisticParams fit_logistic(const RowMatrix& z, const std::vector<int>& labels, int k, const LogisticOptions& o,
                            TrainingInfo& info);
LogisticParams fit_logistic_generative(const RowMatrix& z, const std::vector<int>& labels, int k);

GBoostParams fit_gboost(const RowMatrix& z, const std::vector<int>& labels, int k, const GBoostOptions& o, int threads,
                        TrainingInfo& info);

SvmParams fit_svm(const RowMatrix& z, const std::vector<int>& labels, int k, const SvmOptions& o, int threads,
                  TrainingInfo& info);
std::vector<double> svm_votes(const SvmParams& p, int k, const std::vector<double>& z);

MlpParams fit_mlp(const RowMatrix& z, const std::vector<int>& labels, int k, const MlpOptions& o, std::uint64_t seed,
                  TrainingInfo& info);

}  // namespace mpt::detail
