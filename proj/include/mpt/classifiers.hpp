#pragma once
// Six classifiers behind one interface. Every model z-scores its inputs with
// statistics frozen from the training data, returns a length-K probability
// (or vote-frequency) vector and decides by the largest entry.

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "mpt/dictionary.hpp"

namespace mpt {

enum class Method { Logistic, Tree, Forest, GBoost, Svm, Mlp };

std::string to_string(Method m);
Method method_from_string(const std::string& s);
const std::vector<Method>& all_methods();
// SVM outputs vote frequencies, not posteriors.
inline bool is_probabilistic(Method m) { return m != Method::Svm; }

enum class Activation { Sigmoid, Softmax };

struct LogisticOptions {
    double l2 = 1.0;  // penalty 0.5 * l2 * |W|^2 added to the summed logloss
    int max_iter = 500;
    bool generative = false;  // shared-covariance Gaussian fit instead of the optimiser
};

struct TreeOptions {
    int max_depth = 0;  // 0 = grow until pure
    int min_samples_split = 2;
    int min_samples_leaf = 1;
    double ccp_alpha = 0.0;  // cost-complexity pruning strength, 0 = off
};

struct ForestOptions {
    int n_trees = 100;
    int max_features = 0;  // 0 = floor(sqrt(F))
    bool bootstrap = true;
    TreeOptions tree;
};

struct GBoostOptions {
    int n_estimators = 100;
    double learning_rate = 0.1;
    int max_depth = 3;
    int min_samples_leaf = 1;
};

struct SvmOptions {
    double c = 1.0;
    double gamma = 0.0;  // 0 = 1 / (F * variance of the normalised training data)
    double tol = 1e-3;
};

struct MlpOptions {
    std::vector<int> hidden = {50, 50, 50};
    Activation activation = Activation::Sigmoid;
    double learning_rate = 1e-3;
    int batch_size = 200;
    int max_epochs = 300;
    double tol = 1e-4;
    int n_iter_no_change = 10;
    double l2 = 1e-4;
};

struct Hyperparams {
    LogisticOptions logistic;
    TreeOptions tree;
    ForestOptions forest;
    GBoostOptions gboost;
    SvmOptions svm;
    MlpOptions mlp;
    int threads = 1;
};

struct Dataset {
    std::vector<std::vector<double>> x;
    std::vector<int> y;  // 1-based class ids
    int num_classes = 0;

    std::size_t size() const { return x.size(); }
    int num_features() const { return x.empty() ? 0 : static_cast<int>(x.front().size()); }
};

Dataset to_dataset(const Dictionary& d);

struct Normalizer {
    std::vector<double> mean;
    std::vector<double> scale;  // 1 for constant features

    static Normalizer fit(const std::vector<std::vector<double>>& x);
    std::vector<double> apply(const std::vector<double>& x) const;
};

// Parameters, in normalised feature space.

struct LogisticParams {
    // Scores a_k = w_k . z + b_k for k < K, a_K = 0.
    std::vector<std::vector<double>> weights;  // (K-1) x F
    std::vector<double> intercepts;            // K-1
    // Generative fit only (empty otherwise).
    std::vector<std::vector<double>> means;    // K x F
    std::vector<std::vector<double>> covariance;
    std::vector<double> priors;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;  // z[feature] <= threshold goes left
    int left = -1, right = -1;
    std::vector<double> value;  // class proportions, or a single regression value
    double weight = 0.0;        // training weight reaching the node
    double impurity = 0.0;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;

    const std::vector<double>& leaf_value(const double* z) const;
    int depth() const;
    int leaf_count() const;
};

struct TreeParams {
    DecisionTree tree;
};

struct ForestParams {
    std::vector<DecisionTree> trees;
    int max_features = 0;
};

struct GBoostParams {
    // stages[m][k]: regression tree for class k at iteration m.
    std::vector<std::vector<DecisionTree>> stages;
    std::vector<double> steps;  // effective step of each stage (learning rate after backtracking)
};

struct BinarySvm {
    int class_a = 0, class_b = 0;  // 1-based; positive decision votes for class_a
    std::vector<std::vector<double>> support_vectors;
    std::vector<double> dual_coef;  // alpha_i y_i
    double rho = 0.0;               // decision = sum coef K(sv, z) - rho
    bool converged = true;
};

struct SvmParams {
    std::vector<BinarySvm> machines;  // K(K-1)/2, ordered (1,2), (1,3), ..., (K-1,K)
    double gamma = 0.0;
    double c = 1.0;
};

struct MlpParams {
    std::vector<int> widths;  // F, hidden..., K
    Activation activation = Activation::Sigmoid;
    // Layer l maps widths[l] -> widths[l+1]: weights row-major (out x in), then biases.
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    std::size_t parameter_count() const;
    std::vector<double> flatten() const;
    void unflatten(const std::vector<double>& flat);
};

// J^2 (L-1) + J (F + L + K) + K for L hidden layers of width J.
std::size_t mlp_parameter_count(int f, int j, int l, int k);

struct TrainingInfo {
    bool converged = true;
    int iterations = 0;
    double final_loss = 0.0;
    std::vector<double> loss_history;
};

class ClassifierModel {
public:
    using Params = std::variant<LogisticParams, TreeParams, ForestParams, GBoostParams, SvmParams, MlpParams>;

    ClassifierModel() = default;
    ClassifierModel(Method method, int num_classes, int num_features, Normalizer norm, Params params,
                    Hyperparams hyper = {}, TrainingInfo info = {});

    Method method() const { return method_; }
    int num_classes() const { return k_; }
    int num_features() const { return f_; }
    const Normalizer& normalizer() const { return norm_; }
    const Params& params() const { return params_; }
    const Hyperparams& hyperparams() const { return hyper_; }
    const TrainingInfo& info() const { return info_; }

    // Throws DimensionMismatch when x.size() != F.
    std::vector<double> predict_proba(const std::vector<double>& x) const;
    // 1-based argmax of predict_proba; ties go to the lowest class.
    int predict(const std::vector<double>& x) const;
    // Raw softmax scores for logistic / gboost / mlp (empty for the others).
    std::vector<double> scores(const std::vector<double>& x) const;

    std::string to_json() const;
    static ClassifierModel from_json(const std::string& text);

private:
    std::vector<double> proba_normalized(const std::vector<double>& z) const;

    Method method_ = Method::Logistic;
    int k_ = 0, f_ = 0;
    Normalizer norm_;
    Params params_;
    Hyperparams hyper_;
    TrainingInfo info_;
};

// Throws MissingClass when a class in 1..K has no samples, SingularCovariance
// for a degenerate generative fit. Non-convergence is reported through
// info().converged.
ClassifierModel train(Method method, const Hyperparams& hp, const Dataset& data, std::uint64_t seed);
ClassifierModel train(Method method, const Hyperparams& hp, const Dictionary& d, std::uint64_t seed);

// 1-based index of the largest entry, lowest index on ties.
int argmax_class(const std::vector<double>& gamma);

// Numerically safe softmax.
std::vector<double> softmax(const std::vector<double>& a);

// Gradient of the summed logloss -sum_n sum_k t_nk ln y_k(x_n) with respect
// to every parameter, in MlpParams::flatten order. Inputs are already in the
// network's (normalised) feature space.
std::vector<double> mlp_gradient(const MlpParams& p, const std::vector<std::vector<double>>& x,
                                 const std::vector<int>& labels);
double mlp_loss(const MlpParams& p, const std::vector<std::vector<double>>& x, const std::vector<int>& labels);
std::vector<double> mlp_forward(const MlpParams& p, const std::vector<double>& z);

// The "hyperparams" object of the model JSON format.
std::string hyperparams_json(const Hyperparams& hp);

// Summed multiclass logloss of a model on a dataset (raw features).
double logloss(const ClassifierModel& model, const Dataset& data);

}  // namespace mpt
