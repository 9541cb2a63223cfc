#include "json.hpp"
#include "mpt/classifiers.hpp"
#include "mpt/errors.hpp"

namespace mpt {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

std::string to_string(Activation a) { return a == Activation::Sigmoid ? "sigmoid" : "softmax"; }

Activation activation_from_string(const std::string& s) {
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "softmax") return Activation::Softmax;
    throw ParseError("unknown activation '" + s + "'");
}

json tree_options_json(const TreeOptions& t) {
    return {{"max_depth", t.max_depth},
            {"min_samples_split", t.min_samples_split},
            {"min_samples_leaf", t.min_samples_leaf},
            {"ccp_alpha", t.ccp_alpha}};
}

TreeOptions tree_options_from(const json& j) {
    TreeOptions t;
    t.max_depth = j.at("max_depth");
    t.min_samples_split = j.at("min_samples_split");
    t.min_samples_leaf = j.at("min_samples_leaf");
    t.ccp_alpha = j.at("ccp_alpha");
    return t;
}

json hyper_json(const Hyperparams& h) {
    return {{"logistic", {{"l2", h.logistic.l2}, {"max_iter", h.logistic.max_iter}, {"generative", h.logistic.generative}}},
            {"tree", tree_options_json(h.tree)},
            {"forest",
             {{"n_trees", h.forest.n_trees},
              {"max_features", h.forest.max_features},
              {"bootstrap", h.forest.bootstrap},
              {"tree", tree_options_json(h.forest.tree)}}},
            {"gboost",
             {{"n_estimators", h.gboost.n_estimators},
              {"learning_rate", h.gboost.learning_rate},
              {"max_depth", h.gboost.max_depth},
              {"min_samples_leaf", h.gboost.min_samples_leaf}}},
            {"svm", {{"c", h.svm.c}, {"gamma", h.svm.gamma}, {"tol", h.svm.tol}}},
            {"mlp",
             {{"hidden", h.mlp.hidden},
              {"activation", to_string(h.mlp.activation)},
              {"learning_rate", h.mlp.learning_rate},
              {"batch_size", h.mlp.batch_size},
              {"max_epochs", h.mlp.max_epochs},
              {"tol", h.mlp.tol},
              {"n_iter_no_change", h.mlp.n_iter_no_change},
              {"l2", h.mlp.l2}}}};
}

Hyperparams hyper_from(const json& j) {
    Hyperparams h;
    const auto& lg = j.at("logistic");
    h.logistic.l2 = lg.at("l2");
    h.logistic.max_iter = lg.at("max_iter");
    h.logistic.generative = lg.at("generative");
    h.tree = tree_options_from(j.at("tree"));
    const auto& fo = j.at("forest");
    h.forest.n_trees = fo.at("n_trees");
    h.forest.max_features = fo.at("max_features");
    h.forest.bootstrap = fo.at("bootstrap");
    h.forest.tree = tree_options_from(fo.at("tree"));
    const auto& gb = j.at("gboost");
    h.gboost.n_estimators = gb.at("n_estimators");
    h.gboost.learning_rate = gb.at("learning_rate");
    h.gboost.max_depth = gb.at("max_depth");
    h.gboost.min_samples_leaf = gb.at("min_samples_leaf");
    const auto& sv = j.at("svm");
    h.svm.c = sv.at("c");
    h.svm.gamma = sv.at("gamma");
    h.svm.tol = sv.at("tol");
    const auto& ml = j.at("mlp");
    h.mlp.hidden = ml.at("hidden").get<std::vector<int>>();
    h.mlp.activation = activation_from_string(ml.at("activation"));
    h.mlp.learning_rate = ml.at("learning_rate");
    h.mlp.batch_size = ml.at("batch_size");
    h.mlp.max_epochs = ml.at("max_epochs");
    h.mlp.tol = ml.at("tol");
    h.mlp.n_iter_no_change = ml.at("n_iter_no_change");
    h.mlp.l2 = ml.at("l2");
    // worker count is a run setting, not part of the model
    h.threads = j.value("threads", 1);
    return h;
}

// Trees as parallel arrays; compact and easy to diff.
json tree_json(const DecisionTree& t) {
    json feature = json::array(), threshold = json::array(), left = json::array(), right = json::array(),
         value = json::array(), weight = json::array(), impurity = json::array();
    for (const auto& n : t.nodes) {
        feature.push_back(n.feature);
        threshold.push_back(n.threshold);
        left.push_back(n.left);
        right.push_back(n.right);
        value.push_back(n.value);
        weight.push_back(n.weight);
        impurity.push_back(n.impurity);
    }
    return {{"feature", feature}, {"threshold", threshold}, {"left", left},        {"right", right},
            {"value", value},     {"weight", weight},       {"impurity", impurity}};
}

DecisionTree tree_from(const json& j) {
    DecisionTree t;
    const auto& feature = j.at("feature");
    t.nodes.resize(feature.size());
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
        auto& n = t.nodes[i];
        n.feature = feature.at(i);
        n.threshold = j.at("threshold").at(i);
        n.left = j.at("left").at(i);
        n.right = j.at("right").at(i);
        n.value = j.at("value").at(i).get<std::vector<double>>();
        n.weight = j.at("weight").at(i);
        n.impurity = j.at("impurity").at(i);
    }
    const auto size = static_cast<int>(t.nodes.size());
    for (int i = 0; i < size; ++i) {
        const auto& n = t.nodes[static_cast<std::size_t>(i)];
        if (n.feature >= 0 && (n.left <= i || n.right <= i || n.left >= size || n.right >= size))
            throw ParseError("tree node " + std::to_string(i) + " has invalid children");
    }
    return t;
}

json params_json(const ClassifierModel::Params& params) {
    return std::visit(
        [](const auto& p) -> json {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, LogisticParams>) {
                return {{"weights", p.weights},
                        {"intercepts", p.intercepts},
                        {"means", p.means},
                        {"covariance", p.covariance},
                        {"priors", p.priors}};
            } else if constexpr (std::is_same_v<T, TreeParams>) {
                return {{"tree", tree_json(p.tree)}};
            } else if constexpr (std::is_same_v<T, ForestParams>) {
                json trees = json::array();
                for (const auto& t : p.trees) trees.push_back(tree_json(t));
                return {{"max_features", p.max_features}, {"trees", trees}};
            } else if constexpr (std::is_same_v<T, GBoostParams>) {
                json stages = json::array();
                for (const auto& s : p.stages) {
                    json stage = json::array();
                    for (const auto& t : s) stage.push_back(tree_json(t));
                    stages.push_back(stage);
                }
                return {{"steps", p.steps}, {"stages", stages}};
            } else if constexpr (std::is_same_v<T, SvmParams>) {
                json machines = json::array();
                for (const auto& m : p.machines)
                    machines.push_back({{"class_a", m.class_a},
                                        {"class_b", m.class_b},
                                        {"rho", m.rho},
                                        {"converged", m.converged},
                                        {"dual_coef", m.dual_coef},
                                        {"support_vectors", m.support_vectors}});
                return {{"gamma", p.gamma}, {"c", p.c}, {"machines", machines}};
            } else {
                return {{"widths", p.widths},
                        {"activation", to_string(p.activation)},
                        {"weights", p.weights},
                        {"biases", p.biases}};
            }
        },
        params);
}

ClassifierModel::Params params_from(Method method, const json& j) {
    switch (method) {
        case Method::Logistic: {
            LogisticParams p;
            p.weights = j.at("weights").get<std::vector<std::vector<double>>>();
            p.intercepts = j.at("intercepts").get<std::vector<double>>();
            p.means = j.at("means").get<std::vector<std::vector<double>>>();
            p.covariance = j.at("covariance").get<std::vector<std::vector<double>>>();
            p.priors = j.at("priors").get<std::vector<double>>();
            return p;
        }
        case Method::Tree: return TreeParams{tree_from(j.at("tree"))};
        case Method::Forest: {
            ForestParams p;
            p.max_features = j.at("max_features");
            for (const auto& t : j.at("trees")) p.trees.push_back(tree_from(t));
            return p;
        }
        case Method::GBoost: {
            GBoostParams p;
            p.steps = j.at("steps").get<std::vector<double>>();
            for (const auto& s : j.at("stages")) {
                std::vector<DecisionTree> stage;
                for (const auto& t : s) stage.push_back(tree_from(t));
                p.stages.push_back(std::move(stage));
            }
            if (p.steps.size() != p.stages.size()) throw ParseError("gboost steps and stages disagree");
            return p;
        }
        case Method::Svm: {
            SvmParams p;
            p.gamma = j.at("gamma");
            p.c = j.at("c");
            for (const auto& m : j.at("machines")) {
                BinarySvm b;
                b.class_a = m.at("class_a");
                b.class_b = m.at("class_b");
                b.rho = m.at("rho");
                b.converged = m.at("converged");
                b.dual_coef = m.at("dual_coef").get<std::vector<double>>();
                b.support_vectors = m.at("support_vectors").get<std::vector<std::vector<double>>>();
                p.machines.push_back(std::move(b));
            }
            return p;
        }
        case Method::Mlp: {
            MlpParams p;
            p.widths = j.at("widths").get<std::vector<int>>();
            p.activation = activation_from_string(j.at("activation"));
            p.weights = j.at("weights").get<std::vector<std::vector<double>>>();
            p.biases = j.at("biases").get<std::vector<std::vector<double>>>();
            if (p.weights.size() + 1 != p.widths.size() || p.biases.size() != p.weights.size())
                throw ParseError("mlp layer arrays disagree with widths");
            for (std::size_t l = 0; l < p.weights.size(); ++l)
                if (p.weights[l].size() != static_cast<std::size_t>(p.widths[l]) * static_cast<std::size_t>(p.widths[l + 1]) ||
                    p.biases[l].size() != static_cast<std::size_t>(p.widths[l + 1]))
                    throw ParseError("mlp layer " + std::to_string(l) + " has the wrong shape");
            return p;
        }
    }
    throw ParseError("unknown method");
}

}  // namespace

std::string hyperparams_json(const Hyperparams& hp) { return hyper_json(hp).dump(1); }

std::string ClassifierModel::to_json() const {
    json j;
    j["format_version"] = kFormatVersion;
    j["method"] = mpt::to_string(method_);
    j["num_classes"] = k_;
    j["num_features"] = f_;
    j["hyperparams"] = hyper_json(hyper_);
    j["normalization"] = {{"mean", norm_.mean}, {"scale", norm_.scale}};
    j["params"] = params_json(params_);
    j["training"] = {{"converged", info_.converged},
                     {"iterations", info_.iterations},
                     {"final_loss", info_.final_loss},
                     {"loss_history", info_.loss_history}};
    return j.dump(1);
}

ClassifierModel ClassifierModel::from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        const int version = j.at("format_version");
        if (version != kFormatVersion) throw ParseError("unsupported model format version " + std::to_string(version));
        const Method method = method_from_string(j.at("method"));
        Normalizer norm;
        norm.mean = j.at("normalization").at("mean").get<std::vector<double>>();
        norm.scale = j.at("normalization").at("scale").get<std::vector<double>>();
        const int f = j.at("num_features");
        if (norm.mean.size() != static_cast<std::size_t>(f) || norm.scale.size() != static_cast<std::size_t>(f))
            throw ParseError("normalisation statistics do not match the feature count");
        TrainingInfo info;
        const auto& tr = j.at("training");
        info.converged = tr.at("converged");
        info.iterations = tr.at("iterations");
        info.final_loss = tr.at("final_loss").is_null() ? 0.0 : tr.at("final_loss").get<double>();
        info.loss_history = tr.at("loss_history").get<std::vector<double>>();
        return ClassifierModel(method, j.at("num_classes"), f, std::move(norm), params_from(method, j.at("params")),
                               hyper_from(j.at("hyperparams")), std::move(info));
    } catch (const json::exception& ex) {
        throw ParseError(std::string("malformed model JSON: ") + ex.what());
    }
}

}  // namespace mpt
