#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mpt/errors.hpp"
#include "mpt/experiment.hpp"

namespace mpt {

namespace fs = std::filesystem;

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<double> FrequencyBand::grid() const { return grid(count); }

std::vector<double> FrequencyBand::grid(int n) const {
    if (n < 1) throw ConfigError("frequency count must be at least 1");
    if (!(min_radps > 0.0) || !(max_radps >= min_radps)) throw ConfigError("frequency band needs 0 < min <= max");
    if (n == 1) return {min_radps};
    return log_spacing ? log_grid(min_radps, max_radps, static_cast<std::size_t>(n))
                       : linear_grid(min_radps, max_radps, static_cast<std::size_t>(n));
}

namespace {

std::string hex(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

nlohmann::json snr_json(double v) { return std::isinf(v) ? nlohmann::json("inf") : nlohmann::json(v); }

const std::set<std::string> kAxisOptions = {
    "frequency_count",   "snr_db",           "train_snr_db",       "test_snr_db",     "instances_per_class",
    "logistic.l2",       "tree.max_depth",   "tree.ccp_alpha",     "forest.n_trees",  "forest.max_features",
    "gboost.n_estimators", "gboost.max_depth", "gboost.learning_rate", "svm.c",       "svm.gamma",
    "mlp.layers",        "mlp.width",        "mlp.learning_rate",  "mlp.l2"};

// yaml-cpp helpers with key checking and context in every message.
class Reader {
public:
    explicit Reader(fs::path base) : base_(std::move(base)) {}

    static void keys(const YAML::Node& n, const std::set<std::string>& allowed, const std::string& where) {
        if (!n.IsMap()) throw ConfigError(where + " must be a mapping");
        for (const auto& kv : n) {
            const auto key = kv.first.as<std::string>();
            if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
        }
    }

    template <class T>
    static T get(const YAML::Node& n, const std::string& key, const std::string& where) {
        if (!n[key]) throw ConfigError("missing '" + key + "' in " + where);
        return as<T>(n[key], where + "." + key);
    }

    template <class T>
    static T get_or(const YAML::Node& n, const std::string& key, T fallback, const std::string& where) {
        return n[key] ? as<T>(n[key], where + "." + key) : fallback;
    }

    template <class T>
    static T as(const YAML::Node& n, const std::string& where) {
        try {
            return n.as<T>();
        } catch (const YAML::Exception&) {
            throw ConfigError("bad value for " + where);
        }
    }

    static double snr(const YAML::Node& n, const std::string& where) {
        const auto s = as<std::string>(n, where);
        if (s == "inf" || s == ".inf" || s == "none") return kNoNoise;
        return as<double>(n, where);
    }

    fs::path resolve(const std::string& p) const {
        const fs::path path(p);
        return path.is_absolute() ? path : base_ / path;
    }

private:
    fs::path base_;
};

FrequencyBand read_band(const YAML::Node& n, const std::string& where) {
    Reader::keys(n, {"min_radps", "max_radps", "count", "spacing"}, where);
    FrequencyBand b;
    b.min_radps = Reader::get<double>(n, "min_radps", where);
    b.max_radps = Reader::get<double>(n, "max_radps", where);
    b.count = Reader::get<int>(n, "count", where);
    const auto spacing = Reader::get_or<std::string>(n, "spacing", "linear", where);
    if (spacing != "linear" && spacing != "log") throw ConfigError(where + ".spacing must be linear or log");
    b.log_spacing = spacing == "log";
    b.grid();  // validates
    return b;
}

void read_tree(const YAML::Node& n, TreeOptions& t, const std::string& where) {
    Reader::keys(n, {"max_depth", "min_samples_split", "min_samples_leaf", "ccp_alpha"}, where);
    t.max_depth = Reader::get_or(n, "max_depth", t.max_depth, where);
    t.min_samples_split = Reader::get_or(n, "min_samples_split", t.min_samples_split, where);
    t.min_samples_leaf = Reader::get_or(n, "min_samples_leaf", t.min_samples_leaf, where);
    t.ccp_alpha = Reader::get_or(n, "ccp_alpha", t.ccp_alpha, where);
}

Hyperparams read_hyper(const YAML::Node& n) {
    Hyperparams h;
    if (!n) return h;
    Reader::keys(n, {"logistic", "tree", "forest", "gboost", "svm", "mlp"}, "hyperparams");
    if (const auto lg = n["logistic"]) {
        Reader::keys(lg, {"l2", "max_iter", "generative"}, "hyperparams.logistic");
        h.logistic.l2 = Reader::get_or(lg, "l2", h.logistic.l2, "hyperparams.logistic");
        h.logistic.max_iter = Reader::get_or(lg, "max_iter", h.logistic.max_iter, "hyperparams.logistic");
        h.logistic.generative = Reader::get_or(lg, "generative", h.logistic.generative, "hyperparams.logistic");
    }
    if (const auto t = n["tree"]) read_tree(t, h.tree, "hyperparams.tree");
    if (const auto fo = n["forest"]) {
        const std::string w = "hyperparams.forest";
        Reader::keys(fo, {"n_trees", "max_features", "bootstrap", "tree"}, w);
        h.forest.n_trees = Reader::get_or(fo, "n_trees", h.forest.n_trees, w);
        h.forest.max_features = Reader::get_or(fo, "max_features", h.forest.max_features, w);
        h.forest.bootstrap = Reader::get_or(fo, "bootstrap", h.forest.bootstrap, w);
        if (fo["tree"]) read_tree(fo["tree"], h.forest.tree, w + ".tree");
    }
    if (const auto gb = n["gboost"]) {
        const std::string w = "hyperparams.gboost";
        Reader::keys(gb, {"n_estimators", "learning_rate", "max_depth", "min_samples_leaf"}, w);
        h.gboost.n_estimators = Reader::get_or(gb, "n_estimators", h.gboost.n_estimators, w);
        h.gboost.learning_rate = Reader::get_or(gb, "learning_rate", h.gboost.learning_rate, w);
        h.gboost.max_depth = Reader::get_or(gb, "max_depth", h.gboost.max_depth, w);
        h.gboost.min_samples_leaf = Reader::get_or(gb, "min_samples_leaf", h.gboost.min_samples_leaf, w);
    }
    if (const auto sv = n["svm"]) {
        const std::string w = "hyperparams.svm";
        Reader::keys(sv, {"c", "gamma", "tol"}, w);
        h.svm.c = Reader::get_or(sv, "c", h.svm.c, w);
        h.svm.gamma = Reader::get_or(sv, "gamma", h.svm.gamma, w);
        h.svm.tol = Reader::get_or(sv, "tol", h.svm.tol, w);
    }
    if (const auto ml = n["mlp"]) {
        const std::string w = "hyperparams.mlp";
        Reader::keys(ml, {"hidden", "activation", "learning_rate", "batch_size", "max_epochs", "tol", "n_iter_no_change", "l2"}, w);
        h.mlp.hidden = Reader::get_or(ml, "hidden", h.mlp.hidden, w);
        const auto act = Reader::get_or<std::string>(ml, "activation", "sigmoid", w);
        if (act != "sigmoid" && act != "softmax") throw ConfigError(w + ".activation must be sigmoid or softmax");
        h.mlp.activation = act == "sigmoid" ? Activation::Sigmoid : Activation::Softmax;
        h.mlp.learning_rate = Reader::get_or(ml, "learning_rate", h.mlp.learning_rate, w);
        h.mlp.batch_size = Reader::get_or(ml, "batch_size", h.mlp.batch_size, w);
        h.mlp.max_epochs = Reader::get_or(ml, "max_epochs", h.mlp.max_epochs, w);
        h.mlp.tol = Reader::get_or(ml, "tol", h.mlp.tol, w);
        h.mlp.n_iter_no_change = Reader::get_or(ml, "n_iter_no_change", h.mlp.n_iter_no_change, w);
        h.mlp.l2 = Reader::get_or(ml, "l2", h.mlp.l2, w);
    }
    return h;
}

void read_geometry(const YAML::Node& g, ClassSpec& spec, const std::vector<double>& base_grid, const Reader& r,
                   const std::string& where) {
    Reader::keys(g, {"sphere", "file", "id", "sigma_mean_spm", "sigma_std_spm"}, where);
    std::optional<double> m_sigma, s_sigma;
    if (g["sigma_mean_spm"]) m_sigma = Reader::as<double>(g["sigma_mean_spm"], where + ".sigma_mean_spm");
    if (g["sigma_std_spm"]) s_sigma = Reader::as<double>(g["sigma_std_spm"], where + ".sigma_std_spm");
    if (g["sphere"].IsDefined() == g["file"].IsDefined()) throw ConfigError(where + " needs exactly one of sphere / file");

    std::vector<SpectralSignature> sigs;
    if (const auto sp = g["sphere"]) {
        Reader::keys(sp, {"shape_radius", "mu_r"}, where + ".sphere");
        if (base_grid.empty()) throw ConfigError("sphere geometries need a base_grid section");
        const double shape = Reader::get_or(sp, "shape_radius", 1.0, where + ".sphere");
        const double mu_r = Reader::get_or(sp, "mu_r", 1.0, where + ".sphere");
        sigs.push_back(sphere_signature(spec.m_alpha, m_sigma.value_or(spec.m_sigma), mu_r, base_grid, shape));
        sigs.back().geometry_id = Reader::get<std::string>(g, "id", where);
    } else {
        const auto path = r.resolve(Reader::as<std::string>(g["file"], where + ".file"));
        if (!fs::exists(path)) throw ConfigError("signature file not found: " + path.string());
        sigs = load_signatures(path, format_from_path(path));
        if (sigs.empty()) throw ConfigError("signature file has no signatures: " + path.string());
        if (g["id"]) {
            if (sigs.size() != 1) throw ConfigError(where + ".id needs a file with a single signature");
            sigs.front().geometry_id = Reader::as<std::string>(g["id"], where + ".id");
        }
    }
    for (auto& s : sigs) {
        if (s.geometry_id.empty()) throw ConfigError(where + ": signature without a geometry id");
        s.class_id = spec.class_id;
        spec.geometries.push_back({std::move(s), m_sigma, s_sigma});
    }
}

}  // namespace

ExperimentConfig parse_config(const std::string& yaml_text, const fs::path& base_dir) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& ex) {
        throw ConfigError(std::string("YAML: ") + ex.what());
    }
    if (!root.IsMap()) throw ConfigError("config must be a mapping");
    Reader::keys(root,
                 {"seed", "features", "frequencies", "base_grid", "noise", "instances_per_class", "classes", "methods",
                  "hyperparams", "mccv", "sweep", "loo", "noise_check"},
                 "config");
    const Reader r(base_dir);
    ExperimentConfig c;
    if (root["seed"]) c.seed = Reader::as<std::uint64_t>(root["seed"], "seed");
    const auto features = Reader::get_or<std::string>(root, "features", "invariants", "config");
    try {
        c.kind = feature_kind_from_string(features);
    } catch (const Error&) {
        throw ConfigError("features must be invariants or eigenvalues, got '" + features + "'");
    }
    c.frequencies = read_band(root["frequencies"], "frequencies");
    std::vector<double> base_grid;
    if (root["base_grid"]) {
        auto b = read_band(root["base_grid"], "base_grid");
        if (!root["base_grid"]["spacing"]) b.log_spacing = true;
        base_grid = b.grid();
    }
    if (const auto nz = root["noise"]) {
        Reader::keys(nz, {"train_snr_db", "test_snr_db"}, "noise");
        if (nz["train_snr_db"]) c.train_snr_db = Reader::snr(nz["train_snr_db"], "noise.train_snr_db");
        c.test_snr_db = nz["test_snr_db"] ? Reader::snr(nz["test_snr_db"], "noise.test_snr_db") : c.train_snr_db;
    }
    if (root["instances_per_class"]) {
        const auto n = root["instances_per_class"];
        c.instances_per_class = n.IsSequence() ? Reader::as<std::vector<int>>(n, "instances_per_class")
                                               : std::vector<int>{Reader::as<int>(n, "instances_per_class")};
    }
    if (c.instances_per_class.empty()) throw ConfigError("instances_per_class is empty");
    for (int p : c.instances_per_class)
        if (p < 4) throw ConfigError("instances_per_class entries must be at least 4");

    const auto classes = root["classes"];
    if (!classes || !classes.IsSequence() || classes.size() < 2) throw ConfigError("config needs at least two classes");
    std::set<std::string> names;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        const auto& n = classes[i];
        const std::string where = "classes[" + std::to_string(i) + "]";
        Reader::keys(n, {"name", "alpha_mean_m", "alpha_std_m", "sigma_mean_spm", "sigma_std_spm", "geometries"}, where);
        ClassSpec s;
        s.class_id = static_cast<int>(i) + 1;
        s.name = Reader::get<std::string>(n, "name", where);
        if (!names.insert(s.name).second) throw ConfigError("duplicate class name '" + s.name + "'");
        s.m_alpha = Reader::get<double>(n, "alpha_mean_m", where);
        s.s_alpha = Reader::get_or(n, "alpha_std_m", 0.0, where);
        s.m_sigma = Reader::get<double>(n, "sigma_mean_spm", where);
        s.s_sigma = Reader::get_or(n, "sigma_std_spm", 0.0, where);
        const auto geoms = n["geometries"];
        if (!geoms || !geoms.IsSequence() || geoms.size() == 0) throw ConfigError(where + " has no geometries");
        for (std::size_t g = 0; g < geoms.size(); ++g)
            read_geometry(geoms[g], s, base_grid, r, where + ".geometries[" + std::to_string(g) + "]");
        try {
            s.validate();
        } catch (const Error& ex) {
            throw ConfigError(where + ": " + ex.what());
        }
        c.classes.push_back(std::move(s));
    }

    if (root["methods"]) {
        c.methods.clear();
        for (const auto& m : Reader::as<std::vector<std::string>>(root["methods"], "methods")) {
            try {
                c.methods.push_back(method_from_string(m));
            } catch (const Error&) {
                throw ConfigError("unknown method '" + m + "'");
            }
        }
        if (c.methods.empty()) throw ConfigError("methods is empty");
    }
    c.hyper = read_hyper(root["hyperparams"]);

    if (const auto mc = root["mccv"]) {
        Reader::keys(mc, {"iterations", "test_fraction"}, "mccv");
        c.mccv_iterations = Reader::get_or(mc, "iterations", c.mccv_iterations, "mccv");
        c.test_fraction = Reader::get_or(mc, "test_fraction", c.test_fraction, "mccv");
        if (c.mccv_iterations < 1) throw ConfigError("mccv.iterations must be at least 1");
        if (!(c.test_fraction > 0 && c.test_fraction < 1)) throw ConfigError("mccv.test_fraction must lie in (0, 1)");
    }
    if (const auto sw = root["sweep"]) {
        if (!sw.IsSequence()) throw ConfigError("sweep must be a list of axes");
        for (std::size_t i = 0; i < sw.size(); ++i) {
            const std::string where = "sweep[" + std::to_string(i) + "]";
            Reader::keys(sw[i], {"axis", "values"}, where);
            SweepAxis a;
            a.name = Reader::get<std::string>(sw[i], "axis", where);
            if (!kAxisOptions.count(a.name)) throw ConfigError("unknown sweep axis '" + a.name + "'");
            for (const auto& v : sw[i]["values"]) a.values.push_back(Reader::snr(v, where + ".values"));
            if (a.values.empty()) throw ConfigError(where + " has no values");
            c.sweep_axes.push_back(std::move(a));
        }
        if (c.sweep_axes.size() > 2) throw ConfigError("sweep supports one or two axes");
    }
    if (const auto lo = root["loo"]) {
        Reader::keys(lo, {"repeats", "held_out", "regimes"}, "loo");
        c.loo_repeats = Reader::get_or(lo, "repeats", c.loo_repeats, "loo");
        if (c.loo_repeats < 1) throw ConfigError("loo.repeats must be at least 1");
        for (const auto& h : lo["held_out"]) {
            Reader::keys(h, {"class", "geometry"}, "loo.held_out");
            c.held_out.push_back({Reader::get<std::string>(h, "class", "loo.held_out"),
                                  Reader::get<std::string>(h, "geometry", "loo.held_out")});
            if (!names.count(c.held_out.back().class_name))
                throw ConfigError("loo.held_out names unknown class '" + c.held_out.back().class_name + "'");
        }
        for (const auto& g : lo["regimes"]) {
            Reader::keys(g, {"name", "alpha_std_factor", "sigma_std_factor"}, "loo.regimes");
            c.regimes.push_back({Reader::get<std::string>(g, "name", "loo.regimes"),
                                 Reader::get<double>(g, "alpha_std_factor", "loo.regimes"),
                                 Reader::get<double>(g, "sigma_std_factor", "loo.regimes")});
        }
    }
    if (const auto nc = root["noise_check"]) {
        Reader::keys(nc, {"draws", "snr_db"}, "noise_check");
        c.noise_draws = Reader::get_or(nc, "draws", c.noise_draws, "noise_check");
        if (c.noise_draws < 1) throw ConfigError("noise_check.draws must be at least 1");
        if (nc["snr_db"]) {
            c.noise_snr_db.clear();
            for (const auto& v : nc["snr_db"]) c.noise_snr_db.push_back(Reader::snr(v, "noise_check.snr_db"));
        }
    }
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.has_parent_path() ? path.parent_path() : fs::path("."));
}

std::vector<ClassSpec> specs_for(const ExperimentConfig& cfg, int per_class) {
    auto specs = cfg.classes;
    for (auto& s : specs) {
        const int g = static_cast<int>(s.geometries.size());
        s.v_count = (per_class + g - 1) / g;
    }
    return specs;
}

std::string ExperimentConfig::canonical_json() const {
    using nlohmann::json;
    json classes_json = json::array();
    for (const auto& s : classes) {
        json geoms = json::array();
        for (const auto& g : s.geometries) {
            json e = {{"id", g.base.geometry_id}, {"signature_fnv1a", hex(fnv1a64(format_signature_csv(g.base)))}};
            if (g.m_sigma) e["sigma_mean_spm"] = *g.m_sigma;
            if (g.s_sigma) e["sigma_std_spm"] = *g.s_sigma;
            geoms.push_back(e);
        }
        classes_json.push_back({{"name", s.name},
                                {"class_id", s.class_id},
                                {"alpha_mean_m", s.m_alpha},
                                {"alpha_std_m", s.s_alpha},
                                {"sigma_mean_spm", s.m_sigma},
                                {"sigma_std_spm", s.s_sigma},
                                {"geometries", geoms}});
    }
    json methods_json = json::array();
    for (auto m : methods) methods_json.push_back(to_string(m));
    Hyperparams h = hyper;
    h.threads = 1;
    json sweep = json::array();
    for (const auto& a : sweep_axes) {
        json vals = json::array();
        for (double v : a.values) vals.push_back(snr_json(v));
        sweep.push_back({{"axis", a.name}, {"values", vals}});
    }
    json held = json::array();
    for (const auto& h2 : held_out) held.push_back({{"class", h2.class_name}, {"geometry", h2.geometry_id}});
    json regimes_json = json::array();
    for (const auto& g : regimes)
        regimes_json.push_back(
            {{"name", g.name}, {"alpha_std_factor", g.alpha_std_factor}, {"sigma_std_factor", g.sigma_std_factor}});
    json snrs = json::array();
    for (double v : noise_snr_db) snrs.push_back(snr_json(v));
    json j = {{"seed", seed ? json(*seed) : json(nullptr)},
              {"features", to_string(kind)},
              {"frequencies",
               {{"min_radps", frequencies.min_radps},
                {"max_radps", frequencies.max_radps},
                {"count", frequencies.count},
                {"spacing", frequencies.log_spacing ? "log" : "linear"}}},
              {"noise", {{"train_snr_db", snr_json(train_snr_db)}, {"test_snr_db", snr_json(test_snr_db)}}},
              {"instances_per_class", instances_per_class},
              {"classes", classes_json},
              {"methods", methods_json},
              {"hyperparams", json::parse(hyperparams_json(h))},
              {"mccv", {{"iterations", mccv_iterations}, {"test_fraction", test_fraction}}},
              {"sweep", sweep},
              {"loo", {{"repeats", loo_repeats}, {"held_out", held}, {"regimes", regimes_json}}},
              {"noise_check", {{"draws", noise_draws}, {"snr_db", snrs}}}};
    return j.dump(1);
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(canonical_json()); }

}  // namespace mpt
