#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "mpt/errors.hpp"
#include "mpt/evaluation.hpp"
#include "mpt/experiment.hpp"
#include "mpt/parallel.hpp"
#include "mpt/rng.hpp"

namespace mpt {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string hex(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read back " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::uint64_t seed_of(const ExperimentConfig& cfg) {
    if (!cfg.seed) throw ConfigError("no seed: set 'seed' in the config or pass --seed");
    return *cfg.seed;
}

void log(const RunOptions& o, const std::string& msg) {
    if (!o.quiet) std::cerr << msg << '\n';
}

// Collects written files; every write is read back and compared.
class OutputDir {
public:
    OutputDir(const RunOptions& opts, std::string command, const ExperimentConfig& cfg)
        : opts_(opts), command_(std::move(command)), cfg_(cfg) {
        std::error_code ec;
        fs::create_directories(opts_.out, ec);
        if (ec) throw IoError("cannot create output directory " + opts_.out.string() + ": " + ec.message());
    }

    void text(const std::string& name, const std::string& content) {
        const fs::path p = opts_.out / name;
        {
            std::ofstream out(p, std::ios::binary | std::ios::trunc);
            if (!out) throw IoError("cannot write " + p.string());
            out << content;
            if (!out.flush()) throw IoError("write failed for " + p.string());
        }
        if (read_bytes(p) != content) throw IoError("verification failed for " + p.string());
        files_.push_back(name);
    }

    void dictionary(const std::string& stem, const Dictionary& d, const DictionaryMetadata& meta) {
        const fs::path csv = opts_.out / (stem + ".csv"), side = opts_.out / (stem + ".json");
        write_dictionary(d, meta, csv, side);
        const Dictionary back = read_dictionary(csv, side);
        if (back.size() != d.size() || back.class_counts != d.class_counts)
            throw IoError("verification failed for " + csv.string());
        files_.push_back(stem + ".csv");
        files_.push_back(stem + ".json");
    }

    std::vector<std::string> finish() {
        nlohmann::json list = nlohmann::json::array();
        for (const auto& f : files_) {
            const auto bytes = read_bytes(opts_.out / f);
            list.push_back({{"name", f}, {"bytes", bytes.size()}, {"fnv1a", hex(fnv1a64(bytes))}});
        }
        nlohmann::json m = {{"tool", "mpt-experiment"},
                            {"format_version", 1},
                            {"command", command_},
                            {"seed", seed_of(cfg_)},
                            {"config_hash", hex(cfg_.hash())},
                            {"files", list}};
        text("manifest.json", m.dump(1) + "\n");
        log(opts_, "[" + command_ + "] wrote " + std::to_string(files_.size()) + " files to " + opts_.out.string());
        return files_;
    }

private:
    const RunOptions& opts_;
    std::string command_;
    const ExperimentConfig& cfg_;
    std::vector<std::string> files_;
};

DictionaryMetadata metadata(const ExperimentConfig& cfg, double train_snr, double test_snr) {
    DictionaryMetadata m;
    m.train_snr_db = train_snr;
    m.test_snr_db = test_snr;
    m.seed = seed_of(cfg);
    for (const auto& c : cfg.classes) m.class_names.push_back(c.name);
    return m;
}

NoisyDictionaries views_for(const ExperimentConfig& cfg, int per_class, std::uint64_t seed, int threads) {
    return build_dictionaries(specs_for(cfg, per_class), cfg.frequencies.grid(), cfg.train_snr_db, cfg.test_snr_db,
                              cfg.kind, seed, threads);
}

// Nested parallelism is avoided: outer loops own the workers.
Hyperparams inner(const ExperimentConfig& cfg) {
    Hyperparams h = cfg.hyper;
    h.threads = 1;
    return h;
}

std::string kappa_row(const KappaStats& k) {
    return num(k.median) + ',' + num(k.q1) + ',' + num(k.q3) + ',' + num(k.mean) + ',' + num(k.min) + ',' + num(k.max);
}

void apply_axis(ExperimentConfig& c, const std::string& axis, double v) {
    const int iv = static_cast<int>(std::lround(v));
    if (axis == "frequency_count") c.frequencies.count = iv;
    else if (axis == "snr_db") c.train_snr_db = c.test_snr_db = v;
    else if (axis == "train_snr_db") c.train_snr_db = v;
    else if (axis == "test_snr_db") c.test_snr_db = v;
    else if (axis == "instances_per_class") c.instances_per_class = {iv};
    else if (axis == "logistic.l2") c.hyper.logistic.l2 = v;
    else if (axis == "tree.max_depth") c.hyper.tree.max_depth = iv;
    else if (axis == "tree.ccp_alpha") c.hyper.tree.ccp_alpha = v;
    else if (axis == "forest.n_trees") c.hyper.forest.n_trees = iv;
    else if (axis == "forest.max_features") c.hyper.forest.max_features = iv;
    else if (axis == "gboost.n_estimators") c.hyper.gboost.n_estimators = iv;
    else if (axis == "gboost.max_depth") c.hyper.gboost.max_depth = iv;
    else if (axis == "gboost.learning_rate") c.hyper.gboost.learning_rate = v;
    else if (axis == "svm.c") c.hyper.svm.c = v;
    else if (axis == "svm.gamma") c.hyper.svm.gamma = v;
    else if (axis == "mlp.layers") {
        const int width = c.hyper.mlp.hidden.empty() ? 50 : c.hyper.mlp.hidden.front();
        c.hyper.mlp.hidden.assign(static_cast<std::size_t>(std::max(1, iv)), width);
    } else if (axis == "mlp.width") {
        for (auto& w : c.hyper.mlp.hidden) w = iv;
    } else if (axis == "mlp.learning_rate") c.hyper.mlp.learning_rate = v;
    else if (axis == "mlp.l2") c.hyper.mlp.l2 = v;
    else throw ConfigError("unknown sweep axis '" + axis + "'");
}

int class_id_of(const ExperimentConfig& cfg, const std::string& name) {
    for (const auto& c : cfg.classes)
        if (c.name == name) return c.class_id;
    throw ConfigError("unknown class '" + name + "'");
}

}  // namespace

std::vector<std::string> cmd_build(const ExperimentConfig& cfg, const RunOptions& opts) {
    const auto seed = seed_of(cfg);
    OutputDir out(opts, "build", cfg);
    for (int p : cfg.instances_per_class) {
        const auto views = views_for(cfg, p, seed, opts.threads);
        for (std::size_t k = 0; k < cfg.classes.size(); ++k)
            log(opts, "[build] P=" + std::to_string(p) + " class " + std::to_string(k + 1) + " (" + cfg.classes[k].name +
                          "): " + std::to_string(views.train_view.class_counts[k]) + " samples");
        const auto meta = metadata(cfg, cfg.train_snr_db, cfg.test_snr_db);
        const std::string stem = "dictionary_p" + std::to_string(p);
        out.dictionary(stem + "_train", views.train_view, meta);
        if (cfg.train_snr_db != cfg.test_snr_db) out.dictionary(stem + "_test", views.test_view, meta);
    }
    return out.finish();
}

std::vector<std::string> cmd_train(const ExperimentConfig& cfg, const RunOptions& opts) {
    const auto seed = seed_of(cfg);
    OutputDir out(opts, "train", cfg);
    const int p = cfg.instances_per_class.front();
    const auto views = views_for(cfg, p, seed, opts.threads);
    Hyperparams hp = cfg.hyper;
    hp.threads = opts.threads;
    std::string summary = "method,converged,iterations,final_loss,training_logloss\n";
    for (Method m : cfg.methods) {
        const auto model = train(m, hp, views.train_view, derive_seed(seed, stream::kModel));
        const auto& info = model.info();
        summary += to_string(m) + ',' + (info.converged ? "true" : "false") + ',' + std::to_string(info.iterations) +
                   ',' + num(info.final_loss) + ',' + num(logloss(model, to_dataset(views.train_view))) + '\n';
        out.text("model_" + to_string(m) + ".json", model.to_json() + "\n");
        log(opts, "[train] " + to_string(m) + (info.converged ? " converged" : " did not converge") + " after " +
                      std::to_string(info.iterations) + " iterations");
    }
    out.text("training.csv", summary);
    return out.finish();
}

std::vector<std::string> cmd_evaluate(const ExperimentConfig& cfg, const RunOptions& opts) {
    const auto seed = seed_of(cfg);
    std::vector<fs::path> paths = opts.models;
    if (paths.empty())
        for (Method m : cfg.methods) paths.push_back(opts.out / ("model_" + to_string(m) + ".json"));
    std::vector<ClassifierModel> models;
    for (const auto& p : paths) {
        if (!fs::exists(p)) throw IoError("model file not found: " + p.string() + " (run `train` first or pass --model)");
        models.push_back(ClassifierModel::from_json(read_bytes(p)));
    }
    OutputDir out(opts, "evaluate", cfg);
    // fresh objects: new size/conductivity draws and noise, independent of training
    const auto views = views_for(cfg, cfg.instances_per_class.front(), derive_seed(seed, stream::kEvaluation),
                                 opts.threads);
    const Dictionary& test = views.test_view;
    std::vector<std::string> used;
    for (const auto& model : models) {
        std::string name = to_string(model.method());
        for (int i = 2; std::count(used.begin(), used.end(), name); ++i) name = to_string(model.method()) + "_" + std::to_string(i);
        used.push_back(name);
        const auto c = confusion_matrix(model, test);
        const auto metrics = class_metrics(c);
        const double kp = kappa(c);
        nlohmann::json j = {{"method", to_string(model.method())},
                            {"samples", test.size()},
                            {"accuracy", accuracy(c)},
                            {"kappa", kp},
                            {"confusion", c.counts}};
        out.text("confusion_" + name + ".csv", confusion_csv(c));
        out.text("confusion_normalized_" + name + ".csv", normalized_confusion_csv(c));
        out.text("metrics_" + name + ".csv", metrics_csv(metrics));
        if (is_probabilistic(model.method())) {
            std::string csv;
            for (int k = 1; k <= test.num_classes(); ++k) {
                const auto s = uncertainty_csv(uncertainty_summary(model, test, k));
                csv += k == 1 ? s : s.substr(s.find('\n') + 1);
            }
            out.text("uncertainty_" + name + ".csv", csv);
        }
        out.text("evaluation_" + name + ".json", j.dump(1) + "\n");
        log(opts, "[evaluate] " + name + ": kappa " + num(kp));
    }
    return out.finish();
}

std::vector<std::string> cmd_compare(const ExperimentConfig& cfg, const RunOptions& opts) {
    const auto seed = seed_of(cfg);
    OutputDir out(opts, "compare", cfg);
    std::string table = "method,instances_per_class,train_snr_db,test_snr_db,kappa_median,kappa_q1,kappa_q3,kappa_mean,"
                        "kappa_min,kappa_max\n";
    std::vector<std::string> rows(cfg.methods.size() * cfg.instances_per_class.size());
    for (std::size_t pi = 0; pi < cfg.instances_per_class.size(); ++pi) {
        const int p = cfg.instances_per_class[pi];
        const auto views = views_for(cfg, p, seed, opts.threads);
        for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
            const Method m = cfg.methods[mi];
            const auto r = mccv(m, inner(cfg), views.train_view, views.test_view, cfg.mccv_iterations, cfg.test_fraction,
                                seed, opts.threads);
            rows[mi * cfg.instances_per_class.size() + pi] = to_string(m) + ',' + std::to_string(p) + ',' +
                                                             num(cfg.train_snr_db) + ',' + num(cfg.test_snr_db) + ',' +
                                                             kappa_row(r.kappa) + '\n';
            out.text("mccv_" + to_string(m) + "_p" + std::to_string(p) + ".json", mccv_json(r) + "\n");
            log(opts, "[compare] " + to_string(m) + " P=" + std::to_string(p) + ": median kappa " + num(r.kappa.median));
        }
    }
    for (const auto& r : rows) table += r;
    out.text("compare.csv", table);
    return out.finish();
}

std::vector<std::string> cmd_sweep(const ExperimentConfig& cfg, const RunOptions& opts) {
    if (cfg.sweep_axes.empty()) throw ConfigError("sweep needs at least one axis in the 'sweep' section");
    const auto seed = seed_of(cfg);
    OutputDir out(opts, "sweep", cfg);
    const auto& ax = cfg.sweep_axes;
    const std::vector<double> second = ax.size() > 1 ? ax[1].values : std::vector<double>{0.0};
    std::string csv = "method," + ax[0].name + (ax.size() > 1 ? "," + ax[1].name : "") +
                      ",kappa_median,kappa_q1,kappa_q3,kappa_mean,kappa_min,kappa_max\n";
    for (Method m : cfg.methods)
        for (double x : ax[0].values)
            for (double y : second) {
                ExperimentConfig cell = cfg;
                apply_axis(cell, ax[0].name, x);
                if (ax.size() > 1) apply_axis(cell, ax[1].name, y);
                const auto views = views_for(cell, cell.instances_per_class.front(), seed, opts.threads);
                const auto r = mccv(m, inner(cell), views.train_view, views.test_view, cell.mccv_iterations,
                                    cell.test_fraction, seed, opts.threads);
                csv += to_string(m) + ',' + num(x) + (ax.size() > 1 ? ',' + num(y) : "") + ',' + kappa_row(r.kappa) + '\n';
                log(opts, "[sweep] " + to_string(m) + " " + ax[0].name + "=" + num(x) +
                              (ax.size() > 1 ? " " + ax[1].name + "=" + num(y) : "") + ": median kappa " +
                              num(r.kappa.median));
            }
    out.text("sweep.csv", csv);
    return out.finish();
}

std::vector<std::string> cmd_loo(const ExperimentConfig& cfg, const RunOptions& opts) {
    if (cfg.held_out.empty()) throw ConfigError("loo needs at least one entry under loo.held_out");
    const auto seed = seed_of(cfg);
    OutputDir out(opts, "loo", cfg);
    std::vector<Regime> regimes = cfg.regimes;
    const bool configured = regimes.empty();
    if (configured) regimes.push_back({"config", 0.0, 0.0});
    const int p = cfg.instances_per_class.front();
    const int k_count = static_cast<int>(cfg.classes.size());

    std::string summary = "regime,class,geometry,method,kappa_mean,kappa_median,true_p5,true_q1,true_median,true_q3,"
                          "true_p95\n";
    std::string bars = "regime,class,geometry,method,posterior_class,p5,q1,median,q3,p95\n";
    for (const auto& regime : regimes) {
        auto specs = specs_for(cfg, p);
        if (!configured)
            for (auto& s : specs) {
                s.s_alpha = regime.alpha_std_factor * s.m_alpha;
                s.s_sigma = regime.sigma_std_factor * s.m_sigma;
                for (auto& g : s.geometries)
                    if (g.m_sigma) g.s_sigma = regime.sigma_std_factor * *g.m_sigma;
            }
        for (const auto& h : cfg.held_out) {
            const int cls = class_id_of(cfg, h.class_name);
            for (Method m : cfg.methods) {
                const auto reps = static_cast<std::size_t>(cfg.loo_repeats);
                std::vector<double> kappas(reps);
                std::vector<std::vector<std::vector<double>>> gammas(reps);
                parallel_for(reps, opts.threads, [&](std::size_t r) {
                    LooOptions o;
                    o.class_id = cls;
                    o.geometry_id = h.geometry_id;
                    o.eval_freqs = cfg.frequencies.grid();
                    o.train_snr_db = cfg.train_snr_db;
                    o.test_snr_db = cfg.test_snr_db;
                    o.kind = cfg.kind;
                    o.test_fraction = cfg.test_fraction;
                    o.seed = derive_seed(seed, stream::kMccv, r);
                    const auto split = build_loo_dictionary(specs, o);
                    const auto model = train(m, inner(cfg), split.train, derive_seed(seed, stream::kModel, r));
                    kappas[r] = kappa(confusion_matrix(model, split.test));
                    for (const auto& s : split.test.samples)
                        if (s.class_id() == cls) gammas[r].push_back(model.predict_proba(s.x));
                });
                std::vector<std::vector<double>> pooled;
                for (auto& g : gammas) pooled.insert(pooled.end(), g.begin(), g.end());
                const auto ks = kappa_stats(kappas);
                const std::string key = regime.name + ',' + h.class_name + ',' + h.geometry_id + ',' + to_string(m);
                std::string truth = ",nan,nan,nan,nan,nan";
                if (is_probabilistic(m)) {
                    const auto s = summarize_posteriors(pooled, cls);
                    for (int k = 1; k <= k_count; ++k) {
                        const auto& c = s.classes[static_cast<std::size_t>(k - 1)];
                        const std::string row = ',' + num(c.p5) + ',' + num(c.q1) + ',' + num(c.median) + ',' +
                                                num(c.q3) + ',' + num(c.p95);
                        bars += key + ',' + std::to_string(k) + row + '\n';
                        if (k == cls) truth = row;
                    }
                }
                summary += key + ',' + num(ks.mean) + ',' + num(ks.median) + truth + '\n';
                log(opts, "[loo] " + key + ": mean kappa " + num(ks.mean));
            }
        }
    }
    out.text("loo.csv", summary);
    out.text("loo_posteriors.csv", bars);
    return out.finish();
}

std::vector<std::string> cmd_noise_check(const ExperimentConfig& cfg, const RunOptions& opts) {
    const auto seed = seed_of(cfg);
    OutputDir out(opts, "noise-check", cfg);
    const auto& spec = cfg.classes.front();
    const auto& geom = spec.geometries.front();
    const auto clean = scale_signature(geom.base, spec.m_alpha, spec.sigma_mean(geom), cfg.frequencies.grid());
    std::string csv = "snr_db,draws,coefficients,mean_abs_rel,rms_rel,expected_mean_abs_rel,expected_rms_rel\n";
    for (std::size_t si = 0; si < cfg.noise_snr_db.size(); ++si) {
        const double snr = cfg.noise_snr_db[si];
        const auto draws = static_cast<std::size_t>(cfg.noise_draws);
        std::vector<double> sum(draws, 0.0), sum2(draws, 0.0);
        std::vector<std::size_t> used(draws, 0);
        parallel_for(draws, opts.threads, [&](std::size_t d) {
            const auto noisy = add_noise(clean, snr, derive_seed(seed, stream::kNoise, (si << 32) | d));
            for (std::size_t f = 0; f < clean.coefficients.size(); ++f)
                for (std::size_t e = 0; e < 6; ++e) {
                    const auto v = clean.coefficients[f].entries()[e];
                    if (std::abs(v) == 0.0) continue;  // zero coefficients receive zero noise
                    const double rel = std::abs(noisy.coefficients[f].entries()[e] - v) / std::abs(v);
                    sum[d] += rel;
                    sum2[d] += rel * rel;
                    ++used[d];
                }
        });
        double s = 0, s2 = 0;
        std::size_t n = 0;
        for (std::size_t d = 0; d < draws; ++d) s += sum[d], s2 += sum2[d], n += used[d];
        if (n == 0) throw ValidationError("reference signature has no non-zero coefficients");
        const double level = std::pow(10.0, -snr / 20.0);
        csv += num(snr) + ',' + std::to_string(draws) + ',' + std::to_string(n) + ',' + num(s / static_cast<double>(n)) +
               ',' + num(std::sqrt(s2 / static_cast<double>(n))) + ',' + num(0.5 * std::sqrt(M_PI) * level) + ',' +
               num(level) + '\n';
        log(opts, "[noise-check] SNR " + num(snr) + " dB: mean |e/M| " + num(s / static_cast<double>(n)));
    }
    out.text("noise_check.csv", csv);
    return out.finish();
}

}  // namespace mpt
