#pragma once

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "features.hpp"
#include "forecast.hpp"
#include "ga.hpp"
#include "generator.hpp"
#include "instance_space.hpp"
#include "io.hpp"
#include "parallel.hpp"
#include "quantile_lasso.hpp"
#include "service.hpp"

namespace gratis {

namespace cli_detail {

/// Usage problems found after CLI11 has finished parsing.
class UsageError : public Error {
public:
    using Error::Error;
};

inline std::string env_name(const std::string& opt) {
    std::string s = "GRATIS_";
    for (char c : opt) s.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    return s;
}

inline std::vector<std::string> json_to_args(const json& v) {
    std::vector<std::string> out;
    if (v.is_array()) {
        for (const auto& e : v) {
            auto sub = json_to_args(e);
            out.insert(out.end(), sub.begin(), sub.end());
        }
    } else if (v.is_object()) {
        for (auto it = v.begin(); it != v.end(); ++it) out.push_back(it.key() + "=" + json_to_args(it.value()).at(0));
    } else if (v.is_string()) {
        out.push_back(v.get<std::string>());
    } else {
        out.push_back(v.dump());
    }
    return out;
}

/// Fills options not given on the command line: environment first, then the
/// config file (a section named after the subcommand overrides top-level keys).
inline void apply_fallbacks(CLI::App& sub, const json& config) {
    for (CLI::Option* opt : sub.get_options()) {
        if (opt->count() > 0) continue;
        const std::string name = opt->get_single_name();
        if (name.empty() || name == "help" || name == "config") continue;
        std::vector<std::string> vals;
        if (const char* e = std::getenv(env_name(name).c_str())) {
            vals.push_back(e);
        } else if (config.contains(sub.get_name()) && config[sub.get_name()].is_object() &&
                   config[sub.get_name()].contains(name)) {
            vals = json_to_args(config[sub.get_name()][name]);
        } else if (config.contains(name)) {
            vals = json_to_args(config[name]);
        }
        if (vals.empty()) continue;
        for (const auto& v : vals) opt->add_result(v);
        opt->run_callback();
    }
}

inline std::vector<int> parse_int_list(const std::string& s, const char* what) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stoi(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw UsageError(std::string("bad ") + what + " entry: " + tok);
        }
    }
    return out;
}

inline std::vector<double> parse_double_list(const std::string& s, const char* what) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        try {
            out.push_back(parse_double(tok));
        } catch (const SchemaError&) {
            throw UsageError(std::string("bad ") + what + " entry: " + tok);
        }
    }
    return out;
}

inline std::string join(const std::vector<std::string>& v, const char* sep = ", ") {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
    return s;
}

/// Writes to `path`, or to `out` when the path is empty or "-".
template <class Fn>
void emit(const std::string& path, std::ostream& out, Fn&& fn) {
    if (path.empty() || path == "-") {
        fn(out);
        return;
    }
    auto f = open_out(path);
    fn(f);
    if (!f) throw IoError("failed writing " + path);
}

/// Columns wide enough for the series with the most periods; shorter vectors
/// leave the extra cells empty.
inline FeatureMatrix features_for(const std::vector<NamedSeries>& batch, unsigned workers) {
    std::size_t maxp = 1;
    for (const auto& s : batch) maxp = std::max(maxp, s.series.periods.size());
    std::vector<FeatureVector> fvs(batch.size());
    parallel_for(batch.size(), [&](std::size_t i) { fvs[i] = compute_feature_vector(batch[i].series); }, workers);
    FeatureMatrix fm;
    fm.columns = feature_names(maxp);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        std::vector<std::optional<double>> row(fm.columns.size());
        for (std::size_t j = 0; j < fm.columns.size(); ++j) row[j] = fvs[i].get(fm.columns[j]);
        fm.ids.push_back(batch[i].id);
        fm.rows.push_back(std::move(row));
    }
    return fm;
}

inline bool is_embedding_csv(const std::string& path) {
    auto f = open_in(path);
    std::string head;
    std::getline(f, head);
    return head.rfind("id,comp1,comp2", 0) == 0;
}

/// Rows reordered to `names`; a missing column is a schema error.
inline std::vector<std::optional<double>> select_columns(const FeatureMatrix& fm, std::size_t row,
                                                         const std::vector<std::string>& names) {
    std::vector<std::optional<double>> out;
    out.reserve(names.size());
    for (const auto& n : names) {
        auto it = std::find(fm.columns.begin(), fm.columns.end(), n);
        if (it == fm.columns.end()) throw SchemaError("feature column missing from input: " + n);
        out.push_back(fm.rows[row][static_cast<std::size_t>(it - fm.columns.begin())]);
    }
    return out;
}

}  // namespace cli_detail

/// Runs one CLI invocation. Exit codes: 0 success, 2 usage/validation/IO/schema, 1 internal.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    using namespace cli_detail;
    CLI::App app{"generate time series with controllable characteristics", "gratis"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file");
    unsigned workers = 0;
    app.add_option("--workers", workers, "worker threads (0 = all cores)");

    // generate
    auto* gen = app.add_subcommand("generate", "simulate a batch of series");
    int g_period = 1;
    std::size_t g_count = 1;
    int g_length = 0;
    std::string g_pool, g_periods, g_weights, g_out, g_format;
    std::uint64_t g_seed = 0;
    gen->add_option("--period", g_period, "seasonal period");
    gen->add_option("--count", g_count, "number of series");
    gen->add_option("--length", g_length, "fixed series length");
    gen->add_option("--length-pool", g_pool, "comma-separated lengths to draw from");
    gen->add_option("--periods", g_periods, "comma-separated periods for multi-seasonal series");
    gen->add_option("--weights", g_weights, "comma-separated aggregation weights for --periods");
    gen->add_option("--seed", g_seed, "master seed");
    gen->add_option("-o,--out", g_out, "output path");
    gen->add_option("--format", g_format, "jsonl or csv (default from the file extension)");

    // features
    auto* feat = app.add_subcommand("features", "compute features for a series file");
    std::string f_in, f_out;
    feat->add_option("-i,--input", f_in, "series file (.jsonl or long .csv)");
    feat->add_option("-o,--out", f_out, "feature CSV (stdout when omitted)");

    // embed
    auto* emb = app.add_subcommand("embed", "project feature rows to two dimensions");
    std::vector<std::string> e_in;
    std::string e_out, e_method = "tsne";
    std::uint64_t e_seed = 0;
    double e_perplexity = 30.0;
    int e_iterations = 1000;
    emb->add_option("-i,--input", e_in, "feature CSV; repeat to embed several files jointly");
    emb->add_option("-o,--out", e_out, "embedding CSV (stdout when omitted)");
    emb->add_option("--method", e_method, "tsne or pca");
    emb->add_option("--seed", e_seed, "t-SNE seed");
    emb->add_option("--perplexity", e_perplexity, "t-SNE perplexity");
    emb->add_option("--iterations", e_iterations, "t-SNE iterations");

    // coverage
    auto* cov = app.add_subcommand("coverage", "miscoverage between two collections");
    std::string c_a, c_b, c_out, c_method = "tsne";
    int c_nb = 30;
    std::uint64_t c_seed = 0;
    double c_perplexity = 30.0;
    int c_iterations = 1000;
    cov->add_option("-a,--a-input", c_a, "embedding CSV or feature CSV for collection A");
    cov->add_option("-b,--b-input", c_b, "embedding CSV or feature CSV for collection B");
    cov->add_option("--nb", c_nb, "grid bins per axis");
    cov->add_option("--method", c_method, "joint embedding for feature CSV input: tsne or pca");
    cov->add_option("--seed", c_seed, "t-SNE seed");
    cov->add_option("--perplexity", c_perplexity, "t-SNE perplexity");
    cov->add_option("--iterations", c_iterations, "t-SNE iterations");
    cov->add_option("-o,--out", c_out, "coverage JSON");

    // tune
    auto* tune = app.add_subcommand("tune", "evolve series towards target features");
    int t_period = 1;
    std::size_t t_length = 20, t_count = 1;
    std::vector<std::string> t_features;
    std::string t_out;
    GAConfig ga;
    tune->add_option("--period", t_period, "seasonal period");
    tune->add_option("--length", t_length, "series length");
    tune->add_option("--feature", t_features, "target as name=value; repeatable")->delimiter(',');
    tune->add_option("--count", t_count, "number of tuned series");
    tune->add_option("--seed", ga.seed, "master seed");
    tune->add_option("--population", ga.population, "population size");
    tune->add_option("--generations", ga.max_generations, "maximum generations");
    tune->add_option("--crossover", ga.crossover_prob, "crossover probability");
    tune->add_option("--mutation", ga.mutation_prob, "mutation probability");
    tune->add_option("--mutation-scale", ga.mutation_scale, "mutation step as a fraction of each gene range");
    tune->add_option("--tournament", ga.tournament, "tournament size");
    tune->add_option("--elitism", ga.elitism, "elite count");
    tune->add_option("--tolerance", ga.tolerance, "stop once fitness reaches this value");
    tune->add_option("--components", ga.k_fixed, "mixture components");
    tune->add_option("--ar-order", ga.p_fixed, "AR order per component");
    tune->add_option("-o,--out", t_out, "result bundle JSON");

    // train-meta
    auto* train = app.add_subcommand("train-meta", "fit quantile lasso meta-models on a corpus");
    std::string m_in, m_out, m_table;
    QuantileLassoOptions qopt;
    train->add_option("-i,--input", m_in, "series file");
    train->add_option("-o,--out", m_out, "model bundle JSON");
    train->add_option("--table", m_table, "also write the feature/MASE training table as CSV");
    train->add_option("--tau", qopt.tau, "quantile level");
    train->add_option("--folds", qopt.folds, "cross-validation folds");
    train->add_option("--grid-size", qopt.grid_size, "lambda grid size");

    // recommend
    auto* rec = app.add_subcommand("recommend", "pick a forecasting method per feature row");
    std::string r_in, r_models, r_out;
    rec->add_option("-i,--input", r_in, "feature CSV");
    rec->add_option("--models", r_models, "model bundle JSON");
    rec->add_option("-o,--out", r_out, "selections JSON (stdout when omitted)");

    // serve
    auto* srv = app.add_subcommand("serve", "run the HTTP job service");
    ServiceConfig scfg;
    srv->add_option("--host", scfg.host, "bind address");
    srv->add_option("--port", scfg.port, "port");
    srv->add_option("--data-dir", scfg.data_dir, "job result directory");
    srv->add_option("--jobs", scfg.workers, "job worker pool size (0 = logical CPUs)");
    srv->add_option("--sync-limit", scfg.sync_generate_limit, "largest count generated synchronously");
    srv->add_option("--cors-origin", scfg.cors_origin, "allowed UI origin");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        try {
            app.parse(rev);
        } catch (const CLI::ParseError& e) {
            if (e.get_exit_code() == 0) return app.exit(e, out, err);
            err << "error: " << e.what() << '\n';
            return 2;
        }
        CLI::App* sub = app.get_subcommands().front();

        if (config_path.empty())
            if (const char* e = std::getenv("GRATIS_CONFIG")) config_path = e;
        json config = json::object();
        if (!config_path.empty()) {
            try {
                config = json::parse(read_text_file(config_path));
            } catch (const json::parse_error& e) {
                throw SchemaError(std::string("config file is not JSON: ") + e.what());
            }
            if (!config.is_object()) throw SchemaError("config file must hold a JSON object");
        }
        try {
            apply_fallbacks(app, config);
            apply_fallbacks(*sub, config);
        } catch (const CLI::ParseError& e) {
            throw UsageError(e.what());
        }
        auto need = [](const std::string& v, const char* flag) {
            if (v.empty()) throw UsageError(std::string(flag) + " is required");
        };

        if (sub == gen) {
            need(g_out, "--out");
            if (g_count < 1) throw UsageError("--count must be >= 1");
            std::string format = g_format.empty() ? (has_suffix(g_out, ".csv") ? "csv" : "jsonl") : g_format;
            if (format != "csv" && format != "jsonl") throw UsageError("--format must be jsonl or csv");
            std::vector<NamedSeries> batch;
            if (!g_periods.empty()) {
                MultiSeasonalSpec spec;
                spec.periods = parse_int_list(g_periods, "--periods");
                if (!g_weights.empty()) spec.weights = parse_double_list(g_weights, "--weights");
                if (g_length < 1) throw UsageError("--length is required with --periods");
                spec.length = g_length;
                spec.validate();
                GeneratorConfig tmpl;
                batch.resize(g_count);
                parallel_for(g_count, [&](std::size_t i) {
                    batch[i] = {std::to_string(i + 1), generate_multiseasonal(spec, tmpl, derive_seed(g_seed, i))};
                }, workers);
            } else {
                GeneratorConfig gc;
                gc.period = g_period;
                if (gen->count("--length") > 0) {
                    if (g_length < 1) throw UsageError("--length must be >= 1");
                    gc.length = LengthSampler::fixed_length(g_length);
                } else if (!g_pool.empty()) {
                    gc.length = LengthSampler::from_pool(parse_int_list(g_pool, "--length-pool"));
                }
                gc.validate();
                auto series = generate_batch(gc, g_count, g_seed, workers);
                for (std::size_t i = 0; i < series.size(); ++i) batch.push_back({std::to_string(i + 1), std::move(series[i])});
            }
            write_series_file(g_out, batch, format);
            out << "generated " << batch.size() << " series (period "
                << (g_periods.empty() ? std::to_string(g_period) : g_periods) << ", seed " << g_seed << ") -> " << g_out
                << '\n';
            return 0;
        }

        if (sub == feat) {
            need(f_in, "--input");
            auto batch = read_series_file(f_in);
            if (batch.empty()) throw SchemaError("no series in " + f_in);
            auto fm = features_for(batch, workers);
            emit(f_out, out, [&](std::ostream& os) { write_feature_csv(os, fm); });
            if (!f_out.empty() && f_out != "-") out << "features for " << fm.n_rows() << " series -> " << f_out << '\n';
            return 0;
        }

        auto embed_matrix = [&](const FeatureMatrix& fm, const std::string& method, std::uint64_t seed, double perp,
                                int iters) {
            auto sm = scale_feature_matrix(fm);
            if (method == "pca") return pca_embed(sm);
            if (method != "tsne") throw UsageError("--method must be tsne or pca");
            TsneOptions opt;
            opt.seed = seed;
            opt.perplexity = perp;
            opt.iterations = iters;
            opt.workers = workers;
            return tsne_embed(sm, opt);
        };

        if (sub == emb) {
            if (e_in.empty()) throw UsageError("--input is required");
            FeatureMatrix all;
            for (const auto& p : e_in) {
                auto fm = read_feature_csv_file(p);
                if (all.columns.empty()) all.columns = fm.columns;
                if (fm.columns != all.columns) throw SchemaError("feature CSVs have different columns: " + p);
                all.ids.insert(all.ids.end(), fm.ids.begin(), fm.ids.end());
                all.rows.insert(all.rows.end(), fm.rows.begin(), fm.rows.end());
            }
            auto e = embed_matrix(all, e_method, e_seed, e_perplexity, e_iterations);
            emit(e_out, out, [&](std::ostream& os) { write_embedding_csv(os, all.ids, e); });
            if (e_perplexity > 0 && e.perplexity_capped)
                err << "warning: perplexity capped at " << format_double(e.perplexity) << '\n';
            return 0;
        }

        if (sub == cov) {
            need(c_a, "--a-input");
            need(c_b, "--b-input");
            Points2D pa, pb;
            const bool ea = is_embedding_csv(c_a), eb = is_embedding_csv(c_b);
            if (ea != eb) throw UsageError("-a and -b must both be embeddings or both be feature CSVs");
            if (ea) {
                auto fa = open_in(c_a);
                auto fb = open_in(c_b);
                pa = read_embedding_csv(fa).points;
                pb = read_embedding_csv(fb).points;
            } else {
                auto fa = read_feature_csv_file(c_a), fb = read_feature_csv_file(c_b);
                if (fa.columns != fb.columns) throw SchemaError("feature CSVs have different columns");
                FeatureMatrix joint = fa;
                joint.ids.insert(joint.ids.end(), fb.ids.begin(), fb.ids.end());
                joint.rows.insert(joint.rows.end(), fb.rows.begin(), fb.rows.end());
                auto e = embed_matrix(joint, c_method, c_seed, c_perplexity, c_iterations);
                pa.assign(e.points.begin(), e.points.begin() + static_cast<std::ptrdiff_t>(fa.n_rows()));
                pb.assign(e.points.begin() + static_cast<std::ptrdiff_t>(fa.n_rows()), e.points.end());
            }
            auto r = coverage_report(pa, pb, c_nb);
            out << "miscoverage(a,b) " << format_double(r.miscoverage_ab) << '\n';
            out << "miscoverage(b,a) " << format_double(r.miscoverage_ba) << '\n';
            if (!c_out.empty()) write_text_file(c_out, to_json(r).dump(2) + "\n");
            return 0;
        }

        if (sub == tune) {
            need(t_out, "--out");
            if (t_features.empty()) throw UsageError("at least one --feature name=value is required");
            if (t_count < 1) throw UsageError("--count must be >= 1");
            TargetSpec target;
            target.period = t_period;
            target.length = t_length;
            for (const auto& kv : t_features) {
                auto eq = kv.find('=');
                if (eq == std::string::npos) throw UsageError("--feature expects name=value, got " + kv);
                const std::string name = kv.substr(0, eq);
                if (!find_feature_info(name))
                    throw UsageError("unknown feature '" + name + "'; valid names: " + join(feature_names(1)));
                double v = 0.0;
                try {
                    v = parse_double(kv.substr(eq + 1));
                } catch (const SchemaError&) {
                    throw UsageError("--feature " + name + " needs a numeric value");
                }
                if (std::find(target.names.begin(), target.names.end(), name) != target.names.end())
                    throw UsageError("feature " + name + " given twice");
                target.names.push_back(name);
                target.values.push_back(v);
            }
            target.validate();
            ga.workers = workers;
            ga.validate();
            std::vector<TuneResult> results;
            for (std::size_t i = 0; i < t_count; ++i) {
                GAConfig c = ga;
                if (t_count > 1) c.seed = derive_seed(ga.seed, i);
                results.push_back(tune_to_target(target, c));
            }
            write_text_file(t_out, tune_bundle_json(target, ga, results).dump(2) + "\n");
            for (std::size_t i = 0; i < results.size(); ++i)
                out << "series " << (i + 1) << ": fitness " << format_double(results[i].fitness) << " after "
                    << results[i].generations << " generations\n";
            return 0;
        }

        if (sub == train) {
            need(m_in, "--input");
            need(m_out, "--out");
            auto batch = read_series_file(m_in);
            std::vector<TimeSeries> corpus;
            std::vector<std::string> ids;
            for (auto& s : batch) {
                ids.push_back(s.id);
                corpus.push_back(std::move(s.series));
            }
            auto table = build_training_table(corpus, ids, {}, all_methods(), workers);
            for (const auto& l : table.log) err << l << '\n';
            if (!m_table.empty()) emit(m_table, out, [&](std::ostream& os) { write_training_csv(os, table); });
            auto models = fit_meta_models(table, qopt, workers);
            write_text_file(m_out, meta_bundle_to_json(models, table.horizons).dump(2) + "\n");
            out << "trained " << models.size() << " models on " << table.features.n_rows() << " series ("
                << table.log.size() << " skipped) -> " << m_out << '\n';
            return 0;
        }

        if (sub == rec) {
            need(r_in, "--input");
            need(r_models, "--models");
            json bundle;
            try {
                bundle = json::parse(read_text_file(r_models));
            } catch (const json::parse_error& e) {
                throw SchemaError(std::string("model bundle is not JSON: ") + e.what());
            }
            auto models = meta_bundle_from_json(bundle);
            auto fm = read_feature_csv_file(r_in);
            json sel = json::array();
            for (std::size_t i = 0; i < fm.n_rows(); ++i) {
                FeatureVector fv;
                fv.names = models.front().feature_names;
                fv.values = select_columns(fm, i, fv.names);
                auto s = predict_and_select(models, fv);
                json pred = json::object(), w = json::object();
                auto weights = averaging_weights(s.predicted);
                for (std::size_t k = 0; k < models.size(); ++k) {
                    pred[models[k].method] = s.predicted[k];
                    w[models[k].method] = weights[k];
                }
                sel.push_back({{"id", fm.ids[i]}, {"method", s.method}, {"predicted_mase", pred}, {"weights", w}});
            }
            json doc = {{"selections", sel}};
            emit(r_out, out, [&](std::ostream& os) { os << doc.dump(2) << '\n'; });
            return 0;
        }

        if (sub == srv) {
            Service service(scfg);
            if (service.bind() < 0) throw IoError("cannot bind " + scfg.host + ":" + std::to_string(scfg.port));
            err << "serving on " << scfg.host << ":" << service.port() << '\n';
            service.run();
            return 0;
        }
        throw UsageError("unknown command");
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const SchemaError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const EmptyDataset& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const TooShort& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace gratis
