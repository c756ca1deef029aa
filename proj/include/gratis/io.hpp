#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "features.hpp"
#include "forecast.hpp"
#include "ga.hpp"
#include "instance_space.hpp"
#include "mar.hpp"
#include "quantile_lasso.hpp"

namespace gratis {

using json = nlohmann::json;

class IoError : public Error {
public:
    using Error::Error;
};

struct NamedSeries {
    std::string id;
    TimeSeries series;
};

/// Shortest round-trip decimal form.
inline std::string format_double(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& s) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && *b == ' ') ++b;
    auto r = std::from_chars(b, e, v);
    if (r.ec != std::errc() || r.ptr != e) throw SchemaError("not a number: '" + s + "'");
    return v;
}

// ---- MAR models --------------------------------------------------------

inline json to_json(const MARModel& m) {
    json comps = json::array();
    for (const auto& c : m.components)
        comps.push_back({{"ar", c.ar_coeffs},
                         {"sar", c.seasonal_ar_coeffs},
                         {"d", c.d},
                         {"D", c.D},
                         {"period", c.period},
                         {"intercept", c.intercept},
                         {"sigma", c.sigma}});
    return {{"weights", m.weights}, {"components", comps}};
}

inline MARModel mar_from_json(const json& j) {
    try {
        MARModel m;
        m.weights = j.at("weights").get<std::vector<double>>();
        for (const auto& c : j.at("components")) {
            SeasonalARComponent s;
            s.ar_coeffs = c.at("ar").get<std::vector<double>>();
            s.seasonal_ar_coeffs = c.value("sar", std::vector<double>{});
            s.d = c.value("d", 0);
            s.D = c.value("D", 0);
            s.period = c.value("period", 1);
            s.intercept = c.value("intercept", 0.0);
            s.sigma = c.at("sigma").get<double>();
            m.components.push_back(std::move(s));
        }
        m.validate();
        return m;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("bad MAR model: ") + e.what());
    }
}

// ---- series: JSONL -----------------------------------------------------

inline json to_json(const NamedSeries& s) {
    json j = {{"id", s.id}, {"periods", s.series.periods}, {"values", s.series.values}};
    json meta = json::object();
    if (s.series.origin) {
        const auto& o = *s.series.origin;
        if (!o.seeds.empty()) meta["seed"] = o.seeds.front();
        if (!o.burn_ins.empty()) meta["burn_in"] = o.burn_ins.front();
        if (o.models.size() == 1) meta["model"] = to_json(o.models.front());
        if (o.models.size() > 1 || o.seeds.size() > 1) {
            meta["seeds"] = o.seeds;
            meta["burn_ins"] = o.burn_ins;
            json ms = json::array();
            for (const auto& m : o.models) ms.push_back(to_json(m));
            meta["models"] = ms;
            meta["weights"] = o.weights;
        }
    }
    j["meta"] = meta;
    return j;
}

inline NamedSeries series_from_json(const json& j) {
    NamedSeries s;
    try {
        s.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
        s.series.values = j.at("values").get<std::vector<double>>();
        s.series.periods = j.value("periods", std::vector<int>{1});
        if (j.contains("meta") && j["meta"].is_object()) {
            const auto& m = j["meta"];
            OriginMeta o;
            if (m.contains("seeds")) o.seeds = m["seeds"].get<std::vector<std::uint64_t>>();
            else if (m.contains("seed")) o.seeds = {m["seed"].get<std::uint64_t>()};
            if (m.contains("burn_ins")) o.burn_ins = m["burn_ins"].get<std::vector<std::size_t>>();
            else if (m.contains("burn_in")) o.burn_ins = {m["burn_in"].get<std::size_t>()};
            if (m.contains("models"))
                for (const auto& mm : m["models"]) o.models.push_back(mar_from_json(mm));
            else if (m.contains("model"))
                o.models.push_back(mar_from_json(m["model"]));
            if (m.contains("weights")) o.weights = m["weights"].get<std::vector<double>>();
            if (!o.seeds.empty() || !o.models.empty()) s.series.origin = std::move(o);
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("bad series record: ") + e.what());
    }
    for (double v : s.series.values)
        if (!std::isfinite(v)) throw SchemaError("series " + s.id + " has non-finite values");
    try {
        s.series.validate();
    } catch (const InvalidArgument& e) {
        throw SchemaError("series " + s.id + ": " + e.what());
    }
    return s;
}

inline void write_jsonl(std::ostream& os, const std::vector<NamedSeries>& batch) {
    for (const auto& s : batch) os << to_json(s).dump() << '\n';
}

inline std::vector<NamedSeries> read_jsonl(std::istream& is) {
    std::vector<NamedSeries> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw SchemaError("line " + std::to_string(lineno) + ": " + e.what());
        }
        out.push_back(series_from_json(j));
    }
    return out;
}

// ---- CSV helpers -------------------------------------------------------

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline void check_csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") != std::string::npos) throw SchemaError("field not representable in CSV: " + s);
}

// ---- series: long CSV with a periods sidecar ----------------------------

inline std::string periods_sidecar_path(const std::string& csv_path) { return csv_path + ".periods.json"; }

inline void write_long_csv(std::ostream& os, std::ostream& sidecar, const std::vector<NamedSeries>& batch) {
    os << "id,t,value\n";
    json side = json::object();
    for (const auto& s : batch) {
        check_csv_field(s.id);
        for (std::size_t t = 0; t < s.series.values.size(); ++t)
            os << s.id << ',' << (t + 1) << ',' << format_double(s.series.values[t]) << '\n';
        side[s.id] = s.series.periods;
    }
    sidecar << side.dump() << '\n';
}

inline std::vector<NamedSeries> read_long_csv(std::istream& is, const std::optional<json>& sidecar) {
    std::string line;
    if (!std::getline(is, line)) throw SchemaError("empty CSV");
    auto head = split_csv_line(line);
    if (head.size() != 3 || head[0] != "id" || head[1] != "t" || head[2] != "value")
        throw SchemaError("long CSV header must be id,t,value");
    std::vector<NamedSeries> out;
    std::map<std::string, std::size_t> pos;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto f = split_csv_line(line);
        if (f.size() != 3) throw SchemaError("line " + std::to_string(lineno) + ": expected 3 fields");
        auto it = pos.find(f[0]);
        if (it == pos.end()) {
            it = pos.emplace(f[0], out.size()).first;
            out.push_back(NamedSeries{f[0], {}});
        }
        auto& s = out[it->second].series;
        const double t = parse_double(f[1]);
        if (t != static_cast<double>(s.values.size() + 1))
            throw SchemaError("line " + std::to_string(lineno) + ": time index out of order for " + f[0]);
        const double v = parse_double(f[2]);
        if (!std::isfinite(v)) throw SchemaError("line " + std::to_string(lineno) + ": non-finite value");
        s.values.push_back(v);
    }
    for (auto& s : out) {
        s.series.periods = {1};
        if (sidecar && sidecar->contains(s.id)) s.series.periods = (*sidecar)[s.id].get<std::vector<int>>();
        s.series.validate();
    }
    return out;
}

// ---- files -------------------------------------------------------------

inline std::ifstream open_in(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    return f;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + path);
    return f;
}

inline bool has_suffix(const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

/// JSONL unless the path ends in .csv.
inline std::vector<NamedSeries> read_series_file(const std::string& path) {
    auto f = open_in(path);
    if (has_suffix(path, ".csv")) {
        std::optional<json> side;
        if (std::filesystem::exists(periods_sidecar_path(path))) {
            auto s = open_in(periods_sidecar_path(path));
            try {
                side = json::parse(s);
            } catch (const json::parse_error& e) {
                throw SchemaError(std::string("bad periods sidecar: ") + e.what());
            }
        }
        return read_long_csv(f, side);
    }
    return read_jsonl(f);
}

inline void write_series_file(const std::string& path, const std::vector<NamedSeries>& batch, const std::string& format) {
    auto f = open_out(path);
    if (format == "csv") {
        auto side = open_out(periods_sidecar_path(path));
        write_long_csv(f, side, batch);
    } else if (format == "jsonl") {
        write_jsonl(f, batch);
    } else {
        throw InvalidArgument("unknown series format: " + format);
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    auto f = open_out(path);
    f << text;
}

inline std::string read_text_file(const std::string& path) {
    auto f = open_in(path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// ---- feature matrix CSV ------------------------------------------------

inline void write_feature_csv(std::ostream& os, const FeatureMatrix& fm) {
    os << "id";
    for (const auto& c : fm.columns) os << ',' << c;
    os << '\n';
    for (std::size_t i = 0; i < fm.n_rows(); ++i) {
        check_csv_field(fm.ids[i]);
        os << fm.ids[i];
        for (const auto& v : fm.rows[i]) {
            os << ',';
            if (v) os << format_double(*v);
        }
        os << '\n';
    }
}

inline FeatureMatrix read_feature_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw SchemaError("empty feature CSV");
    auto head = split_csv_line(line);
    if (head.empty() || head[0] != "id") throw SchemaError("feature CSV must start with an id column");
    FeatureMatrix fm;
    fm.columns.assign(head.begin() + 1, head.end());
    for (const auto& c : fm.columns)
        if (!find_feature_info(c)) throw SchemaError("unknown feature column: " + c);
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto f = split_csv_line(line);
        if (f.size() != head.size()) throw SchemaError("line " + std::to_string(lineno) + ": wrong field count");
        fm.ids.push_back(f[0]);
        std::vector<std::optional<double>> row;
        for (std::size_t j = 1; j < f.size(); ++j) row.push_back(f[j].empty() ? std::nullopt : std::optional(parse_double(f[j])));
        fm.rows.push_back(std::move(row));
    }
    return fm;
}

inline FeatureMatrix read_feature_csv_file(const std::string& path) {
    auto f = open_in(path);
    return read_feature_csv(f);
}

// ---- embeddings and coverage -------------------------------------------

inline void write_embedding_csv(std::ostream& os, const std::vector<std::string>& ids, const Embedding2D& e) {
    if (ids.size() != e.points.size()) throw InvalidArgument("ids and points differ in length");
    os << "id,comp1,comp2,method,seed\n";
    for (std::size_t i = 0; i < ids.size(); ++i) {
        check_csv_field(ids[i]);
        os << ids[i] << ',' << format_double(e.points[i][0]) << ',' << format_double(e.points[i][1]) << ',' << e.method
           << ',' << e.seed << '\n';
    }
}

struct EmbeddingFile {
    std::vector<std::string> ids;
    Points2D points;
};

inline EmbeddingFile read_embedding_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw SchemaError("empty embedding CSV");
    auto head = split_csv_line(line);
    if (head.size() < 3 || head[0] != "id" || head[1] != "comp1" || head[2] != "comp2")
        throw SchemaError("embedding CSV header must start with id,comp1,comp2");
    EmbeddingFile out;
    while (std::getline(is, line)) {
        if (line.empty() || line == "\r") continue;
        auto f = split_csv_line(line);
        if (f.size() != head.size()) throw SchemaError("embedding CSV row has the wrong field count");
        out.ids.push_back(f[0]);
        out.points.push_back({parse_double(f[1]), parse_double(f[2])});
    }
    return out;
}

inline json to_json(const CoverageReport& r) {
    return {{"nb", r.grid.nb},
            {"ranges", {{"x", {r.grid.x_min, r.grid.x_max}}, {"y", {r.grid.y_min, r.grid.y_max}}}},
            {"miscoverage_ab", r.miscoverage_ab},
            {"miscoverage_ba", r.miscoverage_ba},
            {"occupied_a", r.occupied_a},
            {"occupied_b", r.occupied_b}};
}

// ---- meta-models -------------------------------------------------------

inline json to_json(const MetaModel& m) {
    return {{"method", m.method},
            {"feature_names", m.feature_names},
            {"scaler", {{"centers", m.scaler.centers}, {"scales", m.scaler.scales}}},
            {"dropped", m.dropped},
            {"coefficients", m.coefficients},
            {"omega", m.omega},
            {"tau", m.tau},
            {"lambda", m.lambda},
            {"lambda_grid", m.lambda_grid},
            {"cv_loss", m.cv_loss},
            {"flags", m.flags}};
}

inline MetaModel meta_from_json(const json& j) {
    try {
        MetaModel m;
        m.method = j.at("method").get<std::string>();
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        m.scaler.centers = j.at("scaler").at("centers").get<std::vector<double>>();
        m.scaler.scales = j.at("scaler").at("scales").get<std::vector<double>>();
        m.dropped = j.value("dropped", std::vector<bool>(m.feature_names.size(), false));
        m.coefficients = j.at("coefficients").get<std::vector<double>>();
        m.omega = j.value("omega", std::vector<double>{});
        m.tau = j.value("tau", 0.5);
        m.lambda = j.value("lambda", 0.0);
        m.lambda_grid = j.value("lambda_grid", std::vector<double>{});
        m.cv_loss = j.value("cv_loss", std::vector<double>{});
        m.flags = j.value("flags", std::vector<std::string>{});
        if (m.coefficients.size() != m.feature_names.size() + 1 || m.scaler.centers.size() != m.feature_names.size() ||
            m.scaler.scales.size() != m.feature_names.size())
            throw SchemaError("meta-model arrays disagree with its feature list");
        return m;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("bad meta-model: ") + e.what());
    }
}

inline json meta_bundle_to_json(const std::vector<MetaModel>& models, const std::vector<int>& horizons = {}) {
    json ms = json::array();
    for (const auto& m : models) ms.push_back(to_json(m));
    return {{"models", ms}, {"horizons", horizons}};
}

inline std::vector<MetaModel> meta_bundle_from_json(const json& j) {
    std::vector<MetaModel> out;
    if (!j.contains("models") || !j["models"].is_array()) throw SchemaError("meta bundle needs a models array");
    for (const auto& m : j["models"]) out.push_back(meta_from_json(m));
    if (out.empty()) throw SchemaError("meta bundle has no models");
    return out;
}

inline void write_training_csv(std::ostream& os, const TrainingTable& t) {
    os << "id";
    for (const auto& c : t.features.columns) os << ',' << c;
    for (auto m : t.methods) os << ",mase_" << to_string(m);
    os << '\n';
    for (std::size_t i = 0; i < t.features.n_rows(); ++i) {
        os << t.features.ids[i];
        for (const auto& v : t.features.rows[i]) {
            os << ',';
            if (v) os << format_double(*v);
        }
        for (double v : t.mase[i]) os << ',' << format_double(v);
        os << '\n';
    }
}

// ---- tuning results ----------------------------------------------------

inline json to_json(const TargetSpec& t) {
    return {{"names", t.names}, {"values", t.values}, {"period", t.period}, {"length", t.length}};
}

inline json to_json(const GAConfig& c) {
    return {{"population", c.population},       {"max_generations", c.max_generations},
            {"crossover_prob", c.crossover_prob}, {"mutation_prob", c.mutation_prob},
            {"mutation_scale", c.mutation_scale}, {"tournament", c.tournament},
            {"elitism", c.elitism},             {"tolerance", c.tolerance},
            {"seed", c.seed},                   {"k_fixed", c.k_fixed},
            {"p_fixed", c.p_fixed}};
}

inline json optional_features_json(const std::vector<std::string>& names, const std::vector<std::optional<double>>& v) {
    json j = json::object();
    for (std::size_t i = 0; i < names.size(); ++i) j[names[i]] = v[i] ? json(*v[i]) : json(nullptr);
    return j;
}

inline json to_json(const ProgressEvent& e, const std::vector<std::string>& names) {
    return {{"generation", e.generation},
            {"best_fitness", e.best_fitness},
            {"best_feature_values", optional_features_json(names, e.best_feature_values)},
            {"elapsed_ms", e.elapsed_ms}};
}

/// Result bundle for one or more tuned series.
inline json tune_bundle_json(const TargetSpec& t, const GAConfig& cfg, const std::vector<TuneResult>& results) {
    json items = json::array();
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        NamedSeries ns{"tuned-" + std::to_string(i + 1), r.series};
        items.push_back({{"series", to_json(ns)},
                         {"model", to_json(r.model)},
                         {"fitness", std::isfinite(r.fitness) ? json(r.fitness) : json(nullptr)},
                         {"generations", r.generations},
                         {"trace", r.trace},
                         {"features", optional_features_json(t.names, r.features)}});
    }
    return {{"target", to_json(t)}, {"config", to_json(cfg)}, {"results", items}};
}

inline json feature_vector_json(const std::string& id, const FeatureVector& fv) {
    return {{"id", id}, {"features", optional_features_json(fv.names, fv.values)}, {"flags", fv.flags}};
}

inline json feature_catalog_json() {
    json out = json::array();
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    for (const auto& f : feature_catalog())
        out.push_back({{"name", f.name},
                       {"min", num(f.lo)},
                       {"max", num(f.hi)},
                       {"min_open", f.lo_open},
                       {"max_open", f.hi_open},
                       {"seasonal_only", f.seasonal_only},
                       {"integer", f.integer}});
    return out;
}

}  // namespace gratis
