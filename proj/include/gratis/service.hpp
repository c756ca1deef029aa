#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "features.hpp"
#include "ga.hpp"
#include "generator.hpp"
#include "instance_space.hpp"
#include "io.hpp"
#include "parallel.hpp"
#include "quantile_lasso.hpp"

// after Eigen: httplib pulls in <resolv.h>, whose _res macro clashes with Eigen parameter names
#include <httplib.h>

namespace gratis {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;  ///< 0 picks a free port
    std::string data_dir = "gratis-data";
    unsigned workers = 0;  ///< job pool size, 0 = logical CPUs
    std::size_t sync_generate_limit = 100;
    std::string cors_origin = "*";
};

enum class JobStatus { queued, running, done, failed };

inline const char* to_string(JobStatus s) {
    switch (s) {
        case JobStatus::queued: return "queued";
        case JobStatus::running: return "running";
        case JobStatus::done: return "done";
        case JobStatus::failed: return "failed";
    }
    return "unknown";
}

struct JobEvent {
    std::uint64_t seq = 0;
    std::string type;
    json data;
};

class Job {
public:
    Job(std::string id, std::string kind) : id_(std::move(id)), kind_(std::move(kind)) {}

    const std::string& id() const { return id_; }
    const std::string& kind() const { return kind_; }

    void emit(const std::string& type, json data) {
        {
            std::lock_guard lk(mu_);
            events_.push_back({events_.size() + 1, type, std::move(data)});
        }
        cv_.notify_all();
    }

    /// Forward-only transitions; returns false when the move is not allowed.
    bool transition(JobStatus to) {
        {
            // status and its event change together so a reader never sees one without the other
            std::lock_guard lk(mu_);
            if (static_cast<int>(to) <= static_cast<int>(status_)) return false;
            if (status_ == JobStatus::done || status_ == JobStatus::failed) return false;
            status_ = to;
            events_.push_back({events_.size() + 1, "status", {{"status", to_string(to)}}});
        }
        cv_.notify_all();
        return true;
    }

    void finish(json result) {
        {
            std::lock_guard lk(mu_);
            result_ = std::move(result);
        }
        transition(JobStatus::done);
    }

    void fail(const std::string& message) {
        {
            std::lock_guard lk(mu_);
            error_ = message;
        }
        transition(JobStatus::failed);
    }

    JobStatus status() const {
        std::lock_guard lk(mu_);
        return status_;
    }

    bool finished() const {
        auto s = status();
        return s == JobStatus::done || s == JobStatus::failed;
    }

    json result() const {
        std::lock_guard lk(mu_);
        return result_;
    }

    json record() const {
        std::lock_guard lk(mu_);
        json j = {{"id", id_}, {"kind", kind_}, {"status", to_string(status_)}, {"events", events_.size()}};
        if (!error_.empty()) j["error"] = error_;
        if (status_ == JobStatus::done) j["result"] = "/api/jobs/" + id_ + "/result";
        return j;
    }

    /// Events with seq > after, waiting up to `wait` for new ones.
    std::vector<JobEvent> events_after(std::uint64_t after, std::chrono::milliseconds wait) const {
        std::unique_lock lk(mu_);
        cv_.wait_for(lk, wait, [&] {
            return events_.size() > after || status_ == JobStatus::done || status_ == JobStatus::failed;
        });
        std::vector<JobEvent> out;
        for (std::size_t i = static_cast<std::size_t>(after); i < events_.size(); ++i) out.push_back(events_[i]);
        return out;
    }

private:
    std::string id_;
    std::string kind_;
    JobStatus status_ = JobStatus::queued;
    std::vector<JobEvent> events_;
    json result_;
    std::string error_;
    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
};

/// Fixed-size pool; tasks queue up beyond the worker count.
class WorkerPool {
public:
    explicit WorkerPool(unsigned n) {
        if (n == 0) n = default_workers();
        for (unsigned i = 0; i < n; ++i) threads_.emplace_back([this] { loop(); });
    }
    ~WorkerPool() {
        {
            std::lock_guard lk(mu_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : threads_) t.join();
    }
    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    void submit(std::function<void()> task) {
        {
            std::lock_guard lk(mu_);
            queue_.push_back(std::move(task));
        }
        cv_.notify_one();
    }

    std::size_t size() const { return threads_.size(); }

private:
    void loop() {
        for (;;) {
            std::function<void()> task;
            {
                std::unique_lock lk(mu_);
                cv_.wait(lk, [&] { return stop_ || !queue_.empty(); });
                if (queue_.empty()) return;
                task = std::move(queue_.front());
                queue_.pop_front();
            }
            task();
        }
    }

    std::vector<std::thread> threads_;
    std::deque<std::function<void()>> queue_;
    std::mutex mu_;
    std::condition_variable cv_;
    bool stop_ = false;
};

namespace service_detail {

inline json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("request body is not JSON: ") + e.what());
    }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    try {
        return j[key].get<T>();
    } catch (const json::exception&) {
        throw SchemaError(std::string("field '") + key + "' has the wrong type");
    }
}

inline void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

inline std::string interval_string(const FeatureInfo& f) {
    auto bound = [](double v) {
        if (std::isinf(v)) return std::string(v < 0 ? "-inf" : "inf");
        return format_double(v);
    };
    return std::string(f.lo_open ? "(" : "[") + bound(f.lo) + "," + bound(f.hi) + (f.hi_open ? ")" : "]");
}

inline GeneratorConfig generator_config(const json& b) {
    GeneratorConfig gc;
    gc.period = get_or(b, "period", 1);
    if (b.contains("length") && !b["length"].is_null()) gc.length = LengthSampler::fixed_length(get_or(b, "length", 0));
    else if (b.contains("length_pool")) gc.length = LengthSampler::from_pool(get_or(b, "length_pool", std::vector<int>{}));
    gc.validate();
    return gc;
}

inline std::vector<NamedSeries> run_generate(const json& b, std::size_t count) {
    const auto seed = get_or<std::uint64_t>(b, "seed", 0);
    std::vector<NamedSeries> out;
    if (b.contains("periods")) {
        MultiSeasonalSpec spec;
        spec.periods = get_or(b, "periods", std::vector<int>{});
        spec.length = get_or(b, "length", 0);
        if (b.contains("weights")) spec.weights = get_or(b, "weights", std::vector<double>{});
        GeneratorConfig tmpl;
        for (std::size_t i = 0; i < count; ++i)
            out.push_back({std::to_string(i + 1), generate_multiseasonal(spec, tmpl, derive_seed(seed, i))});
        return out;
    }
    auto batch = generate_batch(generator_config(b), count, seed);
    for (std::size_t i = 0; i < batch.size(); ++i) out.push_back({std::to_string(i + 1), std::move(batch[i])});
    return out;
}

inline TargetSpec target_from_json(const json& b) {
    TargetSpec t;
    t.period = get_or(b, "period", 1);
    t.length = get_or<std::size_t>(b, "length", 20);
    if (!b.contains("features")) throw SchemaError("tune request needs a features object");
    const json& f = b["features"];
    if (f.is_object()) {
        for (auto it = f.begin(); it != f.end(); ++it) {
            if (!it.value().is_number()) throw SchemaError("feature target " + it.key() + " must be a number");
            t.names.push_back(it.key());
            t.values.push_back(it.value().get<double>());
        }
    } else if (f.is_array()) {
        for (const auto& e : f) {
            if (!e.is_object() || !e.contains("name") || !e.contains("value") || !e["value"].is_number())
                throw SchemaError("feature targets must be {name, value} objects");
            t.names.push_back(e["name"].get<std::string>());
            t.values.push_back(e["value"].get<double>());
        }
    } else {
        throw SchemaError("features must be an object or an array");
    }
    t.validate();
    return t;
}

inline GAConfig ga_config_from_json(const json& b) {
    GAConfig c;
    c.seed = get_or<std::uint64_t>(b, "seed", 0);
    const json ga = b.contains("ga") ? b["ga"] : json::object();
    c.population = get_or<std::size_t>(ga, "population", c.population);
    c.max_generations = get_or(ga, "max_generations", c.max_generations);
    c.crossover_prob = get_or(ga, "crossover_prob", c.crossover_prob);
    c.mutation_prob = get_or(ga, "mutation_prob", c.mutation_prob);
    c.mutation_scale = get_or(ga, "mutation_scale", c.mutation_scale);
    c.tournament = get_or<std::size_t>(ga, "tournament", c.tournament);
    c.elitism = get_or<std::size_t>(ga, "elitism", c.elitism);
    c.tolerance = get_or(ga, "tolerance", c.tolerance);
    c.k_fixed = get_or(ga, "k_fixed", c.k_fixed);
    c.p_fixed = get_or(ga, "p_fixed", c.p_fixed);
    c.validate();
    return c;
}

inline FeatureMatrix feature_matrix_from_json(const json& b) {
    FeatureMatrix fm;
    fm.columns = get_or(b, "columns", std::vector<std::string>{});
    fm.ids = get_or(b, "ids", std::vector<std::string>{});
    if (!b.contains("rows") || !b["rows"].is_array()) throw SchemaError("feature matrix needs a rows array");
    for (const auto& r : b["rows"]) {
        std::vector<std::optional<double>> row;
        for (const auto& v : r) row.push_back(v.is_null() ? std::nullopt : std::optional(v.get<double>()));
        fm.rows.push_back(std::move(row));
    }
    if (fm.ids.empty())
        for (std::size_t i = 0; i < fm.rows.size(); ++i) fm.ids.push_back(std::to_string(i + 1));
    fm.validate();
    return fm;
}

inline std::string new_job_id() {
    static std::atomic<std::uint64_t> counter{0};
    static const std::uint64_t salt = std::random_device{}();
    char buf[40];
    std::snprintf(buf, sizeof buf, "%06llx%010llx", static_cast<unsigned long long>(++counter),
                  static_cast<unsigned long long>(salt & 0xffffffffffULL));
    return buf;
}

}  // namespace service_detail

/// HTTP job service. Jobs run on a bounded pool; each job gets a directory under
/// data_dir holding manifest.json and, once done, result.json.
class Service {
public:
    explicit Service(ServiceConfig cfg) : cfg_(std::move(cfg)), pool_(cfg_.workers) {
        std::filesystem::create_directories(jobs_dir());
        routes();
    }

    ~Service() { stop(); }

    /// Binds and serves until stop(); returns false when the port cannot be bound.
    bool run() {
        if (!bind()) return false;
        return server_.listen_after_bind();
    }

    /// Binds without serving; returns the port or -1.
    int bind() {
        if (bound_port_ > 0) return bound_port_;
        if (cfg_.port == 0) {
            bound_port_ = server_.bind_to_any_port(cfg_.host);
        } else {
            bound_port_ = server_.bind_to_port(cfg_.host, cfg_.port) ? cfg_.port : -1;
        }
        return bound_port_;
    }

    /// Starts serving on a background thread; returns the bound port or -1.
    int start() {
        if (bind() < 0) return -1;
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return bound_port_;
    }

    void stop() {
        stopping_ = true;
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    int port() const { return bound_port_; }
    httplib::Server& server() { return server_; }

    std::shared_ptr<Job> find(const std::string& id) const {
        std::lock_guard lk(mu_);
        auto it = jobs_.find(id);
        return it == jobs_.end() ? nullptr : it->second;
    }

private:
    std::filesystem::path jobs_dir() const { return std::filesystem::path(cfg_.data_dir) / "jobs"; }

    void write_manifest(const Job& job, const json& request) const {
        const auto dir = jobs_dir() / job.id();
        std::filesystem::create_directories(dir);
        json m = job.record();
        m.erase("events");
        m["request"] = request;
        if (job.status() == JobStatus::done) m["result_file"] = "result.json";
        write_text_file((dir / "manifest.json").string(), m.dump(2) + "\n");
    }

    std::string submit(const std::string& kind, const json& request, std::function<json(Job&)> work) {
        auto job = std::make_shared<Job>(service_detail::new_job_id(), kind);
        {
            std::lock_guard lk(mu_);
            jobs_[job->id()] = job;
        }
        job->emit("status", {{"status", "queued"}});
        write_manifest(*job, request);
        pool_.submit([this, job, request, work = std::move(work)] {
            job->transition(JobStatus::running);
            write_manifest(*job, request);
            try {
                json result = work(*job);
                write_text_file((jobs_dir() / job->id() / "result.json").string(), result.dump() + "\n");
                job->finish(std::move(result));
            } catch (const std::exception& e) {
                job->fail(e.what());
            }
            write_manifest(*job, request);
        });
        return job->id();
    }

    void routes() {
        using namespace service_detail;
        server_.set_default_headers({{"Access-Control-Allow-Origin", cfg_.cors_origin},
                                     {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                     {"Access-Control-Allow-Headers", "Content-Type, Last-Event-ID"}});
        server_.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

        server_.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            try {
                std::rethrow_exception(ep);
            } catch (const InvalidArgument& e) {
                send_json(res, 400, {{"error", e.what()}});
            } catch (const SchemaError& e) {
                send_json(res, 400, {{"error", e.what()}});
            } catch (const EmptyDataset& e) {
                send_json(res, 400, {{"error", e.what()}});
            } catch (const TooShort& e) {
                send_json(res, 400, {{"error", e.what()}});
            } catch (const json::exception& e) {
                send_json(res, 400, {{"error", e.what()}});
            } catch (const std::exception& e) {
                send_json(res, 500, {{"error", e.what()}});
            }
        });

        server_.Get("/api/feature-names", [](const httplib::Request& req, httplib::Response& res) {
            std::size_t n = 1;
            if (req.has_param("periods")) n = static_cast<std::size_t>(std::max(1, std::stoi(req.get_param_value("periods"))));
            json cat = feature_catalog_json();
            for (auto& c : cat) c["range"] = interval_string(*find_feature_info(c["name"].get<std::string>()));
            send_json(res, 200, {{"names", feature_names(n)}, {"features", cat}});
        });

        server_.Post("/api/features", [](const httplib::Request& req, httplib::Response& res) {
            json b = parse_body(req);
            json list = b.contains("series") ? b["series"] : json::array({b});
            if (!list.is_array() || list.empty()) throw SchemaError("series must be a non-empty array");
            json out = json::array();
            std::size_t i = 0;
            for (auto s : list) {
                ++i;
                if (!s.contains("id")) s["id"] = std::to_string(i);
                auto ns = series_from_json(s);
                out.push_back(feature_vector_json(ns.id, compute_feature_vector(ns.series)));
            }
            send_json(res, 200, {{"features", out}});
        });

        server_.Post("/api/generate", [this](const httplib::Request& req, httplib::Response& res) {
            json b = parse_body(req);
            const auto count = get_or<std::size_t>(b, "count", 1);
            if (count < 1) throw InvalidArgument("count must be >= 1");
            if (count <= cfg_.sync_generate_limit) {
                json out = json::array();
                for (const auto& s : run_generate(b, count)) out.push_back(to_json(s));
                send_json(res, 200, {{"series", out}});
                return;
            }
            run_generate(b, 1);  // validate before queueing
            auto id = submit("generate", b, [b, count](Job&) {
                json out = json::array();
                for (const auto& s : run_generate(b, count)) out.push_back(to_json(s));
                return json{{"series", out}};
            });
            send_json(res, 202, {{"job_id", id}});
        });

        server_.Post("/api/tune", [this](const httplib::Request& req, httplib::Response& res) {
            json b = parse_body(req);
            TargetSpec t = target_from_json(b);
            GAConfig c = ga_config_from_json(b);
            auto id = submit("tune", b, [t, c](Job& job) {
                auto r = tune_to_target(t, c, [&](const ProgressEvent& ev) { job.emit("progress", to_json(ev, t.names)); });
                return tune_bundle_json(t, c, {r});
            });
            send_json(res, 202, {{"job_id", id}});
        });

        server_.Post("/api/embed", [this](const httplib::Request& req, httplib::Response& res) {
            json b = parse_body(req);
            FeatureMatrix fm = feature_matrix_from_json(b);
            const std::string method = get_or<std::string>(b, "method", "tsne");
            if (method != "pca" && method != "tsne") throw InvalidArgument("method must be pca or tsne");
            TsneOptions opt;
            opt.seed = get_or<std::uint64_t>(b, "seed", 0);
            opt.perplexity = get_or(b, "perplexity", opt.perplexity);
            opt.iterations = get_or(b, "iterations", opt.iterations);
            auto id = submit("embed", b, [fm, method, opt](Job&) {
                auto sm = scale_feature_matrix(fm);
                Embedding2D e = method == "pca" ? pca_embed(sm) : tsne_embed(sm, opt);
                json pts = json::array();
                for (const auto& p : e.points) pts.push_back({p[0], p[1]});
                return json{{"ids", fm.ids}, {"points", pts}, {"method", e.method}, {"seed", e.seed}};
            });
            send_json(res, 202, {{"job_id", id}});
        });

        server_.Post("/api/coverage", [](const httplib::Request& req, httplib::Response& res) {
            json b = parse_body(req);
            auto points = [&](const char* key) {
                Points2D p;
                if (!b.contains(key) || !b[key].is_array()) throw SchemaError(std::string(key) + " must be an array of points");
                for (const auto& q : b[key]) p.push_back({q.at(0).get<double>(), q.at(1).get<double>()});
                return p;
            };
            send_json(res, 200, to_json(coverage_report(points("a"), points("b"), get_or(b, "nb", 30))));
        });

        server_.Post("/api/train-meta", [this](const httplib::Request& req, httplib::Response& res) {
            json b = parse_body(req);
            if (!b.contains("series") || !b["series"].is_array()) throw SchemaError("train-meta needs a series array");
            std::vector<TimeSeries> corpus;
            std::vector<std::string> ids;
            for (const auto& s : b["series"]) {
                auto ns = series_from_json(s);
                ids.push_back(ns.id);
                corpus.push_back(std::move(ns.series));
            }
            QuantileLassoOptions opt;
            opt.tau = get_or(b, "tau", opt.tau);
            opt.folds = get_or(b, "folds", opt.folds);
            auto id = submit("train-meta", json{{"series", corpus.size()}}, [corpus, ids, opt](Job& job) {
                auto table = build_training_table(corpus, ids);
                for (const auto& l : table.log) job.emit("log", {{"message", l}});
                return meta_bundle_to_json(fit_meta_models(table, opt), table.horizons);
            });
            send_json(res, 202, {{"job_id", id}});
        });

        server_.Post("/api/recommend", [](const httplib::Request& req, httplib::Response& res) {
            json b = parse_body(req);
            if (!b.contains("models")) throw SchemaError("recommend needs a models bundle");
            auto models = meta_bundle_from_json(b["models"]);
            FeatureMatrix fm = feature_matrix_from_json(b);
            json out = json::array();
            for (std::size_t i = 0; i < fm.n_rows(); ++i) {
                FeatureVector fv;
                fv.names = fm.columns;
                fv.values = fm.rows[i];
                auto s = predict_and_select(models, fv);
                out.push_back({{"id", fm.ids[i]}, {"method", s.method}, {"predicted", s.predicted},
                               {"weights", averaging_weights(s.predicted)}});
            }
            send_json(res, 200, {{"selections", out}});
        });

        server_.Get(R"(/api/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            auto job = find(req.matches[1]);
            if (!job) return send_json(res, 404, {{"error", "unknown job"}});
            send_json(res, 200, job->record());
        });

        server_.Get(R"(/api/jobs/([^/]+)/result)", [this](const httplib::Request& req, httplib::Response& res) {
            auto job = find(req.matches[1]);
            if (!job) return send_json(res, 404, {{"error", "unknown job"}});
            const auto st = job->status();
            if (st != JobStatus::done) {
                json body = {{"error", "job is not done"}, {"status", to_string(st)}};
                if (st == JobStatus::failed) body["detail"] = job->record().value("error", "");
                return send_json(res, 409, body);
            }
            send_json(res, 200, job->result());
        });

        server_.Get(R"(/api/jobs/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
            auto job = find(req.matches[1]);
            if (!job) return send_json(res, 404, {{"error", "unknown job"}});
            auto next = std::make_shared<std::uint64_t>(0);
            const std::string last = req.has_header("Last-Event-ID") ? req.get_header_value("Last-Event-ID")
                                     : req.has_param("after")       ? req.get_param_value("after")
                                                                    : "";
            if (!last.empty()) {
                try {
                    *next = std::stoull(last);
                } catch (const std::exception&) {
                    throw SchemaError("Last-Event-ID must be a sequence number");
                }
            }
            res.set_header("Cache-Control", "no-cache");
            res.set_chunked_content_provider("text/event-stream", [this, job, next](std::size_t, httplib::DataSink& sink) {
                for (;;) {
                    if (stopping_ || !sink.is_writable()) return false;
                    const bool was_finished = job->finished();
                    auto evs = job->events_after(*next, std::chrono::milliseconds(500));
                    for (const auto& e : evs) {
                        std::string chunk = "id: " + std::to_string(e.seq) + "\nevent: " + e.type +
                                            "\ndata: " + e.data.dump() + "\n\n";
                        if (!sink.write(chunk.data(), chunk.size())) return false;
                        *next = e.seq;
                    }
                    if (was_finished && evs.empty()) {
                        sink.done();
                        return true;
                    }
                }
            });
        });
    }

    ServiceConfig cfg_;
    WorkerPool pool_;
    httplib::Server server_;
    std::thread thread_;
    std::atomic<bool> stopping_{false};
    int bound_port_ = -1;
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Job>> jobs_;
};

}  // namespace gratis
