#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>
#include <thread>

#include <gratis/service.hpp>

using namespace gratis;
namespace fs = std::filesystem;

namespace {

const char* kMonthlyTarget = R"({
  "period": 12, "length": 120, "seed": 5,
  "features": {"nsdiffs": 1, "x.acf1": 0.85, "entropy": 0.55, "stability": 0.73,
               "trend": 0.91, "seasonal.strength": 0.95, "garch.r2": 0.07},
  "ga": {"max_generations": 8, "tolerance": 0.0}
})";

struct SseEvent {
    std::uint64_t id = 0;
    std::string type;
    json data;
};

std::vector<SseEvent> parse_sse(const std::string& body) {
    std::vector<SseEvent> out;
    std::stringstream ss(body);
    std::string line;
    SseEvent cur;
    while (std::getline(ss, line)) {
        if (line.rfind("id: ", 0) == 0) cur.id = std::stoull(line.substr(4));
        else if (line.rfind("event: ", 0) == 0) cur.type = line.substr(7);
        else if (line.rfind("data: ", 0) == 0) cur.data = json::parse(line.substr(6));
        else if (line.empty() && cur.id) {
            out.push_back(cur);
            cur = {};
        }
    }
    return out;
}

class ServiceTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / "gratis_service_test";
        fs::remove_all(dir_);
        ServiceConfig cfg;
        cfg.port = 0;
        cfg.data_dir = dir_.string();
        cfg.workers = 2;
        cfg.sync_generate_limit = 5;
        svc_ = std::make_unique<Service>(cfg);
        port_ = svc_->start();
        ASSERT_GT(port_, 0);
        cli_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
        cli_->set_read_timeout(120, 0);
    }
    void TearDown() override {
        cli_.reset();
        svc_.reset();
    }

    std::string wait_done(const std::string& id) {
        for (int i = 0; i < 6000; ++i) {
            auto r = cli_->Get("/api/jobs/" + id);
            if (!r) return "no-response";
            auto st = json::parse(r->body)["status"].get<std::string>();
            if (st == "done" || st == "failed") return st;
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
        }
        return "timeout";
    }

    fs::path dir_;
    std::unique_ptr<Service> svc_;
    std::unique_ptr<httplib::Client> cli_;
    int port_ = -1;
};

}  // namespace

TEST_F(ServiceTest, FeatureNamesCarryRanges) {
    auto r = cli_->Get("/api/feature-names");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 200);
    EXPECT_EQ(r->get_header_value("Access-Control-Allow-Origin"), "*");
    auto j = json::parse(r->body);
    EXPECT_EQ(j["names"].get<std::vector<std::string>>(), feature_names(1));
    bool found = false;
    for (const auto& f : j["features"])
        if (f["name"] == "entropy") {
            found = true;
            EXPECT_EQ(f["range"], "(0,1]");
            EXPECT_FALSE(f["seasonal_only"].get<bool>());
        } else if (f["name"] == "seasonal.strength") {
            EXPECT_TRUE(f["seasonal_only"].get<bool>());
        }
    EXPECT_TRUE(found);
}

TEST_F(ServiceTest, UnknownJobIs404) {
    EXPECT_EQ(cli_->Get("/api/jobs/unknown")->status, 404);
    EXPECT_EQ(cli_->Get("/api/jobs/unknown/result")->status, 404);
    EXPECT_EQ(cli_->Get("/api/jobs/unknown/events")->status, 404);
}

TEST_F(ServiceTest, CorsPreflight) {
    auto r = cli_->Options("/api/tune");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 204);
    EXPECT_NE(r->get_header_value("Access-Control-Allow-Methods").find("POST"), std::string::npos);
}

TEST_F(ServiceTest, SchemaViolationsAre400) {
    EXPECT_EQ(cli_->Post("/api/tune", "not json", "application/json")->status, 400);
    EXPECT_EQ(cli_->Post("/api/tune", R"({"period": 1, "features": {"seasonal.strength": 0.9}})", "application/json")->status,
              400);
    EXPECT_EQ(cli_->Post("/api/tune", R"({"features": {"bogus": 1}})", "application/json")->status, 400);
    EXPECT_EQ(cli_->Post("/api/generate", R"({"count": 0})", "application/json")->status, 400);
    EXPECT_EQ(cli_->Post("/api/features", R"({"series": [{"values": []}]})", "application/json")->status, 400);
}

TEST_F(ServiceTest, SmallGenerateIsSynchronous) {
    auto r = cli_->Post("/api/generate", R"({"period": 12, "count": 3, "length": 60, "seed": 7})", "application/json");
    ASSERT_TRUE(r);
    ASSERT_EQ(r->status, 200);
    auto j = json::parse(r->body);
    ASSERT_EQ(j["series"].size(), 3u);
    for (const auto& s : j["series"]) EXPECT_EQ(s["values"].size(), 60u);
    // same request, same bytes
    auto r2 = cli_->Post("/api/generate", R"({"period": 12, "count": 3, "length": 60, "seed": 7})", "application/json");
    EXPECT_EQ(r->body, r2->body);
}

TEST_F(ServiceTest, LargeGenerateBecomesAJob) {
    auto r = cli_->Post("/api/generate", R"({"period": 4, "count": 20, "seed": 1})", "application/json");
    ASSERT_TRUE(r);
    ASSERT_EQ(r->status, 202);
    const auto id = json::parse(r->body)["job_id"].get<std::string>();
    ASSERT_EQ(wait_done(id), "done");
    auto res = cli_->Get("/api/jobs/" + id + "/result");
    ASSERT_EQ(res->status, 200);
    EXPECT_EQ(json::parse(res->body)["series"].size(), 20u);
    EXPECT_TRUE(fs::exists(dir_ / "jobs" / id / "manifest.json"));
    EXPECT_TRUE(fs::exists(dir_ / "jobs" / id / "result.json"));
    auto manifest = json::parse(read_text_file((dir_ / "jobs" / id / "manifest.json").string()));
    EXPECT_EQ(manifest["status"], "done");
    EXPECT_EQ(manifest["kind"], "generate");
}

TEST_F(ServiceTest, FeaturesEndpoint) {
    auto r = cli_->Post("/api/features", R"({"series": [{"id": "a", "values": [1,3,2,5,4,6,5,8,7,9,8,11], "periods": [1]}]})",
                        "application/json");
    ASSERT_TRUE(r);
    ASSERT_EQ(r->status, 200);
    auto f = json::parse(r->body)["features"][0];
    EXPECT_EQ(f["id"], "a");
    EXPECT_EQ(f["features"]["length"], 12.0);
    // too short for the ten-lag autocorrelation sums
    EXPECT_TRUE(f["features"]["x.acf10"].is_null());
}

TEST_F(ServiceTest, TuneJobStreamsOrderedProgress) {
    auto r = cli_->Post("/api/tune", kMonthlyTarget, "application/json");
    ASSERT_TRUE(r);
    ASSERT_EQ(r->status, 202);
    const auto id = json::parse(r->body)["job_id"].get<std::string>();

    // the stream stays open until the job ends, so this returns once it is done
    std::string body;
    auto ev = cli_->Get("/api/jobs/" + id + "/events", [&](const char* d, std::size_t n) {
        body.append(d, n);
        return true;
    });
    ASSERT_TRUE(ev);
    EXPECT_EQ(ev->get_header_value("Content-Type"), "text/event-stream");
    auto events = parse_sse(body);
    ASSERT_FALSE(events.empty());
    for (std::size_t i = 0; i < events.size(); ++i) EXPECT_EQ(events[i].id, i + 1);
    double last = -std::numeric_limits<double>::infinity();
    int progress = 0;
    for (const auto& e : events)
        if (e.type == "progress") {
            const double f = e.data["best_fitness"].get<double>();
            EXPECT_GE(f, last);
            last = f;
            EXPECT_EQ(e.data["generation"].get<int>(), progress++);
            EXPECT_TRUE(e.data["best_feature_values"].contains("entropy"));
        }
    EXPECT_EQ(progress, 9);
    EXPECT_EQ(events.front().data["status"], "queued");
    EXPECT_EQ(events.back().data["status"], "done");

    auto res = cli_->Get("/api/jobs/" + id + "/result");
    ASSERT_EQ(res->status, 200);
    auto bundle = json::parse(res->body);
    EXPECT_EQ(bundle["results"][0]["series"]["values"].size(), 120u);
    EXPECT_EQ(bundle["results"][0]["trace"].size(), 9u);

    // resuming after event 3 replays exactly the tail
    httplib::Headers h{{"Last-Event-ID", "3"}};
    std::string tail;
    cli_->Get("/api/jobs/" + id + "/events", h, [&](const char* d, std::size_t n) {
        tail.append(d, n);
        return true;
    });
    auto rest = parse_sse(tail);
    ASSERT_EQ(rest.size(), events.size() - 3);
    EXPECT_EQ(rest.front().id, 4u);
}

TEST_F(ServiceTest, ResultBeforeDoneIs409) {
    auto r = cli_->Post("/api/tune", R"({"period": 12, "length": 240, "seed": 1,
        "features": {"trend": 0.5, "seasonal.strength": 0.99},
        "ga": {"max_generations": 40, "tolerance": 0.0, "population": 40}})",
                        "application/json");
    ASSERT_EQ(r->status, 202);
    const auto id = json::parse(r->body)["job_id"].get<std::string>();
    auto early = cli_->Get("/api/jobs/" + id + "/result");
    ASSERT_TRUE(early);
    EXPECT_EQ(early->status, 409);
    auto rec = json::parse(cli_->Get("/api/jobs/" + id)->body);
    EXPECT_EQ(rec["kind"], "tune");
    EXPECT_TRUE(rec["status"] == "queued" || rec["status"] == "running");
}

TEST(Job, StatusOnlyMovesForward) {
    Job j("x", "tune");
    EXPECT_TRUE(j.transition(JobStatus::running));
    EXPECT_FALSE(j.transition(JobStatus::queued));
    j.finish(json{{"ok", true}});
    EXPECT_EQ(j.status(), JobStatus::done);
    EXPECT_FALSE(j.transition(JobStatus::failed));
    auto ev = j.events_after(0, std::chrono::milliseconds(0));
    ASSERT_EQ(ev.size(), 2u);
    EXPECT_EQ(ev[0].seq, 1u);
    EXPECT_EQ(ev[1].seq, 2u);
}
