#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include <gratis/cli.hpp>
#include <gratis/io.hpp>

using namespace gratis;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / ("gratis_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run(const std::vector<std::string>& args, std::string* out = nullptr, std::string* err = nullptr) {
    std::ostringstream o, e;
    int rc = run_cli(args, o, e);
    if (out) *out = o.str();
    if (err) *err = e.str();
    return rc;
}

int run_binary(const std::string& args) {
    const std::string cmd = std::string(GRATIS_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) { return read_text_file(p.string()); }

}  // namespace

TEST(Io, JsonlRoundTripKeepsValuesAndOrigin) {
    GeneratorConfig gc;
    gc.period = 12;
    gc.length = LengthSampler::fixed_length(48);
    auto batch = generate_batch(gc, 3, 9, 1);
    std::vector<NamedSeries> named;
    for (std::size_t i = 0; i < batch.size(); ++i) named.push_back({"s" + std::to_string(i), batch[i]});
    std::stringstream ss;
    write_jsonl(ss, named);
    auto back = read_jsonl(ss);
    ASSERT_EQ(back.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(back[i].id, named[i].id);
        EXPECT_EQ(back[i].series.values, named[i].series.values);
        EXPECT_EQ(back[i].series.periods, std::vector<int>{12});
        ASSERT_TRUE(back[i].series.origin.has_value());
        const auto& o = *back[i].series.origin;
        // the stored model, seed and burn-in regenerate the series exactly
        auto again = simulate_mar(o.models.at(0), 48, o.burn_ins.at(0), o.seeds.at(0));
        EXPECT_EQ(again.values, named[i].series.values);
    }
}

TEST(Io, MultiSeasonalJsonlRoundTrip) {
    MultiSeasonalSpec spec;
    spec.periods = {24, 168};
    spec.length = 400;
    NamedSeries s{"m", generate_multiseasonal(spec, GeneratorConfig{}, 4)};
    std::stringstream ss;
    write_jsonl(ss, {s});
    auto back = read_jsonl(ss);
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0].series.values, s.series.values);
    EXPECT_EQ(back[0].series.periods, (std::vector<int>{24, 168}));
    ASSERT_TRUE(back[0].series.origin);
    EXPECT_EQ(back[0].series.origin->models.size(), 2u);
    EXPECT_EQ(back[0].series.origin->weights, s.series.origin->weights);
}

TEST(Io, LongCsvRoundTrip) {
    std::vector<NamedSeries> named{{"a", {}}, {"b", {}}};
    named[0].series.values = {1.5, -2.25, 1e-300, 0.1};
    named[0].series.periods = {4};
    named[1].series.values = {3.0, 1.0 / 3.0};
    std::stringstream csv, side;
    write_long_csv(csv, side, named);
    auto back = read_long_csv(csv, json::parse(side.str()));
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].series.values, named[0].series.values);
    EXPECT_EQ(back[0].series.periods, std::vector<int>{4});
    EXPECT_EQ(back[1].series.values, named[1].series.values);
    EXPECT_EQ(back[1].series.periods, std::vector<int>{1});
}

TEST(Io, SchemaViolationsAreRejected) {
    std::stringstream a("{\"id\":\"x\",\"values\":[]}\n");
    EXPECT_THROW(read_jsonl(a), SchemaError);
    std::stringstream b("{\"id\":\"x\",\"values\":[1,2],\"periods\":[]}\n");
    EXPECT_THROW(read_jsonl(b), SchemaError);
    std::stringstream c("not json\n");
    EXPECT_THROW(read_jsonl(c), SchemaError);
    std::stringstream d("id,t,value\nx,2,1.0\n");
    EXPECT_THROW(read_long_csv(d, std::nullopt), SchemaError);
    std::stringstream e("id,t,value\nx,1,abc\n");
    EXPECT_THROW(read_long_csv(e, std::nullopt), SchemaError);
    std::stringstream f("id,no.such.feature\nx,1\n");
    EXPECT_THROW(read_feature_csv(f), SchemaError);
}

TEST(Io, FeatureCsvRoundTripKeepsAbsentCells) {
    FeatureMatrix fm;
    fm.columns = {"trend", "seasonal.strength", "entropy"};
    fm.ids = {"a", "b"};
    fm.rows = {{0.5, std::nullopt, 0.75}, {1.0 / 3.0, 0.2, std::nullopt}};
    std::stringstream ss;
    write_feature_csv(ss, fm);
    auto back = read_feature_csv(ss);
    EXPECT_EQ(back.columns, fm.columns);
    EXPECT_EQ(back.ids, fm.ids);
    EXPECT_EQ(back.rows, fm.rows);
}

TEST(Io, MetaModelBundleRoundTrip) {
    MetaModel m;
    m.method = "theta";
    m.feature_names = {"trend", "entropy"};
    m.scaler.centers = {0.1, 0.2};
    m.scaler.scales = {1.0, 0.5};
    m.dropped = {false, true};
    m.coefficients = {1.0, -0.25, 0.0};
    m.omega = {2.0, 0.0};
    m.lambda = 0.3;
    auto back = meta_bundle_from_json(json::parse(meta_bundle_to_json({m}, {6}).dump()));
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0].method, "theta");
    EXPECT_EQ(back[0].coefficients, m.coefficients);
    EXPECT_EQ(back[0].dropped, m.dropped);
    std::vector<std::optional<double>> row{0.6, 0.9};
    EXPECT_EQ(back[0].predict(row), m.predict(row));
    json broken = meta_bundle_to_json({m});
    broken["models"][0]["coefficients"] = {1.0};
    EXPECT_THROW(meta_bundle_from_json(broken), SchemaError);
}

TEST(Cli, GenerateMonthlyBatch) {
    auto dir = scratch_dir("gen");
    std::string out;
    ASSERT_EQ(run({"generate", "--period", "12", "--count", "10", "--length", "120", "--seed", "7", "-o",
                   (dir / "out.jsonl").string()},
                  &out),
              0);
    EXPECT_NE(out.find("10 series"), std::string::npos);
    EXPECT_NE(out.find("seed 7"), std::string::npos);
    auto batch = read_series_file((dir / "out.jsonl").string());
    ASSERT_EQ(batch.size(), 10u);
    for (const auto& s : batch) {
        EXPECT_EQ(s.series.size(), 120u);
        EXPECT_EQ(s.series.periods, std::vector<int>{12});
    }
}

TEST(Cli, GenerateIsByteIdentical) {
    auto dir = scratch_dir("det");
    for (const char* ext : {"jsonl", "csv"}) {
        for (int k = 0; k < 2; ++k)
            ASSERT_EQ(run({"generate", "--period", "4", "--count", "20", "--seed", "11", "-o",
                           (dir / ("r" + std::to_string(k) + "." + ext)).string()}),
                      0);
        EXPECT_EQ(slurp(dir / (std::string("r0.") + ext)), slurp(dir / (std::string("r1.") + ext)));
    }
}

TEST(Cli, CsvAndJsonlCarryTheSameSeries) {
    auto dir = scratch_dir("fmt");
    ASSERT_EQ(run({"generate", "--period", "12", "--count", "5", "--seed", "3", "-o", (dir / "a.jsonl").string()}), 0);
    ASSERT_EQ(run({"generate", "--period", "12", "--count", "5", "--seed", "3", "-o", (dir / "a.csv").string()}), 0);
    auto j = read_series_file((dir / "a.jsonl").string());
    auto c = read_series_file((dir / "a.csv").string());
    ASSERT_EQ(j.size(), c.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        EXPECT_EQ(j[i].series.values, c[i].series.values);
        EXPECT_EQ(j[i].series.periods, c[i].series.periods);
    }
    // both feed the features command identically
    ASSERT_EQ(run({"features", "-i", (dir / "a.jsonl").string(), "-o", (dir / "fj.csv").string()}), 0);
    ASSERT_EQ(run({"features", "-i", (dir / "a.csv").string(), "-o", (dir / "fc.csv").string()}), 0);
    EXPECT_EQ(slurp(dir / "fj.csv"), slurp(dir / "fc.csv"));
}

TEST(Cli, FeaturesOnSingleSeries) {
    auto dir = scratch_dir("feat");
    ASSERT_EQ(run({"generate", "--count", "1", "--seed", "2", "-o", (dir / "one.jsonl").string()}), 0);
    std::string out;
    ASSERT_EQ(run({"features", "-i", (dir / "one.jsonl").string()}, &out), 0);
    std::stringstream ss(out);
    auto fm = read_feature_csv(ss);
    EXPECT_EQ(fm.n_rows(), 1u);
    EXPECT_EQ(fm.columns, feature_names(1));
    EXPECT_EQ(fm.ids[0], "1");
}

TEST(Cli, ExitCodes) {
    auto dir = scratch_dir("codes");
    const auto o = (dir / "x.json").string();
    EXPECT_EQ(run({"generate", "--count", "0", "-o", o}), 2);
    EXPECT_EQ(run({"generate", "--count", "1"}), 2);
    EXPECT_EQ(run({"generate", "--bogus"}), 2);
    EXPECT_EQ(run({}), 2);
    EXPECT_EQ(run({"--help"}), 0);
    EXPECT_EQ(run({"tune", "--feature", "trend=0.9", "--period", "1", "--feature", "seasonal.strength=0.9", "-o", o}), 2);
    std::string err;
    EXPECT_EQ(run({"tune", "--feature", "no.such=1", "-o", o}, nullptr, &err), 2);
    EXPECT_NE(err.find("seasonal.strength"), std::string::npos);
    EXPECT_EQ(run({"tune", "--feature", "trend", "-o", o}), 2);
    EXPECT_EQ(run({"features", "-i", (dir / "missing.jsonl").string()}), 2);
    std::ofstream(dir / "bad.jsonl") << "{\"id\":\"a\",\"values\":[1,null]}\n";
    EXPECT_EQ(run({"features", "-i", (dir / "bad.jsonl").string()}), 2);
    EXPECT_EQ(run({"recommend", "-i", (dir / "bad.jsonl").string(), "--models", (dir / "none.json").string()}), 2);
}

TEST(Cli, BinaryExitCodes) {
    auto dir = scratch_dir("bin");
    EXPECT_EQ(run_binary("generate --count 0 -o " + (dir / "x.jsonl").string()), 2);
    EXPECT_EQ(run_binary("generate --count 2 --seed 1 -o " + (dir / "x.jsonl").string()), 0);
}

TEST(Cli, PrecedenceFlagsEnvConfigDefaults) {
    auto dir = scratch_dir("prec");
    const auto cfg = (dir / "c.json").string();
    std::ofstream(cfg) << R"({"length": 30, "generate": {"seed": 5, "count": 2}})";
    auto gen = [&](const std::string& name, std::vector<std::string> extra) {
        std::vector<std::string> a{"--config", cfg, "generate", "-o", (dir / name).string()};
        a.insert(a.end(), extra.begin(), extra.end());
        EXPECT_EQ(run(a), 0);
        return read_series_file((dir / name).string());
    };
    auto plain = [&](const std::string& name, const std::string& seed) {
        EXPECT_EQ(run({"generate", "--count", "2", "--length", "30", "--seed", seed, "-o", (dir / name).string()}), 0);
        return slurp(dir / name);
    };
    gen("c.jsonl", {});
    EXPECT_EQ(slurp(dir / "c.jsonl"), plain("p5.jsonl", "5"));

    ::setenv("GRATIS_SEED", "6", 1);
    gen("e.jsonl", {});
    gen("f.jsonl", {"--seed", "8"});
    ::unsetenv("GRATIS_SEED");
    EXPECT_EQ(slurp(dir / "e.jsonl"), plain("p6.jsonl", "6"));
    EXPECT_EQ(slurp(dir / "f.jsonl"), plain("p8.jsonl", "8"));
}

TEST(Cli, CoverageOfIdenticalInputsIsZero) {
    auto dir = scratch_dir("cov");
    ASSERT_EQ(run({"generate", "--count", "40", "--seed", "4", "-o", (dir / "s.jsonl").string()}), 0);
    ASSERT_EQ(run({"features", "-i", (dir / "s.jsonl").string(), "-o", (dir / "f.csv").string()}), 0);
    ASSERT_EQ(run({"embed", "-i", (dir / "f.csv").string(), "--method", "pca", "-o", (dir / "e.csv").string()}), 0);
    std::string out;
    ASSERT_EQ(run({"coverage", "-a", (dir / "e.csv").string(), "-b", (dir / "e.csv").string()}, &out), 0);
    EXPECT_EQ(out, "miscoverage(a,b) 0\nmiscoverage(b,a) 0\n");
}

TEST(Cli, TrainAndRecommendOneSelectionPerRow) {
    auto dir = scratch_dir("meta");
    ASSERT_EQ(run({"generate", "--count", "120", "--seed", "1", "-o", (dir / "tr.jsonl").string()}), 0);
    ASSERT_EQ(run({"generate", "--count", "7", "--seed", "2", "-o", (dir / "te.jsonl").string()}), 0);
    ASSERT_EQ(run({"train-meta", "-i", (dir / "tr.jsonl").string(), "-o", (dir / "m.json").string()}), 0);
    ASSERT_EQ(run({"features", "-i", (dir / "te.jsonl").string(), "-o", (dir / "f.csv").string()}), 0);
    std::string out;
    ASSERT_EQ(run({"recommend", "-i", (dir / "f.csv").string(), "--models", (dir / "m.json").string()}, &out), 0);
    auto j = json::parse(out);
    ASSERT_EQ(j["selections"].size(), 7u);
    for (const auto& s : j["selections"]) {
        const std::string m = s["method"].get<std::string>();
        EXPECT_NO_THROW(parse_method(m));
        double sum = 0.0;
        for (auto& [k, w] : s["weights"].items()) sum += w.get<double>();
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(Cli, TuneBundleIsDeterministic) {
    auto dir = scratch_dir("tune");
    std::vector<std::string> base{"tune", "--period", "4", "--length", "40", "--feature", "trend=0.8",
                                  "--feature", "seasonal.strength=0.6", "--generations", "4", "--seed", "3"};
    auto a = base, b = base;
    a.insert(a.end(), {"-o", (dir / "a.json").string()});
    b.insert(b.end(), {"-o", (dir / "b.json").string()});
    std::string out;
    ASSERT_EQ(run(a, &out), 0);
    EXPECT_NE(out.find("fitness"), std::string::npos);
    ASSERT_EQ(run(b), 0);
    EXPECT_EQ(slurp(dir / "a.json"), slurp(dir / "b.json"));
    auto j = json::parse(slurp(dir / "a.json"));
    const auto& r = j["results"][0];
    EXPECT_EQ(r["series"]["values"].size(), 40u);
    EXPECT_TRUE(r["model"].contains("components"));
    EXPECT_GE(r["trace"].size(), 1u);
}
