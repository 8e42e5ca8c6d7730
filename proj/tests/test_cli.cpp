// SPDX-License-Identifier: Apache-2.0

#include "csv_read.hpp"

#include <sree/experiment.hpp>

#include <boost/accumulators/accumulators.hpp>
#include <boost/accumulators/statistics/mean.hpp>
#include <boost/accumulators/statistics/stats.hpp>
#include <boost/accumulators/statistics/variance.hpp>

#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

using namespace sree;
using sree::csv::Csv;
using sree::csv::slurp;
namespace fs = std::filesystem;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinRel;

namespace
{
    fs::path scratch(const std::string &name)
    {
        const fs::path p = fs::temp_directory_path() / ("sree_cli_" + std::to_string(::getpid())) / name;
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }

    void spit(const fs::path &p, const std::string &s) { std::ofstream(p, std::ios::binary) << s; }

    std::string config(const std::string &name) { return std::string(SREE_CONFIG_DIR) + "/" + name; }

    struct Run
    {
        int code;
        std::string err;
    };

    Run sr_ee(const std::string &args, const fs::path &dir, const std::string &env = "")
    {
        const fs::path err = dir / "stderr.txt";
        const std::string cmd = env + " " + SR_EE_BIN + " " + args + " > " + (dir / "stdout.txt").string() + " 2> " +
                                err.string();
        const int status = std::system(cmd.c_str());
        return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
    }

    std::set<std::string> config_keys(const json &j, const std::string &prefix = "")
    {
        std::set<std::string> out;
        for (auto it = j.begin(); it != j.end(); ++it)
        {
            const std::string k = prefix + "/" + it.key();
            out.insert(k);
            if (it.value().is_object())
                for (const auto &s : config_keys(it.value(), k))
                    out.insert(s);
        }
        return out;
    }

    std::set<std::string> schema_keys(const json &schema, const std::string &prefix = "")
    {
        std::set<std::string> out;
        for (auto it = schema["properties"].begin(); it != schema["properties"].end(); ++it)
        {
            const std::string k = prefix + "/" + it.key();
            out.insert(k);
            if (it.value().contains("properties"))
                for (const auto &s : schema_keys(it.value(), k))
                    out.insert(s);
        }
        return out;
    }

    ConfigError parse_error(const std::string &text, const std::string &kind = "individual")
    {
        try
        {
            (void)parse_config(text, kind);
        }
        catch (const ConfigError &e)
        {
            return e;
        }
        FAIL("config was accepted: " << text);
        return ConfigError("");
    }
}

TEST_CASE("published schema lists exactly the accepted keys")
{
    const json schema = json::parse(slurp(fs::path(SREE_CONFIG_DIR) / ".." / "schema" / "config.schema.json"));
    std::set<std::string> accepted = config_keys(default_config_json());
    accepted.insert("/system/circuit_power_w");
    CHECK(schema_keys(schema) == accepted);
}

TEST_CASE("shipped configs parse for their kind")
{
    for (const auto &entry : fs::directory_iterator(SREE_CONFIG_DIR))
    {
        const json j = json::parse(slurp(entry.path()));
        INFO(entry.path().string());
        REQUIRE(j.contains("kind"));
        CHECK_NOTHROW(load_config(entry.path(), j["kind"].get<std::string>()));
    }
}

TEST_CASE("config units are converted once")
{
    const auto cfg = parse_config(R"({"system": {"max_power_dbm": 30, "circuit_power_w": 0.5},
                                      "geometry": {"theta_deg": 90}, "channel": {"k1_db": 10}})",
                                  "individual");
    const Scenario &sc = cfg.scenarios.front();
    CHECK_THAT(sc.params.max_power_w, WithinRel(1.0, 1e-12));
    CHECK(sc.params.circuit_power_w == 0.5);
    CHECK_THAT(sc.geometry.theta, WithinRel(std::numbers::pi / 2, 1e-12));
    CHECK_THAT(sc.channel.K1, WithinRel(10.0, 1e-12));
    CHECK(sc.channel.k3() == sc.channel.K2);
    CHECK(sc.channel.M == 4);
    CHECK(sc.channel.N == 64);

    const auto sweep = parse_config(R"({"sweep": {"parameter": "circuit_power_w", "values": [0, 2]}})", "pareto");
    REQUIRE(sweep.scenarios.size() == 2);
    CHECK(sweep.scenarios[0].params.circuit_power_w == 0.0);
    CHECK(sweep.scenarios[1].params.circuit_power_w == 2.0);
    CHECK(sweep.scenarios[1].sweep_value == 2.0);
}

TEST_CASE("config errors name the line and the key")
{
    CHECK_THAT(parse_error("{\n  \"system\": {\n    \"antennas\": 4,\n    \"antenas\": 5\n  }\n}").what(),
               ContainsSubstring("line 4") && ContainsSubstring("/system/antenas") && ContainsSubstring("unknown key"));
    CHECK_THAT(parse_error("{\n  \"geometry\": {\n\n    \"theta_deg\": \"20\"\n  }\n}").what(),
               ContainsSubstring("line 4") && ContainsSubstring("expected number"));
    CHECK_THAT(parse_error("{\n  \"system\": {\"antennas\": 4.5}\n}").what(), ContainsSubstring("expected integer"));
    CHECK_THAT(parse_error("{\n  \"seed\": 3,\n  \"system\": {\n}").what(), ContainsSubstring("line 4") &&
                                                                            ContainsSubstring("malformed"));
    CHECK_THAT(parse_error("{\"seed\": -1}").what(), ContainsSubstring("non-negative"));
    CHECK_THAT(parse_error("{\"kind\": \"pareto\"}").what(), ContainsSubstring("/kind"));
    CHECK_THAT(parse_error("{\"system\": {\"circuit_power_dbm\": 30, \"circuit_power_w\": 1}}").what(),
               ContainsSubstring("mutually exclusive"));
    CHECK_THAT(parse_error("{\"system\": {\"amplifier_inefficiency\": 0.9}}").what(),
               ContainsSubstring("/system") && ContainsSubstring("mu"));
    CHECK_THAT(parse_error("{\"pareto\": {\"alpha_grid\": [0.2, 1.0]}}", "pareto").what(),
               ContainsSubstring("alpha_grid"));
    CHECK_THAT(parse_error("{\"channel\": {\"corr_sr\": {\"kind\": \"toeplitz\"}}}").what(),
               ContainsSubstring("/channel/corr_sr/kind"));
    CHECK_THAT(parse_error("{\"sweep\": {\"parameter\": \"theta_deg\", \"values\": [10]}}").what(),
               ContainsSubstring("pareto runs only"));
    CHECK_THAT(parse_error("{\"asymptotic\": {\"model\": \"ris_siso\", \"sweep\": \"M\"}}", "asymptotic").what(),
               ContainsSubstring("sweep N"));
}

TEST_CASE("overrides enter the config hash, the output directory does not")
{
    CliOverrides seed_ov, out_ov, grid_ov;
    seed_ov.seed = 7;
    out_ov.out_dir = "elsewhere";
    grid_ov.alpha_grid = std::vector<double>{0.9, 0.2};
    const auto base = parse_config("{}", "pareto");
    const auto seeded = parse_config("{}", "pareto", seed_ov);
    const auto moved = parse_config("{}", "pareto", out_ov);
    const auto grid = parse_config("{}", "pareto", grid_ov);
    CHECK(seeded.seed == 7);
    CHECK(seeded.hash() != base.hash());
    CHECK(moved.out_dir == "elsewhere");
    CHECK(moved.hash() == base.hash());
    CHECK(grid.pareto.alpha_grid == std::vector<double>{0.2, 0.9});
    CHECK(grid.hash() != base.hash());
    CHECK(base.hash().size() == 16);
}

TEST_CASE("individual report carries both anchor pairs")
{
    const fs::path dir = scratch("individual");
    const Run r = sr_ee("individual --config " + config("individual.json") + " --out " + dir.string(), dir);
    REQUIRE(r.code == 0);
    const Csv csv = csv::read(dir / "individual.csv");
    for (const char *c : {"eta_pt_1", "eta_ris_1", "eta_pt_2", "eta_ris_2", "config_hash", "seed"})
        CHECK(std::find(csv.columns.begin(), csv.columns.end(), c) != csv.columns.end());
    REQUIRE(csv.rows.size() == 3);
    const auto &t = csv.rows[0];
    // each anchor wins its own metric
    CHECK(std::stod(t.at("eta_pt_1")) >= std::stod(t.at("eta_pt_2")));
    CHECK(std::stod(t.at("eta_ris_2")) >= std::stod(t.at("eta_ris_1")));
    CHECK(t.at("converged_1") == "1");
    CHECK(t.at("converged_2") == "1");

    const json side = json::parse(slurp(dir / "individual.json"));
    CHECK(side["kind"] == "individual");
    CHECK(side["config_hash"] == csv.rows[0].at("config_hash"));
    CHECK(side["solutions"][0]["pt"]["w"].size() == 4);
    CHECK(side["solutions"][0]["ris"]["phi"].size() == 64);

    const Csv traces = csv::read(dir / "individual_traces.csv");
    REQUIRE(!traces.rows.empty());
    CHECK(traces.rows.front().at("iteration") == "0");
}

TEST_CASE("n_trials rows aggregate to the summary rows")
{
    namespace acc = boost::accumulators;
    const fs::path dir = scratch("trials");
    spit(dir / "cfg.json", R"({"individual": {"n_trials": 50, "T": 2000}})");
    const Run r = sr_ee("individual --config " + (dir / "cfg.json").string() + " --out " + dir.string(), dir);
    REQUIRE(r.code == 0);
    const Csv csv = csv::read(dir / "individual.csv");
    REQUIRE(csv.rows.size() == 52);
    CHECK(csv.rows[50].at("row") == "mean");
    CHECK(csv.rows[51].at("row") == "se");
    CHECK(csv.rows[50].at("trial") == "50");

    std::set<std::string> channels;
    for (const char *col : {"eta_pt_1", "eta_ris_2", "power_1_w", "iterations_2"})
    {
        acc::accumulator_set<double, acc::stats<acc::tag::mean, acc::tag::variance>> a;
        for (int t = 0; t < 50; ++t)
        {
            CHECK(csv.rows[std::size_t(t)].at("trial") == std::to_string(t));
            a(std::stod(csv.rows[std::size_t(t)].at(col)));
            channels.insert(csv.rows[std::size_t(t)].at("eta_pt_1"));
        }
        const double se = std::sqrt(acc::variance(a) * 50.0 / 49.0 / 50.0);
        INFO(col);
        CHECK_THAT(std::stod(csv.rows[50].at(col)), WithinRel(acc::mean(a), 1e-9));
        CHECK_THAT(std::stod(csv.rows[51].at(col)), WithinRel(se, 1e-9));
    }
    CHECK(channels.size() == 50); // independent channel draws per trial
}

TEST_CASE("repeated runs are byte-identical, across thread counts too")
{
    const fs::path a = scratch("repeat_a"), b = scratch("repeat_b"), c = scratch("repeat_c");
    const std::string args = "pareto --config " + config("pareto.json") + " --alpha-grid 0.5,0.9,0.95 --out ";
    REQUIRE(sr_ee(args + a.string(), a, "SR_EE_THREADS=1").code == 0);
    REQUIRE(sr_ee(args + b.string(), b, "SR_EE_THREADS=1").code == 0);
    REQUIRE(sr_ee(args + c.string(), c, "SR_EE_THREADS=3").code == 0);
    for (const char *f : {"pareto.csv", "pareto.json"})
    {
        INFO(f);
        CHECK(slurp(a / f) == slurp(b / f));
        CHECK(slurp(a / f) == slurp(c / f));
    }

    const Csv csv = csv::read(a / "pareto.csv");
    std::multiset<std::string> kinds;
    for (const auto &row : csv.rows)
    {
        kinds.insert(row.at("row"));
        CHECK(row.at("seed") == "1");
        CHECK(row.at("config_hash").size() == 16);
    }
    CHECK(kinds.count("boundary") == 3);
    CHECK(kinds.count("benchmark") == 1);
    CHECK(kinds.count("anchor_pt") == 1);
    CHECK(kinds.count("anchor_ris") == 1);
    CHECK(csv.comments.size() >= 4);
    CHECK_THAT(csv.comments[0], ContainsSubstring(std::string(code_version)));
}

TEST_CASE("seed override changes the draws")
{
    const fs::path a = scratch("seed_a"), b = scratch("seed_b");
    REQUIRE(sr_ee("individual --config " + config("individual.json") + " --out " + a.string(), a).code == 0);
    REQUIRE(sr_ee("individual --config " + config("individual.json") + " --seed 9 --out " + b.string(), b).code == 0);
    const Csv x = csv::read(a / "individual.csv"), y = csv::read(b / "individual.csv");
    CHECK(y.rows[0].at("seed") == "9");
    CHECK(x.rows[0].at("eta_pt_1") != y.rows[0].at("eta_pt_1"));
    CHECK(x.rows[0].at("config_hash") != y.rows[0].at("config_hash"));
}

TEST_CASE("exit codes")
{
    const fs::path dir = scratch("codes");
    spit(dir / "broken.json", "{\n  \"seed\": 1,\n  \"system\": {\"antennas\": }\n}\n");
    spit(dir / "unknown.json", "{\n  \"seed\": 1,\n  \"sytem\": {}\n}\n");

    Run r = sr_ee("individual --config " + (dir / "broken.json").string() + " --out " + dir.string(), dir);
    CHECK(r.code == 2);
    CHECK_THAT(r.err, ContainsSubstring("line 3"));

    r = sr_ee("individual --config " + (dir / "unknown.json").string() + " --out " + dir.string(), dir);
    CHECK(r.code == 2);
    CHECK_THAT(r.err, ContainsSubstring("line 3") && ContainsSubstring("/sytem"));

    CHECK(sr_ee("individual --config " + (dir / "missing.json").string(), dir).code == 2);
    CHECK(sr_ee("pareto --config " + config("individual.json"), dir).code == 2);
    CHECK(sr_ee("individual", dir).code == 2);
    CHECK(sr_ee("frobnicate --config x", dir).code == 2);
    CHECK(sr_ee("pareto --config " + config("pareto.json") + " --alpha-grid 0.5,1.5 --out " + dir.string(), dir).code ==
          2);
}
