#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

Run run(const std::string& args) {
    std::string cmd = std::string(COMMSYNTH_CLI) + " --quiet " + args + " 2>/dev/null";
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    while (std::fgets(buf, sizeof buf, p)) r.out += buf;
    int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string scenario(int k) { return std::string(COMMSYNTH_SCENARIO_DIR) + "/scenario" + std::to_string(k) + ".json"; }

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    auto d = fs::temp_directory_path() / ("commsynth_cli_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST(Cli, ValuePrintsSixDecimals) {
    auto r = run("value " + scenario(2));
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "v* = 1.000000\n");
}

TEST(Cli, InputErrors) {
    EXPECT_EQ(run("value /nonexistent.json").code, 2);
    auto d = scratch("bad");
    std::ofstream(d / "bad.json") << "{not json";
    EXPECT_EQ(run("value " + (d / "bad.json").string()).code, 2);
    EXPECT_EQ(run("").code, 2);
}

TEST(Cli, InfeasibleThresholdExitCode) {
    auto d = scratch("infeasible");
    EXPECT_EQ(run("solve " + scenario(4) + " --threshold 0.99 --restarts 1 --out " + d.string()).code, 4);
}

TEST(Cli, SolveWritesArtifactsAndIsByteStable) {
    auto d1 = scratch("solve1"), d2 = scratch("solve2");
    auto a = run("solve " + scenario(3) + " --seed 3 --out " + d1.string());
    auto b = run("solve " + scenario(3) + " --seed 3 --out " + d2.string());
    ASSERT_EQ(a.code, 0);
    ASSERT_EQ(b.code, 0);
    for (const char* f : {"policy.json", "report.json", "occupancy_agent_0.csv", "occupancy_agent_1.csv",
                          "occupancy_agent_2.csv"})
        EXPECT_TRUE(fs::exists(d1 / f)) << f;
    auto report = nlohmann::json::parse(slurp(d1 / "report.json"));
    EXPECT_LE(report["dbar_value"].get<double>(), 1e-4);
    EXPECT_NEAR(report["achieved_value"].get<double>(), 1.0, 1e-9);
    // only wall-clock timings differ between runs
    auto strip = [](nlohmann::json j) {
        j.erase("timings");
        return j;
    };
    auto p1 = nlohmann::json::parse(slurp(d1 / "policy.json"));
    auto p2 = nlohmann::json::parse(slurp(d2 / "policy.json"));
    p1["report"] = strip(p1["report"]);
    p2["report"] = strip(p2["report"]);
    EXPECT_EQ(p1.dump(), p2.dump());
    EXPECT_EQ(slurp(d1 / "occupancy_agent_1.csv"), slurp(d2 / "occupancy_agent_1.csv"));
}

TEST(Cli, EvaluateAndSimulate) {
    auto d = scratch("eval");
    ASSERT_EQ(run("solve " + scenario(2) + " --out " + d.string()).code, 0);
    auto policy = (d / "policy.json").string();
    auto e = run("evaluate " + scenario(2) + " " + policy);
    EXPECT_EQ(e.code, 0);
    EXPECT_NE(e.out.find("satisfied = true"), std::string::npos);
    EXPECT_NE(e.out.find("bound = 0\n"), std::string::npos) << e.out;
    auto full = run("evaluate " + scenario(2) + " " + policy + " --K 3");
    EXPECT_EQ(full.code, 0);
    EXPECT_NE(full.out.find("gap = 0\n"), std::string::npos) << full.out;

    auto t1 = (d / "t1.txt").string(), t2 = (d / "t2.txt").string();
    auto s1 = run("simulate " + scenario(2) + " " + policy + " --episodes 200 --seed 4 --mode restricted --trajectories " + t1);
    auto s2 = run("simulate " + scenario(2) + " " + policy + " --episodes 200 --seed 4 --mode restricted --trajectories " + t2);
    EXPECT_EQ(s1.code, 0);
    EXPECT_EQ(s1.out, s2.out);
    EXPECT_EQ(slurp(t1), slurp(t2));
    EXPECT_EQ(run("simulate " + scenario(2) + " " + policy + " --episodes 0").code, 2);
    EXPECT_EQ(run("simulate " + scenario(2) + " " + policy + " --mode sideways").code, 2);
}

TEST(Cli, GuardExitCode) {
    auto d = scratch("guard");
    // two robots that may idle at their start; idling forever never terminates the chain
    nlohmann::json agent = {{"name", "R"},
                            {"states", {0, 1}},
                            {"region_of_state", {0, 1}},
                            {"actions", {"0", "4"}},
                            {"remain_action", "4"},
                            {"init", 0},
                            {"transitions", {{0, "0", 1.0, 1}, {0, "4", 1.0, 0}, {1, "4", 1.0, 1}}}};
    nlohmann::json cfg = {{"name", "idle"},
                          {"K", 1},
                          {"avoid_rule", "none"},
                          {"targets", {{"per_agent", {{1}, {1}}}}},
                          {"agents", {agent, agent}}};
    auto sc = (d / "idle.json").string();
    std::ofstream(sc) << cfg.dump();
    ASSERT_EQ(run("solve " + sc + " --restarts 1 --out " + d.string()).code, 0);
    auto j = nlohmann::json::parse(slurp(d / "policy.json"));
    nlohmann::json act = nlohmann::json::object();
    for (auto& [k, v] : j["action_policy"].items()) act[k] = {{"(4,4)", 1.0}};
    for (auto& k : j["zero_mass_states"]) act[k.get<std::string>()] = {{"(4,4)", 1.0}};
    j["action_policy"] = act;
    j["zero_mass_states"] = nlohmann::json::array();
    std::ofstream(d / "stuck.json") << j.dump();
    EXPECT_EQ(run("evaluate " + sc + " " + (d / "stuck.json").string()).code, 5);
}

TEST(Cli, BaselineOrdering) {
    auto r = run("baseline-tc " + scenario(2) + " --restarts 20");
    ASSERT_EQ(r.code, 0);
    double tc_min = 0, tc_ours = 0, d_tc = 0;
    std::istringstream in(r.out);
    std::string line;
    while (std::getline(in, line)) {
        auto eq = line.find(" = ");
        if (eq == std::string::npos) continue;
        auto key = line.substr(0, eq);
        double v = std::stod(line.substr(eq + 3));
        if (key == "tc_min") tc_min = v;
        if (key == "tc_ours") tc_ours = v;
        if (key == "dbar_tc_policy") d_tc = v;
    }
    EXPECT_LT(tc_min, tc_ours);
    EXPECT_GT(d_tc, 0.0);
}
