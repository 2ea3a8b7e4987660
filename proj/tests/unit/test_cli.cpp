#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "arcdrift/cli.hpp"

using namespace arcdrift;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("arcdrift_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        // Small world so every subcommand runs quickly.
        write_file(p("small.json"), R"({"dim": 12, "steps": 20, "success_count": 20, "noise": 0.002,
            "field": {"ranks": [2, 2, 2]},
            "drift": {"SC": {"onset": 5}, "SA": {"onset": 8}, "KG": {"onset": 11}}})");
    }
    void TearDown() override {
        unsetenv("ARC_THREADS");
        fs::remove_all(dir_);
    }
    std::string p(const std::string& name) const { return (dir_ / name).string(); }
    fs::path dir_;
};

} // namespace

TEST_F(Cli, UnknownSubcommandAndFlag) {
    auto r = run({"frobnicate"});
    EXPECT_EQ(r.code, kExitUsage);
    EXPECT_NE(r.err.find("Usage"), std::string::npos);
    r = run({"detect", "--manifold", "a", "--in", "b", "--bogus"});
    EXPECT_EQ(r.code, kExitUsage);
    EXPECT_NE(r.err.find("Usage"), std::string::npos);
    EXPECT_EQ(run({}).code, kExitUsage);
    EXPECT_EQ(run({"simulate"}).code, kExitUsage); // --out is required
}

TEST_F(Cli, HelpPerSubcommand) {
    for (const std::string sub : {"simulate", "manifold", "detect", "arc", "control", "ablate", "cluster", "diagnose",
                                  "calibrate-theta", "report"}) {
        const auto r = run({sub, "--help"});
        EXPECT_EQ(r.code, kExitOk) << sub;
        EXPECT_NE(r.out.find(sub), std::string::npos) << sub;
    }
    EXPECT_EQ(run({"--version"}).out, std::string(kToolVersion) + "\n");
}

TEST_F(Cli, DataErrorsExitTwo) {
    EXPECT_EQ(run({"manifold", "--in", p("absent.arct"), "--out", p("m.arcm")}).code, kExitData);
    ASSERT_EQ(run({"simulate", "--config", p("small.json"), "--set", "success", "--out", p("s.arct")}).code, kExitOk);
    const std::string bytes = read_file(p("s.arct"));
    write_file(p("cut.arct"), bytes.substr(0, bytes.size() - 1));
    const auto r = run({"manifold", "--in", p("cut.arct"), "--out", p("m.arcm")});
    EXPECT_EQ(r.code, kExitData);
    EXPECT_NE(r.err.find("expected"), std::string::npos) << r.err;
    EXPECT_EQ(run({"simulate", "--config", p("absent.json"), "--out", p("x.arct")}).code, kExitData);
}

TEST_F(Cli, UsageErrorsFromValues) {
    EXPECT_EQ(run({"simulate", "--config", p("small.json"), "--set", "weird", "--out", p("x.arct")}).code, kExitUsage);
    EXPECT_EQ(run({"simulate", "--config", p("small.json"), "--axis", "XX", "--out", p("x.arct")}).code, kExitUsage);
    write_file(p("bad.json"), R"({"dimension": 3})");
    EXPECT_EQ(run({"simulate", "--config", p("bad.json"), "--out", p("x.arct")}).code, kExitUsage);
}

TEST_F(Cli, SimulateIsByteReproducible) {
    ASSERT_EQ(run({"simulate", "--config", p("small.json"), "--seed", "5", "--out", p("a.arct")}).code, 0);
    ASSERT_EQ(run({"simulate", "--config", p("small.json"), "--seed", "5", "--out", p("b.arct")}).code, 0);
    ASSERT_EQ(run({"simulate", "--config", p("small.json"), "--seed", "6", "--out", p("c.arct")}).code, 0);
    EXPECT_EQ(read_file(p("a.arct")), read_file(p("b.arct")));
    EXPECT_NE(read_file(p("a.arct")), read_file(p("c.arct")));
    const auto set = read_trajectories(p("a.arct"));
    EXPECT_EQ(set.trajectories.size(), 23u);
    EXPECT_EQ(set.metadata["seed"], 5);
}

TEST_F(Cli, DetectDefaultsToThreeAndFindsOnsets) {
    ASSERT_EQ(run({"simulate", "--config", p("small.json"), "--set", "success", "--out", p("s.arct")}).code, 0);
    ASSERT_EQ(run({"simulate", "--config", p("small.json"), "--set", "drift", "--count", "2", "--out", p("d.arct")}).code, 0);
    ASSERT_EQ(run({"manifold", "--in", p("s.arct"), "--out", p("m.arcm")}).code, 0);
    const auto def = run({"detect", "--manifold", p("m.arcm"), "--in", p("d.arct")});
    const auto three = run({"detect", "--manifold", p("m.arcm"), "--in", p("d.arct"), "--threshold", "3.0"});
    ASSERT_EQ(def.code, 0) << def.err;
    EXPECT_EQ(def.out, three.out);
    const auto table = parse_csv(def.out);
    ASSERT_EQ(table.rows.size(), 6u);
    const auto onset = *table.column("onset");
    const auto tb = *table.column("t_b");
    for (const auto& row : table.rows) {
        const double o = parse_number(row[onset], "onset");
        const double t = parse_number(row[tb], "t_b");
        EXPECT_GE(t, o);
        EXPECT_LE(t, o + 1);
    }
}

TEST_F(Cli, PipelineArcDiagnoseCalibrate) {
    ASSERT_EQ(run({"simulate", "--config", p("small.json"), "--out", p("x.arct"), "--field-out", p("f.json")}).code, 0);
    const auto arc = run({"arc", "--field", p("f.json"), "--in", p("x.arct"), "--theta", "0.5"});
    ASSERT_EQ(arc.code, 0) << arc.err;
    const auto at = parse_csv(arc.out);
    EXPECT_EQ(at.rows.size(), 23u * 20u);
    EXPECT_EQ(at.header.back(), "risk");
    const auto dia = run({"diagnose", "--field", p("f.json"), "--in", p("x.arct")});
    ASSERT_EQ(dia.code, 0) << dia.err;
    const auto dt = parse_csv(dia.out);
    const auto rho = *dt.column("rho");
    for (const auto& row : dt.rows)
        if (!row[rho].empty()) {
            EXPECT_LE(parse_number(row[rho], "rho"), 1e-9);
        }
    const auto cal = run({"calibrate-theta", "--field", p("f.json"), "--in", p("x.arct")});
    ASSERT_EQ(cal.code, 0) << cal.err;
    EXPECT_GT(parse_number(cal.out.substr(0, cal.out.find('\n')), "theta"), 0.0);
}

TEST_F(Cli, ClusterMetricsColumns) {
    ASSERT_EQ(run({"report", "--config", p("small.json"), "--per-axis", "20", "--out", p("ds.csv"), "--summary",
                   p("sum.csv")})
                  .code,
              0);
    const auto r = run({"cluster", "--in", p("ds.csv"), "--k", "3", "--restarts", "20", "--seed", "7", "--features",
                        "dr_*", "--assignments", p("as.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.rfind("# arcdrift ", 0), 0u);
    const auto t = parse_csv(r.out);
    EXPECT_EQ(t.header, (std::vector<std::string>{"n", "k", "ari", "nmi", "acc", "silhouette", "inertia", "best_restart"}));
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_EQ(t.rows[0][0], "60");
    EXPECT_GE(parse_number(t.rows[0][2], "ari"), 0.9);
    EXPECT_EQ(parse_csv(read_file(p("as.csv"))).rows.size(), 60u);
    const auto s = parse_csv(read_file(p("sum.csv")));
    EXPECT_EQ(s.rows[0][0], "60");

    write_file(p("nolabel.csv"), "a,b\n0,0\n1,1\n5,5\n6,6\n");
    const auto nl = run({"cluster", "--in", p("nolabel.csv"), "--k", "2"});
    ASSERT_EQ(nl.code, 0) << nl.err;
    const auto nt = parse_csv(nl.out);
    EXPECT_EQ(nt.rows[0][2], "");
    EXPECT_EQ(run({"cluster", "--in", p("nolabel.csv"), "--k", "9"}).code, kExitUsage);
}

TEST_F(Cli, ControlAndAblate) {
    const auto c = run({"control", "--config", p("small.json"), "--count", "3", "--out", p("cl.arct"), "--series",
                        p("series.csv")});
    ASSERT_EQ(c.code, 0) << c.err;
    const auto t = parse_csv(c.out);
    EXPECT_EQ(t.rows.size(), 9u);
    const auto red = *t.column("reduction");
    for (const auto& row : t.rows) EXPECT_GT(parse_number(row[red], "r"), 0.0);
    EXPECT_EQ(read_trajectories(p("cl.arct")).trajectories.size(), 9u);
    const auto a = run({"ablate", "--config", p("small.json"), "--per-axis", "3"});
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(parse_csv(a.out).rows.size(), 4u);
}

TEST_F(Cli, ThreadCountDoesNotChangeOutput) {
    auto produce = [&](const char* threads, const std::string& tag) {
        setenv("ARC_THREADS", threads, 1);
        EXPECT_EQ(run({"report", "--config", p("small.json"), "--per-axis", "10", "--out", p("r" + tag + ".csv")}).code, 0);
        EXPECT_EQ(run({"cluster", "--in", p("r" + tag + ".csv"), "--features", "dr_*", "--out", p("c" + tag + ".csv")}).code,
                  0);
        EXPECT_EQ(run({"ablate", "--config", p("small.json"), "--per-axis", "3", "--out", p("a" + tag + ".csv")}).code, 0);
    };
    produce("1", "1");
    produce("4", "4");
    for (const std::string f : {"r", "c", "a"}) EXPECT_EQ(read_file(p(f + "1.csv")), read_file(p(f + "4.csv"))) << f;
}
