#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cli_app.hpp"

using namespace tevlog;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "tevlog");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("tevlog-cli-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        ASSERT_EQ(run_cli({"keygen", "--out", path("key.hex"), "--label", "cli-test"}).code, 0);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    std::string write_lines(const std::string& name, int count) const {
        std::ofstream f(path(name));
        for (int i = 0; i < count; ++i) f << "t=" << 20 + i << "C;rh=40%\n";
        return path(name);
    }

    CliResult record(int lines, const std::string& a, const std::string& s) {
        return run_cli({"record", write_lines("in.txt", lines), "--key", path("key.hex"), "--a", a, "--s", s, "--out",
                        path("log.jsonl"), "--anchor", path("anchor.json")});
    }

    CliResult verify(std::vector<std::string> extra = {}) {
        std::vector<std::string> args{"verify", path("log.jsonl"), "--anchor", path("anchor.json")};
        args.insert(args.end(), extra.begin(), extra.end());
        return run_cli(args);
    }

    fs::path dir_;
};

TEST_F(CliTest, RecordReportsCounts) {
    auto r = record(10, "3", "5");
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, "readouts=10 checkpoints=2 anchored=2 roots=2\n");
}

TEST_F(CliTest, EveryReadoutACheckpoint) {
    auto r = record(10, "10", "1");
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, "readouts=10 checkpoints=10 anchored=10 roots=10\n");
}

TEST_F(CliTest, EmptyInputIsAUsageError) {
    auto r = record(0, "3", "5");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("no data bodies"), std::string::npos);
}

TEST_F(CliTest, MissingKeyIsAUsageError) {
    auto r = run_cli({"record", write_lines("in.txt", 3), "--out", path("log.jsonl"), "--anchor",
                      path("anchor.json")});
    if (std::getenv(cli::key_env_var) == nullptr) {
        EXPECT_EQ(r.code, 2);
    }
}

TEST_F(CliTest, InvalidParametersAreUsageErrors) {
    EXPECT_EQ(record(5, "0", "5").code, 2);
    EXPECT_EQ(record(5, "3", "0").code, 2);
    EXPECT_EQ(run_cli({"bogus"}).code, 2);
    EXPECT_EQ(run_cli({}).code, 2);
}

TEST_F(CliTest, VerifyCleanLogExitsZero) {
    ASSERT_EQ(record(10, "3", "5").code, 0);
    auto r = verify();
    EXPECT_EQ(r.code, 0) << r.out << r.err;
    EXPECT_NE(r.out.find("verifiable=10"), std::string::npos);
}

TEST_F(CliTest, LoseThenVerifyBridgesTheGap) {
    ASSERT_EQ(record(10, "3", "5").code, 0);
    auto lose = run_cli({"lose", path("log.jsonl"), "--indices", "2"});
    EXPECT_EQ(lose.code, 0);
    EXPECT_EQ(lose.out, "removed=1 remaining=9\n");
    auto r = verify({"--format", "csv"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("2,lost\n"), std::string::npos);
    EXPECT_NE(r.out.find("1,verifiable\n"), std::string::npos);
}

TEST_F(CliTest, UnreachableReadoutsExitOne) {
    ASSERT_EQ(record(10, "1", "5").code, 0);
    ASSERT_EQ(run_cli({"lose", path("log.jsonl"), "--indices", "2"}).code, 0);
    auto r = verify({"--format", "json"});
    EXPECT_EQ(r.code, 1);
    auto j = io::json::parse(r.out);
    EXPECT_EQ(j["counts"]["unreachable"], 2);
    EXPECT_EQ(j["counts"]["unreachable_head"], 2);
}

TEST_F(CliTest, RandomLossIsSeeded) {
    ASSERT_EQ(record(50, "3", "5").code, 0);
    auto a = run_cli({"lose", path("log.jsonl"), "--random", "0.3", "--seed", "9", "--out", path("a.jsonl")});
    auto b = run_cli({"lose", path("log.jsonl"), "--random", "0.3", "--seed", "9", "--out", path("b.jsonl")});
    EXPECT_EQ(a.out, b.out);
    EXPECT_EQ(io::read_file(path("a.jsonl")), io::read_file(path("b.jsonl")));
    EXPECT_EQ(run_cli({"lose", path("log.jsonl"), "--indices", "99"}).code, 2);
}

TEST_F(CliTest, TamperIsDetected) {
    ASSERT_EQ(record(10, "3", "5").code, 0);
    auto t = run_cli({"tamper", path("log.jsonl"), "--index", "6", "--seed", "1"});
    EXPECT_EQ(t.code, 0);
    auto r = verify({"--format", "csv"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("6,corrupt\n"), std::string::npos);
}

TEST_F(CliTest, ConfigOverrideMismatchExitsTwo) {
    ASSERT_EQ(record(10, "3", "5").code, 0);
    auto r = verify({"--a", "2"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("a="), std::string::npos);
}

TEST_F(CliTest, VerifyWritesReportFile) {
    ASSERT_EQ(record(6, "3", "3").code, 0);
    auto r = verify({"--format", "json", "--out", path("report.json")});
    EXPECT_EQ(r.code, 0);
    EXPECT_TRUE(r.out.empty());
    auto j = io::json::parse(io::read_file(path("report.json")));
    EXPECT_EQ(j["length"], 6);
}

TEST_F(CliTest, RecordingIsByteIdentical) {
    ASSERT_EQ(record(12, "3", "4").code, 0);
    std::string first_log = io::read_file(path("log.jsonl"));
    std::string first_anchor = io::read_file(path("anchor.json"));
    fs::remove(path("anchor.json"));
    ASSERT_EQ(record(12, "3", "4").code, 0);
    EXPECT_EQ(io::read_file(path("log.jsonl")), first_log);
    EXPECT_EQ(io::read_file(path("anchor.json")), first_anchor);
}

TEST_F(CliTest, DirectoryInputAndLocation) {
    fs::create_directories(path("frames"));
    for (int i = 0; i < 4; ++i) {
        std::ofstream(path("frames/frame" + std::to_string(i) + ".bin")) << "pixels " << i;
    }
    auto r = run_cli({"record", path("frames"), "--key", path("key.hex"), "--a", "2", "--s", "2", "--out",
                      path("log.jsonl"), "--anchor", path("anchor.json"), "--location", "35.6,139.7", "--search-key",
                      "case-1"});
    EXPECT_EQ(r.code, 0) << r.err;
    auto log = io::read_log(path("log.jsonl"));
    EXPECT_EQ(log.readouts.at(0).segments[0].label, "frame0.bin");
    EXPECT_EQ(log.readouts.at(0).blinding_pairs.size(), 1u);
    EXPECT_TRUE(log.readouts.at(3).location.has_value());
    EXPECT_EQ(verify().code, 0);
}

TEST_F(CliTest, AnchorQueryAndStore) {
    std::string d = hash(std::string_view("x")).hex();
    auto q = run_cli({"anchor-query", "--anchor", path("anchor.json"), d});
    EXPECT_EQ(q.out, d + " stored=false block=0\n");
    auto s = run_cli({"anchor-query", "--anchor", path("anchor.json"), "--store", d});
    EXPECT_EQ(s.out, d + " already_stored=false block=1\n");
    auto again = run_cli({"anchor-query", "--anchor", path("anchor.json"), "--store", d});
    EXPECT_EQ(again.out, d + " already_stored=true block=1\n");
    EXPECT_EQ(run_cli({"anchor-query", "--anchor", path("anchor.json"), "abc"}).code, 2);
}

TEST_F(CliTest, SimulateWritesCsvAndSidecar) {
    auto r = run_cli({"simulate", "--preset", "fig7", "--n", "500", "--trials", "2", "--p-grid", "0:0.2:0.1", "--out",
                      path("sim.csv")});
    EXPECT_EQ(r.code, 0) << r.err;
    std::string csv = io::read_file(path("sim.csv"));
    std::size_t rows = static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n'));
    EXPECT_EQ(rows, 1u + 3u * 5u * 2u);
    auto sidecar = io::json::parse(io::read_file(path("sim.csv.json")));
    EXPECT_EQ(sidecar["a_values"].size(), 5u);
    EXPECT_EQ(sidecar["n"], 500);
}

TEST_F(CliTest, SimulateIsDeterministic) {
    std::vector<std::string> args{"simulate", "--preset", "fig6", "--n", "2000", "--trials", "3", "--seed", "4"};
    auto a = run_cli(args);
    auto b = run_cli(args);
    EXPECT_EQ(a.code, 0);
    EXPECT_EQ(a.out, b.out);
}

TEST_F(CliTest, SimulateRejectsBadGrids) {
    EXPECT_EQ(run_cli({"simulate", "--p-grid", "0.6"}).code, 2);
    EXPECT_EQ(run_cli({"simulate", "--p-grid", "0:x:0.1"}).code, 2);
    EXPECT_EQ(run_cli({"simulate", "--p-grid", "0:0.5:0"}).code, 2);
    EXPECT_EQ(run_cli({"simulate", "--preset", "fig9"}).code, 2);
    EXPECT_EQ(run_cli({"simulate", "--s", "0"}).code, 2);
    EXPECT_EQ(run_cli({"simulate", "--mode", "slow"}).code, 2);
}

TEST(ParseGrid, RangesAndLists) {
    auto g = cli::parse_grid("0:0.5:0.05");
    ASSERT_EQ(g.size(), 11u);
    EXPECT_EQ(g[3], 0.15);
    EXPECT_EQ(g.back(), 0.5);
    EXPECT_EQ(cli::parse_grid("0.01,0.1"), (std::vector<double>{0.01, 0.1}));
}

TEST(ParseBodyLine, LabelledAndPlain) {
    auto segs = cli::parse_body_line("t=21.5C;rh=40%");
    ASSERT_EQ(segs.size(), 2u);
    EXPECT_EQ(segs[1].label, "rh");
    auto plain = cli::parse_body_line("just text");
    ASSERT_EQ(plain.size(), 1u);
    EXPECT_EQ(plain[0].label, "body");
    EXPECT_EQ(cli::parse_body_line("a=1;a=2")[0].label, "body");
}

}  // namespace
