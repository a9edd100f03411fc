#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ftfft/signal_io.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / ("ftfft_cli_" + std::to_string(::getpid()) + "_" + info->name());
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    Result run(const std::string& args) const {
        const std::string cmd = std::string(FTFFT_CLI_PATH) + " " + args + " >" + path("stdout.txt") + " 2>" +
                                path("stderr.txt");
        const int status = std::system(cmd.c_str());
        Result r;
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.out = slurp(path("stdout.txt"));
        r.err = slurp(path("stderr.txt"));
        return r;
    }

    fs::path dir_;
};

}  // namespace

TEST_F(Cli, PlanForTwoStageSize) {
    const Result r = run("plan --n 131072");
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = json::parse(r.out);
    ASSERT_EQ(j["stages"].size(), 2u);
    EXPECT_EQ(j["stages"][0]["dim"], 256);
    EXPECT_EQ(j["stages"][1]["dim"], 512);
    EXPECT_EQ(j["bs"], 8);
}

TEST_F(Cli, PlanForSingleStageSize) {
    const Result r = run("plan --n 1024 --ft-mode two_sided");
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = json::parse(r.out);
    ASSERT_EQ(j["stages"].size(), 1u);
    EXPECT_EQ(j["stages"][0]["radix"], 8);
    std::size_t checksums = 0;
    for (const auto& op : j["ops"]) checksums += op["kind"] == "checksum";
    EXPECT_EQ(checksums, 2u);
    EXPECT_EQ(run("plan --n 1024 --ft-mode two_sided").out, r.out);
}

TEST_F(Cli, PlanRejectsNonPowerOfTwo) {
    const Result r = run("plan --n 1000");
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find("size must be a power of two"), std::string::npos) << r.err;
}

TEST_F(Cli, TransformOfDeltaIsOnes) {
    ftfft::SignalBatch<float> x(4, 1);
    x.storage()[0] = 1.0f;
    ftfft::write_signals(path("in.bin"), x);
    const Result r = run("transform --input " + path("in.bin") + " --output " + path("out.bin") + " --n 4");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto y = ftfft::read_signals<float>(path("out.bin"), 4, 1);
    for (const auto& v : y.storage()) EXPECT_LE(std::abs(v - std::complex<float>(1, 0)), 1e-6f);
    const json j = json::parse(r.out);
    EXPECT_EQ(j["scheme"], "two_sided_group");
    EXPECT_TRUE(j["flagged"].empty());
}

TEST_F(Cli, TransformRoundTripThroughFiles) {
    const std::size_t n = 2048, count = 4;
    const ftfft::SignalBatch<double> x(n, count, testing_support::random_signal<double>(n * count, 7));
    ftfft::write_signals(path("in.bin"), x);
    const std::string common = " --n 2048 --batch 4 --precision fp64 --delta 1e-9";
    ASSERT_EQ(run("transform --input " + path("in.bin") + " --output " + path("mid.bin") + common).code, 0);
    const Result r = run("transform --inverse --input " + path("mid.bin") + " --output " + path("back.bin") + common);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto back = ftfft::read_signals<double>(path("back.bin"), n, count);
    EXPECT_LE(testing_support::rel_l2(back.storage(), x.storage()), 1e-10);
}

TEST_F(Cli, TransformCorrectsInjectedFault) {
    const std::size_t n = 256, count = 8;
    const ftfft::SignalBatch<double> x(n, count, testing_support::random_signal<double>(n * count, 8));
    ftfft::write_signals(path("in.bin"), x);
    const std::string common = " --n 256 --batch 8 --precision fp64 --delta 1e-9";
    ASSERT_EQ(run("transform --input " + path("in.bin") + " --output " + path("clean.bin") + common).code, 0);
    const Result r = run("transform --input " + path("in.bin") + " --output " + path("hit.bin") + common +
                         " --fault-bit 61 --fault-signal 3 --fault-element 9 --fault-component im --fault-site output");
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = json::parse(r.out);
    ASSERT_EQ(j["flagged"].size(), 1u);
    EXPECT_EQ(j["flagged"][0]["signal"], 3);
    EXPECT_EQ(j["corrected"], json::array({3}));
    const auto clean = ftfft::read_signals<double>(path("clean.bin"), n, count);
    const auto hit = ftfft::read_signals<double>(path("hit.bin"), n, count);
    EXPECT_LE(testing_support::rel_l2(hit.storage(), clean.storage()), 1e-9);
}

TEST_F(Cli, TransformReportsUnrecoverableWithExitTwo) {
    const ftfft::SignalBatch<float> x(64, 4, testing_support::random_signal<float>(256, 9));
    ftfft::write_signals(path("in.bin"), x);
    const Result r = run("transform --input " + path("in.bin") + " --output " + path("out.bin") +
                         " --n 64 --batch 4 --delta 1e-30");
    EXPECT_EQ(r.code, 2) << r.err;
    EXPECT_FALSE(json::parse(r.out)["unrecoverable"].empty());
}

TEST_F(Cli, TransformRejectsTruncatedInput) {
    std::ofstream(path("short.bin"), std::ios::binary) << std::string(20, '\0');
    const Result r = run("transform --input " + path("short.bin") + " --output " + path("out.bin") + " --n 4");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("input length mismatch"), std::string::npos) << r.err;
}

TEST_F(Cli, InjectWithSingleGridPoint) {
    const std::string args = "inject --runs 40 --n 64 --batch 4 --bits 25:30 --delta-grid 1e-4 --seed 3 --roc-out " +
                             path("roc.csv") + " --records-out " + path("rec.csv");
    const Result r = run(args);
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string roc = slurp(path("roc.csv"));
    EXPECT_EQ(std::count(roc.begin(), roc.end(), '\n'), 2);
    EXPECT_EQ(roc.rfind("delta,detection_rate,false_alarm_rate,corrected_rate,subthreshold_rate\n1.000000e-04,", 0), 0u);
    const std::string rec = slurp(path("rec.csv"));
    EXPECT_EQ(std::count(rec.begin(), rec.end(), '\n'), 41);
    const json j = json::parse(r.out);
    EXPECT_EQ(j["injected"], 20);

    ASSERT_EQ(run(args).code, 0);
    EXPECT_EQ(slurp(path("roc.csv")), roc);
    EXPECT_EQ(slurp(path("rec.csv")), rec);
}

TEST_F(Cli, InjectRejectsBadArguments) {
    EXPECT_EQ(run("inject --runs 10 --bits 30:20 --roc-out " + path("a") + " --records-out " + path("b")).code, 1);
    EXPECT_EQ(run("inject --runs 10 --delta-grid x --roc-out " + path("a") + " --records-out " + path("b")).code, 1);
    EXPECT_EQ(run("inject --no-such-flag").code, 1);
}

TEST_F(Cli, BenchRows) {
    const Result r = run("bench --n 1024 --batch 16 --schemes none,one_sided,two_sided_group --trials 10");
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream lines(r.out);
    std::string line;
    std::getline(lines, line);
    EXPECT_EQ(line, "scheme,n,batch,trials,mean_ms,stddev_ms,pass_count,recompute_count,corrected");
    std::vector<std::vector<std::string>> rows;
    while (std::getline(lines, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
        ASSERT_EQ(cells.size(), 9u) << line;
        rows.push_back(cells);
    }
    ASSERT_EQ(rows.size(), 3u);
    for (const auto& row : rows) {
        EXPECT_EQ(row[3], "10");
        EXPECT_EQ(row[6], rows[0][6]);
        EXPECT_EQ(row[7], "0");
    }
}

TEST_F(Cli, BenchInjectedOneSidedRecomputes) {
    const Result r = run("bench --n 256 --batch 8 --schemes one_sided,two_sided_group --trials 3 --inject");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("one_sided,256,8,3,"), std::string::npos);
    std::istringstream lines(r.out);
    std::string line;
    std::getline(lines, line);
    std::getline(lines, line);
    EXPECT_EQ(line.substr(line.size() - 4), ",1,1") << line;
    std::getline(lines, line);
    EXPECT_EQ(line.substr(line.size() - 4), ",0,1") << line;
}

TEST_F(Cli, Propagate) {
    const Result r = run("propagate --n 8 --element 0");
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = json::parse(r.out);
    ASSERT_EQ(j["points"].size(), 4u);
    EXPECT_EQ(j["points"][0]["corrupted"], 8);
    EXPECT_EQ(j["points"][1]["corrupted"], 4);
    EXPECT_EQ(j["points"][3]["corrupted"], 1);
    EXPECT_EQ(json::parse(run("propagate --n 1024 --site input").out)["points"][0]["corrupted"], 1024);
}

TEST_F(Cli, HelpAndUnknownCommand) {
    EXPECT_EQ(run("--help").code, 0);
    EXPECT_NE(run("").code, 0);
}
