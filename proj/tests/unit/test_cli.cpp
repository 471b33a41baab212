#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#ifndef TIERMEM_CLI_PATH
#error "TIERMEM_CLI_PATH must be defined"
#endif

using namespace tiermem::testutil;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Run cli(const TempDir& dir, const std::string& args, const std::string& stdin_text = "") {
    const auto in = dir.path() / "stdin.txt";
    const auto out = dir.path() / "stdout.txt";
    const auto err = dir.path() / "stderr.txt";
    std::ofstream(in, std::ios::binary) << stdin_text;
    const std::string cmd = std::string("'") + TIERMEM_CLI_PATH + "' --data-dir '" + (dir.path() / "data").string() +
                            "' " + args + " < '" + in.string() + "' > '" + out.string() + "' 2> '" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

}  // namespace

TEST(Cli, AgentLifecycleAndChat) {
    TempDir dir("cli");
    auto made = cli(dir, "agent new alice");
    ASSERT_EQ(made.code, 0) << made.err;
    EXPECT_NE(made.out.find("agent-1"), std::string::npos);

    auto list = cli(dir, "agent list");
    ASSERT_EQ(list.code, 0);
    EXPECT_EQ(list.out.rfind("agent-1\talice\t", 0), 0u) << list.out;

    auto chat = cli(dir, "chat agent-1", "hello\n/quit\n");
    ASSERT_EQ(chat.code, 0) << chat.err;
    EXPECT_NE(chat.out.find("You said: hello"), std::string::npos);

    // Persisted between invocations.
    auto again = cli(dir, "chat agent-1 --debug", "second\n");
    ASSERT_EQ(again.code, 0) << again.err;
    EXPECT_NE(again.out.find("You said: second"), std::string::npos);

    auto rm = cli(dir, "agent rm agent-1");
    EXPECT_EQ(rm.code, 0);
    EXPECT_EQ(cli(dir, "chat agent-1", "x\n").code, 2);
}

TEST(Cli, IngestAndErrors) {
    TempDir dir("cli-ingest");
    ASSERT_EQ(cli(dir, "agent new").code, 0);
    std::ofstream(dir.path() / "doc.txt") << "first paragraph\n\nsecond paragraph\n";
    std::ofstream(dir.path() / "empty.txt") << "";
    auto ok = cli(dir, "ingest agent-1 '" + (dir.path() / "doc.txt").string() + "'");
    ASSERT_EQ(ok.code, 0) << ok.err;
    EXPECT_NE(ok.out.find("2"), std::string::npos);

    auto empty = cli(dir, "ingest agent-1 '" + (dir.path() / "empty.txt").string() + "'");
    EXPECT_EQ(empty.code, 0);
    EXPECT_NE(empty.err.find("warning: 0 entries"), std::string::npos);

    EXPECT_EQ(cli(dir, "ingest agent-7 '" + (dir.path() / "doc.txt").string() + "'").code, 2);
    EXPECT_EQ(cli(dir, "frobnicate").code, 64);
    auto json_err = cli(dir, "--json chat agent-9");
    EXPECT_EQ(json_err.code, 2);
    EXPECT_TRUE(tiermem::Json::parse(json_err.err, nullptr, false).contains("error")) << json_err.err;
}

TEST(Cli, BenchAndMetrics) {
    TempDir dir("cli-bench");
    auto kv = cli(dir, "bench kv --depth 2 --seed 3 --orderings 2");
    ASSERT_EQ(kv.code, 0) << kv.err;
    EXPECT_NE(kv.out.find("depth=2 acc=1.000"), std::string::npos) << kv.out;

    std::ofstream(dir.path() / "cand.txt") << "the cat";
    std::ofstream(dir.path() / "ref.txt") << "the cat sat";
    auto rouge = cli(dir, "metrics rouge '" + (dir.path() / "cand.txt").string() + "' '" +
                              (dir.path() / "ref.txt").string() + "'");
    ASSERT_EQ(rouge.code, 0) << rouge.err;
    EXPECT_EQ(rouge.out, "P=1.000 R=0.667 F1=0.800\n");

    EXPECT_EQ(cli(dir, "bench kv --depth 9").code, 64);
}
