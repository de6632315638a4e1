#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "popos/chainsim.hpp"
#include "popos/transport.hpp"
#include "popos/wire.hpp"

using namespace popos;

namespace {

#ifndef POPOS_CLI_PATH
#error "POPOS_CLI_PATH must point at the popos binary"
#endif

struct CliResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

CliResult run_cli(const std::vector<std::string>& args) {
    std::string cmd = POPOS_CLI_PATH;
    for (const auto& a : args) cmd += " '" + a + "'";
    cmd += " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CliResult result;
    char buf[512];
    while (fgets(buf, sizeof buf, pipe)) result.output += buf;
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

struct TempFile {
    std::string path;
    explicit TempFile(std::string p) : path(std::move(p)) {}
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("gen writes a well-formed, seed-deterministic trace file") {
    TempFile a("cli_gen_a.trace"), b("cli_gen_b.trace");
    const std::vector<std::string> args{"gen",   "--epochs", "8",    "--committee", "6",
                                        "--signers", "4",    "--seed", "5",         "--out"};
    auto with_out = [&](const std::string& out) {
        auto v = args;
        v.push_back(out);
        return v;
    };
    CHECK(run_cli(with_out(a.path)).exit_code == 0);
    CHECK(run_cli(with_out(b.path)).exit_code == 0);
    CHECK(slurp(a.path) == slurp(b.path));
    CHECK_FALSE(slurp(a.path).empty());

    const auto trace = chainsim::read_trace(a.path);
    CHECK(trace.horizon == 8);
    CHECK(chainsim::validate_trace(trace));
}

TEST_CASE("gen rejects bad parameters") {
    CHECK(run_cli({"gen", "--epochs", "4", "--committee", "6", "--signers", "3", "--seed",
                   "1", "--out", "cli_bad.trace"})
              .exit_code != 0);
}

TEST_CASE("splice produces a trace that fails revalidation at the boundary") {
    TempFile honest("cli_sp_h.trace"), alt("cli_sp_a.trace"), out("cli_sp_o.trace");
    REQUIRE(run_cli({"gen", "--epochs", "8", "--committee", "6", "--signers", "4", "--seed",
                     "1", "--out", honest.path})
                .exit_code == 0);
    REQUIRE(run_cli({"gen", "--epochs", "8", "--committee", "6", "--signers", "4", "--seed",
                     "2", "--out", alt.path})
                .exit_code == 0);

    SUBCASE("valid splice point") {
        REQUIRE(run_cli({"splice", "--honest", honest.path, "--alt", alt.path, "--at", "3",
                         "--out", out.path})
                    .exit_code == 0);
        const auto spliced = chainsim::read_trace(out.path);
        const auto h = chainsim::read_trace(honest.path);
        std::string why;
        CHECK_FALSE(chainsim::validate_trace(spliced, nullptr, &why));
        CHECK(why.find("epoch 3") != std::string::npos);
        CHECK_FALSE(chainsim::verify_handover(h.committee(2), 3, spliced.committee(3),
                                              spliced.epochs[3].handover));
    }
    SUBCASE("splice at zero is rejected") {
        CHECK(run_cli({"splice", "--honest", honest.path, "--alt", alt.path, "--at", "0",
                       "--out", out.path})
                  .exit_code != 0);
    }
}

TEST_CASE("serve answers claim requests over TCP") {
    TempFile trace_file("cli_serve.trace");
    REQUIRE(run_cli({"gen", "--epochs", "8", "--committee", "6", "--signers", "4", "--seed",
                     "9", "--out", trace_file.path})
                .exit_code == 0);

    int out_pipe[2];
    REQUIRE(pipe(out_pipe) == 0);
    const pid_t pid = fork();
    REQUIRE(pid >= 0);
    if (pid == 0) {
        dup2(out_pipe[1], STDOUT_FILENO);
        close(out_pipe[0]);
        close(out_pipe[1]);
        execl(POPOS_CLI_PATH, POPOS_CLI_PATH, "serve", "--trace", trace_file.path.c_str(),
              "--port", "0", (char*)nullptr);
        _exit(127);
    }
    close(out_pipe[1]);

    // Parse "serving <file> on 127.0.0.1:<port>" from the child's stdout.
    std::string banner;
    char c;
    while (banner.find('\n') == std::string::npos && read(out_pipe[0], &c, 1) == 1)
        banner.push_back(c);
    close(out_pipe[0]);
    const auto colon = banner.rfind(':');
    REQUIRE(colon != std::string::npos);
    const uint16_t port = static_cast<uint16_t>(std::stoi(banner.substr(colon + 1)));

    transport::Meter meter;
    transport::TcpChannel ch("127.0.0.1", port, transport::LinkConfig{}, meter);
    REQUIRE(ch.connected());
    const auto resp = ch.request(wire::ClaimRequest{2});
    REQUIRE(resp.has_value());
    const auto* claim = std::get_if<wire::ClaimResponse>(&*resp);
    REQUIRE(claim != nullptr);
    CHECK(claim->claim.latest_committee.epoch == 7);

    kill(pid, SIGTERM);
    int status = 0;
    waitpid(pid, &status, 0);
    CHECK(WIFEXITED(status));
}

TEST_CASE("bench runs deterministically and rejects empty horizon lists") {
    SUBCASE("missing horizons is a usage error") {
        CHECK(run_cli({"bench", "--client", "slc"}).exit_code != 0);
    }
    SUBCASE("same seed, same CSV rows") {
        TempFile csv_a("cli_bench_a.csv"), csv_b("cli_bench_b.csv");
        const std::vector<std::string> base{
            "bench",   "--client", "slc", "--horizons", "16,32", "--param", "2",
            "--committee", "6",    "--signers", "4",    "--adversaries", "2",
            "--seed", "3"};
        auto with_csv = [&](const std::string& path) {
            auto v = base;
            v.push_back("--csv");
            v.push_back(path);
            return v;
        };
        REQUIRE(run_cli(with_csv(csv_a.path)).exit_code == 0);
        REQUIRE(run_cli(with_csv(csv_b.path)).exit_code == 0);
        const auto rows = slurp(csv_a.path);
        CHECK(rows == slurp(csv_b.path));
        CHECK(rows.find("flavor,N,m,param") == 0);
        CHECK(rows.find("slc,16,6,2,") != std::string::npos);
        CHECK(rows.find("slc,32,6,2,") != std::string::npos);
        // Two data rows, one header.
        CHECK(std::count(rows.begin(), rows.end(), '\n') == 3);
    }
}

TEST_CASE("bench records the slc/olc byte gap at N=4096") {
    TempFile csv("cli_bench_ratio.csv");
    for (const char* flavor : {"slc", "olc"}) {
        REQUIRE(run_cli({"bench", "--client", flavor, "--horizons", "4096", "--committee",
                         "6", "--signers", "4", "--adversaries", "1", "--seed", "4",
                         "--param", flavor == std::string("slc") ? "2" : "64", "--csv",
                         csv.path})
                    .exit_code == 0);
    }
    // Both rows share the header; bytes_down is column 5.
    std::istringstream in(slurp(csv.path));
    std::string line;
    std::getline(in, line);  // header
    uint64_t bytes[2] = {0, 0};
    for (auto& value : bytes) {
        REQUIRE(static_cast<bool>(std::getline(in, line)));
        std::istringstream row(line);
        std::string field;
        for (int i = 0; i < 5; ++i) std::getline(row, field, ',');
        value = std::stoull(field);
    }
    CHECK(bytes[0] * 4 < bytes[1]);  // hash scan dwarfs the bisection traffic
}
