// Experiment harness: generate traces, splice adversaries, serve provers
// over TCP, and run sync benchmarks that emit CSV rows.

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>

#include "popos/adversary.hpp"
#include "popos/chainsim.hpp"
#include "popos/clients.hpp"
#include "popos/protocol.hpp"
#include "popos/transport.hpp"

using namespace popos;

namespace {

bool log_enabled() {
    const char* v = std::getenv("POPOS_LOG");
    return v && *v;
}

void log_line(const std::string& s) {
    if (log_enabled()) std::cerr << "[popos] " << s << "\n";
}

volatile std::sig_atomic_t g_stop = 0;

struct BenchOptions {
    std::string client = "slc";
    std::vector<uint64_t> horizons;
    uint32_t param = 0;  // b or d; 0 = flavor default
    uint32_t committee = 32;
    uint32_t signers = 0;  // 0 = floor(m/2)+1
    uint32_t adversaries = 7;
    uint64_t seed = 1;
    std::string csv_path;
    std::string provers_spec;  // empty = in-process simulation
    std::string genesis_trace;
    double latency_ms = 25.0;
    double down_mbps = 100.0;
    double up_mbps = 10.0;
    uint32_t accounts = 32;
    uint32_t txs_per_epoch = 4;
};

clients::Flavor parse_flavor(const std::string& name) {
    if (name == "tlc") return clients::Flavor::TLC;
    if (name == "olc") return clients::Flavor::OLC;
    if (name == "slc") return clients::Flavor::SLC;
    throw CLI::ValidationError("--client must be tlc, olc or slc");
}

transport::LinkConfig make_link(const BenchOptions& opt) {
    transport::LinkConfig link;
    link.latency_us = static_cast<uint64_t>(opt.latency_ms * 1000.0);
    link.download_bits_per_sec = static_cast<uint64_t>(opt.down_mbps * 1'000'000.0);
    link.upload_bits_per_sec = static_cast<uint64_t>(opt.up_mbps * 1'000'000.0);
    return link;
}

clients::ClientConfig make_client_config(const BenchOptions& opt, clients::Flavor flavor,
                                         uint64_t horizon,
                                         const chainsim::SyncCommittee& genesis) {
    clients::ClientConfig cfg;
    cfg.flavor = flavor;
    cfg.horizon = horizon;
    cfg.committee_size = opt.committee;
    cfg.genesis = genesis;
    switch (flavor) {
        case clients::Flavor::TLC: cfg.batch = opt.param ? opt.param : 200; break;
        case clients::Flavor::OLC: cfg.batch = opt.param ? opt.param : 500; break;
        case clients::Flavor::SLC: cfg.degree = opt.param ? opt.param : 100; break;
    }
    return cfg;
}

int run_bench(const BenchOptions& opt) {
    if (opt.horizons.empty()) {
        std::cerr << "bench: --horizons must list at least one value\n";
        return 2;
    }
    const clients::Flavor flavor = parse_flavor(opt.client);
    const uint32_t signers =
        opt.signers ? opt.signers : chainsim::majority_threshold(opt.committee);

    std::ofstream csv;
    std::ostream* out = &std::cout;
    bool write_header = true;
    if (!opt.csv_path.empty()) {
        const bool existed = static_cast<bool>(std::ifstream(opt.csv_path));
        csv.open(opt.csv_path, std::ios::app);
        if (!csv) {
            std::cerr << "bench: cannot open " << opt.csv_path << "\n";
            return 2;
        }
        out = &csv;
        write_header = !existed;
    }
    if (write_header) *out << clients::SyncReport::csv_header() << "\n";

    const transport::LinkConfig link = make_link(opt);

    // TCP mode: the provers run elsewhere; genesis comes from a trace file.
    if (!opt.provers_spec.empty()) {
        if (opt.genesis_trace.empty()) {
            std::cerr << "bench: --provers requires --genesis-trace\n";
            return 2;
        }
        const auto genesis_src = chainsim::read_trace(opt.genesis_trace);
        std::vector<std::pair<std::string, uint16_t>> endpoints;
        std::stringstream ss(opt.provers_spec);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto colon = item.rfind(':');
            if (colon == std::string::npos) {
                std::cerr << "bench: bad prover endpoint " << item << "\n";
                return 2;
            }
            endpoints.emplace_back(item.substr(0, colon),
                                   static_cast<uint16_t>(std::stoi(item.substr(colon + 1))));
        }
        for (uint64_t horizon : opt.horizons) {
            if (horizon > genesis_src.horizon) {
                std::cerr << "bench: horizon exceeds genesis trace\n";
                return 2;
            }
            transport::Meter meter;
            std::vector<std::unique_ptr<transport::TcpChannel>> channels;
            std::vector<transport::Channel*> ptrs;
            for (const auto& [host, port] : endpoints) {
                channels.push_back(std::make_unique<transport::TcpChannel>(host, port, link, meter));
                if (!channels.back()->connected())
                    log_line("unreachable prover " + host + ":" + std::to_string(port));
                ptrs.push_back(channels.back().get());
            }
            auto cfg = make_client_config(opt, flavor, horizon, genesis_src.committee(0));
            cfg.committee_size = genesis_src.committee_size;
            const auto report = clients::run_client(cfg, ptrs, meter);
            *out << report.csv_row() << "\n";
            if (!report.ok) log_line("run failed: " + report.error);
        }
        return 0;
    }

    // Simulation mode: honest prover plus spliced adversaries, rebuilt per
    // horizon by truncating two long traces.
    chainsim::TraceParams params;
    params.horizon = *std::max_element(opt.horizons.begin(), opt.horizons.end());
    params.committee_size = opt.committee;
    params.signers_per_epoch = signers;
    params.seed = opt.seed;
    params.accounts = opt.accounts;
    params.txs_per_epoch = opt.txs_per_epoch;

    log_line("generating honest trace, N=" + std::to_string(params.horizon));
    const auto honest_full = chainsim::gen_trace(params);
    auto alt_params = params;
    alt_params.seed = opt.seed + 0x9e3779b97f4a7c15ull;
    log_line("generating alternative trace");
    const auto alt_full = chainsim::gen_trace(alt_params);

    for (uint64_t horizon : opt.horizons) {
        const auto honest = std::make_shared<const chainsim::ExecutionTrace>(
            chainsim::truncate(honest_full, horizon));
        const auto alt = chainsim::truncate(alt_full, horizon);

        std::mt19937_64 rng(opt.seed ^ horizon);
        std::vector<std::shared_ptr<transport::Endpoint>> endpoints;
        endpoints.push_back(protocol::prover_init(honest, flavor == clients::Flavor::SLC
                                                              ? (opt.param ? opt.param : 100)
                                                              : 2));
        for (uint32_t k = 0; k < opt.adversaries && horizon >= 2; ++k) {
            const uint64_t at = 1 + rng() % (horizon - 1);
            auto spliced = std::make_shared<const chainsim::ExecutionTrace>(
                chainsim::splice(*honest, alt, at));
            endpoints.push_back(std::make_shared<protocol::ProverSession>(spliced, 2));
        }

        transport::Meter meter;
        std::vector<std::unique_ptr<transport::SimChannel>> channels;
        std::vector<transport::Channel*> ptrs;
        for (auto& ep : endpoints) {
            channels.push_back(std::make_unique<transport::SimChannel>(*ep, link, meter));
            ptrs.push_back(channels.back().get());
        }

        const auto cfg = make_client_config(opt, flavor, horizon, honest->committee(0));
        const auto report = clients::run_client(cfg, ptrs, meter);
        *out << report.csv_row() << "\n";
        log_line("N=" + std::to_string(horizon) + " bytes_down=" +
                 std::to_string(report.bytes_down) + (report.ok ? "" : " FAILED"));
        if (!report.ok) log_line("run failed: " + report.error);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PoPoS bootstrapping simulator"};
    app.require_subcommand(1);

    // --- gen ---
    auto* gen = app.add_subcommand("gen", "generate a well-formed execution trace");
    chainsim::TraceParams gen_params;
    std::string gen_out;
    gen->add_option("--epochs", gen_params.horizon, "number of epochs N")->required();
    gen->add_option("--committee", gen_params.committee_size, "committee size m")->required();
    gen->add_option("--signers", gen_params.signers_per_epoch,
                    "signatures per handover (> m/2)")->required();
    gen->add_option("--seed", gen_params.seed, "trace seed")->required();
    gen->add_option("--accounts", gen_params.accounts, "account universe size");
    gen->add_option("--txs-per-epoch", gen_params.txs_per_epoch, "workload per epoch");
    gen->add_option("--out", gen_out, "output trace file")->required();

    // --- splice ---
    auto* splice_cmd = app.add_subcommand("splice", "splice two traces at an epoch");
    std::string splice_honest, splice_alt, splice_out;
    uint64_t splice_at = 0;
    splice_cmd->add_option("--honest", splice_honest, "honest trace file")->required();
    splice_cmd->add_option("--alt", splice_alt, "alternative trace file")->required();
    splice_cmd->add_option("--at", splice_at, "splice epoch (0 < j < N)")->required();
    splice_cmd->add_option("--out", splice_out, "output trace file")->required();

    // --- serve ---
    auto* serve = app.add_subcommand("serve", "serve a trace as a TCP prover");
    std::string serve_trace;
    uint16_t serve_port = 0;
    uint32_t serve_degree = 2;
    serve->add_option("--trace", serve_trace, "trace file")->required();
    serve->add_option("--port", serve_port, "TCP port (0 = ephemeral)");
    serve->add_option("--degree", serve_degree, "tree degree to prebuild")->check(CLI::Range(2, 65536));

    // --- bench ---
    auto* bench = app.add_subcommand("bench", "run sync benchmarks and emit CSV");
    BenchOptions opt;
    bench->add_option("--client", opt.client, "tlc | olc | slc")->required();
    bench->add_option("--horizons", opt.horizons, "horizons N to run")->required()->delimiter(',');
    bench->add_option("--param", opt.param, "batch size b (tlc/olc) or degree d (slc)");
    bench->add_option("--committee", opt.committee, "committee size m");
    bench->add_option("--signers", opt.signers, "signatures per handover");
    bench->add_option("--adversaries", opt.adversaries, "spliced adversaries (sim mode)");
    bench->add_option("--seed", opt.seed, "bench seed");
    bench->add_option("--csv", opt.csv_path, "append rows to this CSV file");
    bench->add_option("--provers", opt.provers_spec, "host:port,... (TCP mode)");
    bench->add_option("--genesis-trace", opt.genesis_trace, "trace supplying genesis (TCP mode)");
    bench->add_option("--latency-ms", opt.latency_ms, "one-way link latency");
    bench->add_option("--down-mbps", opt.down_mbps, "verifier downlink rate");
    bench->add_option("--up-mbps", opt.up_mbps, "verifier uplink rate");
    bench->add_option("--accounts", opt.accounts, "account universe size");
    bench->add_option("--txs-per-epoch", opt.txs_per_epoch, "workload per epoch");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            const auto trace = chainsim::gen_trace(gen_params);
            chainsim::write_trace(trace, gen_out);
            std::cout << "wrote " << gen_out << " (N=" << trace.horizon
                      << ", m=" << trace.committee_size << ")\n";
            return 0;
        }
        if (splice_cmd->parsed()) {
            const auto honest = chainsim::read_trace(splice_honest);
            const auto alt = chainsim::read_trace(splice_alt);
            const auto spliced = chainsim::splice(honest, alt, splice_at);
            chainsim::write_trace(spliced, splice_out);
            std::cout << "wrote " << splice_out << " (spliced at " << splice_at << ")\n";
            return 0;
        }
        if (serve->parsed()) {
            std::signal(SIGINT, [](int) { g_stop = 1; });
            std::signal(SIGTERM, [](int) { g_stop = 1; });
            auto trace = std::make_shared<const chainsim::ExecutionTrace>(
                chainsim::read_trace(serve_trace));
            auto session = protocol::prover_init(trace, serve_degree);
            transport::TcpServer server(session);
            const uint16_t port = server.start(serve_port);
            std::cout << "serving " << serve_trace << " on 127.0.0.1:" << port << std::endl;
            while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
            server.stop();
            return 0;
        }
        if (bench->parsed()) return run_bench(opt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
