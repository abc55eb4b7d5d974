#pragma once

// Subcommand implementations for the tevlog command-line tool. Kept in a
// header so tests can drive the CLI in-process.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tevlog/tevlog.hpp"

namespace tevlog::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_unverified = 1;
inline constexpr int exit_usage = 2;

inline constexpr const char* key_env_var = "TEVLOG_KEY";

class UsageError : public Error {
public:
    using Error::Error;
};

inline KeyPair load_key(const std::string& path) {
    std::string text = io::read_file(path);
    text.erase(std::remove_if(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); }), text.end());
    return KeyPair::from_seed(from_hex(text));
}

/// "t=21.5C;rh=40%" becomes labelled segments; anything else is one "body"
/// segment.
inline std::vector<Segment> parse_body_line(const std::string& line) {
    std::vector<Segment> segments;
    std::set<std::string> labels;
    std::stringstream ss(line);
    std::string part;
    while (std::getline(ss, part, ';')) {
        auto eq = part.find('=');
        if (eq == std::string::npos || eq == 0 || !labels.insert(part.substr(0, eq)).second) {
            return {Segment{"body", to_bytes(line)}};
        }
        segments.push_back(Segment{part.substr(0, eq), to_bytes(part.substr(eq + 1))});
    }
    if (segments.empty()) return {Segment{"body", to_bytes(line)}};
    return segments;
}

inline std::vector<std::vector<Segment>> read_bodies(const std::string& input) {
    namespace fs = std::filesystem;
    std::vector<std::vector<Segment>> bodies;
    if (fs::is_directory(input)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(input)) {
            if (e.is_regular_file()) files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            bodies.push_back({Segment{f.filename().string(), to_bytes(io::read_file(f.string()))}});
        }
        return bodies;
    }
    std::string text = io::read_file(input);
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        bodies.push_back(parse_body_line(line));
    }
    return bodies;
}

inline std::vector<std::uint64_t> parse_index_list(const std::string& text) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (part.empty()) continue;
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(part, &used);
        } catch (const std::exception&) {
            throw UsageError("invalid index: " + part);
        }
        if (used != part.size()) throw UsageError("invalid index: " + part);
        out.push_back(v);
    }
    return out;
}

/// "0:0.5:0.05" (inclusive range) or "0.01,0.05,0.1".
inline std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> out;
    try {
        if (std::count(text.begin(), text.end(), ':') == 2) {
            auto c1 = text.find(':'), c2 = text.rfind(':');
            double lo = std::stod(text.substr(0, c1));
            double hi = std::stod(text.substr(c1 + 1, c2 - c1 - 1));
            double step = std::stod(text.substr(c2 + 1));
            if (!(step > 0.0) || hi < lo) throw UsageError("invalid grid range: " + text);
            auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
            for (std::size_t k = 0; k <= count; ++k) {
                // Rounded so that 0.05 * 3 prints and compares as 0.15.
                out.push_back(std::round((lo + static_cast<double>(k) * step) * 1e9) / 1e9);
            }
            return out;
        }
        std::stringstream ss(text);
        std::string part;
        while (std::getline(ss, part, ',')) {
            if (!part.empty()) out.push_back(std::stod(part));
        }
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception&) {
        throw UsageError("invalid grid: " + text);
    }
    return out;
}

template <typename T>
std::vector<T> parse_uint_list(const std::string& text) {
    std::vector<T> out;
    for (auto v : parse_index_list(text)) out.push_back(static_cast<T>(v));
    return out;
}

// ---------------------------------------------------------------------------

struct RecordOptions {
    std::string input;
    std::string key_path;
    std::uint32_t a = 3;
    std::uint32_t s = 100;
    std::string out;
    std::string anchor;
    std::size_t batch_size = 1;
    double fail_anchor_prob = 0.0;
    std::uint64_t seed = 0;
    std::int64_t start_us = 1700000000000000;
    std::int64_t interval_us = 1000000;
    std::string search_key;
    std::optional<std::string> location;
};

inline int cmd_record(const RecordOptions& o, std::ostream& out) {
    ChainConfig config{o.a, o.s};
    try {
        config.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    if (o.batch_size < 1) throw UsageError("batch size must be at least 1");
    std::string key_path = o.key_path;
    if (key_path.empty()) {
        if (const char* env = std::getenv(key_env_var)) key_path = env;
    }
    if (key_path.empty()) throw UsageError("no key given (--key or " + std::string(key_env_var) + ")");
    KeyPair key = load_key(key_path);

    auto bodies = read_bodies(o.input);
    if (bodies.empty()) throw UsageError("input has no data bodies: " + o.input);

    std::optional<Location> location;
    if (o.location) {
        auto comma = o.location->find(',');
        if (comma == std::string::npos) throw UsageError("location must be LAT,LON");
        location = Location{std::stod(o.location->substr(0, comma)), std::stod(o.location->substr(comma + 1))};
    }

    AnchorStore store = std::filesystem::exists(o.anchor) ? io::read_anchor(o.anchor) : AnchorStore{};
    store.set_fault_policy(FaultPolicy{0, o.fail_anchor_prob, o.seed});
    EvidenceBatch batch(o.batch_size);
    std::uint64_t first_block = store.current_block();
    Recorder recorder(config, key, EvidenceService{store, batch});
    for (std::size_t i = 0; i < bodies.size(); ++i) {
        std::vector<BlindingPair> pairs;
        if (!o.search_key.empty()) pairs.push_back(BlindingPair::generate(to_bytes(o.search_key)));
        recorder.emit(o.start_us + static_cast<std::int64_t>(i) * o.interval_us, location, std::move(bodies[i]),
                      std::move(pairs));
    }
    recorder.flush();
    const auto& stream = recorder.stream();

    io::write_log(o.out, make_available_log(stream));
    io::write_anchor(o.anchor, store);
    out << "readouts=" << stream.readouts.size() << " checkpoints=" << stream.checkpoints
        << " anchored=" << stream.receipts.size() << " roots=" << (store.current_block() - first_block) << "\n";
    return exit_ok;
}

struct LoseOptions {
    std::string log;
    std::string out;
    std::string indices;
    std::optional<double> random_p;
    std::uint64_t seed = 0;
};

inline int cmd_lose(const LoseOptions& o, std::ostream& out) {
    AvailableLog log = io::read_log(o.log);
    std::set<std::uint64_t> drop;
    for (auto i : parse_index_list(o.indices)) {
        if (i >= log.length) throw UsageError("index " + std::to_string(i) + " out of range");
        drop.insert(i);
    }
    if (o.random_p) {
        if (!(*o.random_p >= 0.0 && *o.random_p <= 1.0)) throw UsageError("--random must be in [0, 1]");
        std::mt19937_64 rng(o.seed);
        auto available = sim::sample_loss_mask(log.length, *o.random_p, rng);
        for (std::uint64_t i = 0; i < log.length; ++i) {
            if (!available[i]) drop.insert(i);
        }
    }
    std::size_t removed = 0;
    for (auto i : drop) {
        removed += log.readouts.erase(i);
        removed += log.undecodable.erase(i);
    }
    io::write_log(o.out.empty() ? o.log : o.out, log);
    out << "removed=" << removed << " remaining=" << log.readouts.size() + log.undecodable.size() << "\n";
    return exit_ok;
}

struct TamperOptions {
    std::string log;
    std::string out;
    std::optional<std::uint64_t> index;
    std::optional<std::uint64_t> byte;
    std::uint64_t seed = 0;
};

/// Flips one byte of one record's canonical encoding.
inline int cmd_tamper(const TamperOptions& o, std::ostream& out) {
    std::string text = io::read_file(o.log);
    std::vector<std::string> lines;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) lines.push_back(line);

    std::vector<std::size_t> readout_lines;
    for (std::size_t k = 0; k < lines.size(); ++k) {
        auto j = io::json::parse(lines[k], nullptr, false);
        if (!j.is_discarded() && j.value("type", "") == "readout") readout_lines.push_back(k);
    }
    if (readout_lines.empty()) throw UsageError("log has no readout records");

    std::mt19937_64 rng(o.seed);
    std::size_t target = 0;
    if (o.index) {
        auto it = std::find_if(readout_lines.begin(), readout_lines.end(), [&](std::size_t k) {
            return io::json::parse(lines[k]).at("index").get<std::uint64_t>() == *o.index;
        });
        if (it == readout_lines.end()) throw UsageError("no record with index " + std::to_string(*o.index));
        target = *it;
    } else {
        target = readout_lines[rng() % readout_lines.size()];
    }
    auto record = io::json::parse(lines[target]);
    Bytes canonical = from_hex(record.at("canonical").get<std::string>());
    std::uint64_t pos = o.byte ? *o.byte : rng() % canonical.size();
    if (pos >= canonical.size()) throw UsageError("byte offset beyond record");
    auto mask = static_cast<std::uint8_t>(1 + rng() % 255);
    canonical[pos] ^= mask;
    record["canonical"] = to_hex(canonical);
    lines[target] = record.dump();

    std::string result;
    for (const auto& l : lines) result += l + "\n";
    io::write_file(o.out.empty() ? o.log : o.out, result);
    out << "tampered index=" << record.at("index").get<std::uint64_t>() << " byte=" << pos << "\n";
    return exit_ok;
}

struct VerifyOptions {
    std::string log;
    std::string anchor;
    std::optional<std::uint32_t> a;
    std::optional<std::uint32_t> s;
    std::string format = "table";
    std::string out;
};

inline int cmd_verify(const VerifyOptions& o, std::ostream& out) {
    AvailableLog log = io::read_log(o.log);
    AnchorStore store = io::read_anchor(o.anchor);
    ChainConfig config = *log.recorded_config;
    if (o.a) config.a = *o.a;
    if (o.s) config.s = *o.s;
    VerificationReport report = verify_log(log, store, config);

    std::string rendered;
    if (o.format == "json") {
        rendered = io::report_to_json(report).dump(2) + "\n";
    } else if (o.format == "csv") {
        rendered = io::report_to_csv(report);
    } else {
        std::ostringstream t;
        t << "index  status\n";
        for (std::size_t i = 0; i < report.status.size(); ++i) {
            t << std::setw(5) << i << "  " << to_string(report.status[i]);
            if (auto it = report.corrupt_reason.find(i); it != report.corrupt_reason.end()) t << " (" << it->second << ")";
            t << "\n";
        }
        const double n = report.status.empty() ? 1.0 : static_cast<double>(report.status.size());
        t << "summary:";
        for (auto s : all_statuses) {
            t << " " << to_string(s) << "=" << report.stats[s] << " (" << std::fixed << std::setprecision(2)
              << 100.0 * static_cast<double>(report.stats[s]) / n << "%)";
        }
        t << " anchored_checkpoints=" << report.anchored_checkpoints.size() << "\n";
        rendered = t.str();
    }
    if (o.out.empty()) {
        out << rendered;
    } else {
        io::write_file(o.out, rendered);
    }
    return report.all_verified() ? exit_ok : exit_unverified;
}

struct AnchorQueryOptions {
    std::string anchor;
    std::vector<std::string> digests;
    bool store = false;
};

inline int cmd_anchor_query(const AnchorQueryOptions& o, std::ostream& out) {
    AnchorStore store = std::filesystem::exists(o.anchor) ? io::read_anchor(o.anchor) : AnchorStore{};
    for (const auto& hex : o.digests) {
        Digest d;
        try {
            d = Digest::from_hex(hex);
        } catch (const Error&) {
            throw UsageError("not a 32-byte hex digest: " + hex);
        }
        if (o.store) {
            bool already = store.store(d);
            out << d.hex() << " already_stored=" << (already ? "true" : "false")
                << " block=" << store.get_stored(d) << "\n";
        } else {
            out << d.hex() << " stored=" << (store.is_stored(d) ? "true" : "false") << " block=" << store.get_stored(d)
                << "\n";
        }
    }
    if (o.store) io::write_anchor(o.anchor, store);
    return exit_ok;
}

struct SimulateOptions {
    std::string preset = "fig6";
    std::optional<std::string> p_grid;
    std::optional<std::string> s_values;
    std::optional<std::string> a_values;
    std::uint64_t n = 10000;
    std::uint32_t trials = 1;
    std::uint64_t seed = 1;
    std::string mode = "fast";
    std::string loss_model = "bernoulli";
    std::uint32_t burst_length = 1;
    double fail_anchor_prob = 0.0;
    unsigned threads = 0;
    std::string out;
};

/// Grids for the three published sweeps: s-effect at a=10, a-effect at
/// s=100, and saturation for large a at s=100.
inline sim::SimConfig preset_config(const std::string& preset) {
    sim::SimConfig c;
    c.p_grid = parse_grid("0:0.5:0.05");
    if (preset == "fig6") {
        c.s_values = {1, 10, 100, 1000};
        c.a_values = {10};
    } else if (preset == "fig7") {
        c.s_values = {100};
        c.a_values = {1, 2, 3, 5, 10};
    } else if (preset == "fig8") {
        c.s_values = {100};
        c.a_values = {10, 20, 30, 50};
    } else if (preset == "saturation") {
        c.s_values = {100};
        for (std::uint32_t a = 1; a <= 50; ++a) c.a_values.push_back(a);
    } else {
        throw UsageError("unknown preset: " + preset);
    }
    return c;
}

inline int cmd_simulate(const SimulateOptions& o, std::ostream& out) {
    sim::SimConfig c = preset_config(o.preset);
    if (o.p_grid) c.p_grid = parse_grid(*o.p_grid);
    if (o.s_values) c.s_values = parse_uint_list<std::uint32_t>(*o.s_values);
    if (o.a_values) c.a_values = parse_uint_list<std::uint32_t>(*o.a_values);
    c.n = o.n;
    c.trials = o.trials;
    c.seed = o.seed;
    if (o.mode != "fast" && o.mode != "full") throw UsageError("mode must be fast or full");
    c.mode = o.mode == "fast" ? sim::Mode::fast : sim::Mode::full;
    if (o.loss_model != "bernoulli" && o.loss_model != "burst") throw UsageError("loss model must be bernoulli or burst");
    c.loss_model = o.loss_model == "bernoulli" ? sim::LossModel::bernoulli : sim::LossModel::burst;
    c.burst_length = o.burst_length;
    c.anchor_failure_prob = o.fail_anchor_prob;
    c.threads = o.threads;
    try {
        c.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    std::string csv = sim::to_csv(sim::run_sweep(c));
    if (o.out.empty()) {
        out << csv;
    } else {
        io::write_file(o.out, csv);
        io::write_file(o.out + ".json", io::sim_config_to_json(c).dump(2) + "\n");
        out << "wrote " << o.out << "\n";
    }
    return exit_ok;
}

inline int cmd_keygen(const std::string& out_path, const std::optional<std::string>& label, std::ostream& out) {
    KeyPair key = label ? KeyPair::from_label(*label) : KeyPair::generate();
    io::write_file(out_path, to_hex(key.private_key()) + "\n");
    out << "public_key=" << to_hex(key.public_key()) << "\n";
    return exit_ok;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Tamper-evident sensor logging with a-past digest chains and anchored checkpoints", "tevlog"};
    app.require_subcommand(1);

    std::string keygen_out;
    std::optional<std::string> keygen_label;
    auto* keygen = app.add_subcommand("keygen", "Write a new Ed25519 key file");
    keygen->add_option("--out", keygen_out, "Key file path")->required();
    keygen->add_option("--label", keygen_label, "Derive the key deterministically from a label");

    RecordOptions rec;
    auto* record = app.add_subcommand("record", "Sign a stream of data bodies and anchor its checkpoints");
    record->add_option("input", rec.input, "Text file (one body per line) or directory of files")->required();
    record->add_option("--key", rec.key_path, std::string("Key file (default: $") + key_env_var + ")");
    record->add_option("--a", rec.a, "a-past link offset")->capture_default_str();
    record->add_option("--s", rec.s, "Checkpoint interval")->capture_default_str();
    record->add_option("--out", rec.out, "Log file to write (.jsonl)")->required();
    record->add_option("--anchor", rec.anchor, "Anchor store file (created or extended)")->required();
    record->add_option("--batch-size", rec.batch_size, "Digests per anchored Merkle root")->capture_default_str();
    record->add_option("--fail-anchor-prob", rec.fail_anchor_prob, "Probability an anchor submission fails");
    record->add_option("--seed", rec.seed, "Seed for injected anchor failures");
    record->add_option("--start-us", rec.start_us, "Timestamp of the first readout")->capture_default_str();
    record->add_option("--interval-us", rec.interval_us, "Timestamp step")->capture_default_str();
    record->add_option("--search-key", rec.search_key, "Attach a blinding pair with this search key");
    record->add_option("--location", rec.location, "LAT,LON attached to every readout");

    LoseOptions lose;
    std::optional<double> lose_p;
    auto* lose_cmd = app.add_subcommand("lose", "Remove readout records to build loss fixtures");
    lose_cmd->add_option("log", lose.log, "Log file")->required();
    lose_cmd->add_option("--indices", lose.indices, "Comma-separated indices to remove");
    lose_cmd->add_option("--random", lose_p, "Remove each record with this probability");
    lose_cmd->add_option("--seed", lose.seed, "Seed for --random");
    lose_cmd->add_option("--out", lose.out, "Output log (default: rewrite input)");

    TamperOptions tam;
    std::optional<std::uint64_t> tam_index, tam_byte;
    auto* tamper = app.add_subcommand("tamper", "Flip one byte of one readout record");
    tamper->add_option("log", tam.log, "Log file")->required();
    tamper->add_option("--index", tam_index, "Readout index (default: random)");
    tamper->add_option("--byte", tam_byte, "Byte offset in the record encoding (default: random)");
    tamper->add_option("--seed", tam.seed, "Seed for random choices");
    tamper->add_option("--out", tam.out, "Output log (default: rewrite input)");

    VerifyOptions ver;
    std::optional<std::uint32_t> ver_a, ver_s;
    auto* verify = app.add_subcommand("verify", "Classify every readout of a log against an anchor store");
    verify->add_option("log", ver.log, "Log file")->required();
    verify->add_option("--anchor", ver.anchor, "Anchor store file")->required();
    verify->add_option("--a", ver_a, "Expected a (default: from log header)");
    verify->add_option("--s", ver_s, "Expected s (default: from log header)");
    verify->add_option("--format", ver.format, "table, json or csv")
        ->check(CLI::IsMember({"table", "json", "csv"}))
        ->capture_default_str();
    verify->add_option("--out", ver.out, "Write the report here instead of stdout");

    AnchorQueryOptions aq;
    auto* anchor_query = app.add_subcommand("anchor-query", "Query (or store) digests in an anchor store");
    anchor_query->add_option("--anchor", aq.anchor, "Anchor store file")->required();
    anchor_query->add_option("digests", aq.digests, "Hex digests")->required();
    anchor_query->add_flag("--store", aq.store, "Store the digests first-write-wins");

    SimulateOptions so;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo verifiability-under-loss sweep");
    simulate->add_option("--preset", so.preset, "fig6, fig7, fig8 or saturation")->capture_default_str();
    simulate->add_option("--p-grid", so.p_grid, "LO:HI:STEP or comma list");
    simulate->add_option("--s", so.s_values, "Comma-separated checkpoint intervals");
    simulate->add_option("--a", so.a_values, "Comma-separated a-past offsets");
    simulate->add_option("--n", so.n, "Stream length")->capture_default_str();
    simulate->add_option("--trials", so.trials, "Trials per grid point")->capture_default_str();
    simulate->add_option("--seed", so.seed, "RNG seed")->capture_default_str();
    simulate->add_option("--mode", so.mode, "fast or full")->capture_default_str();
    simulate->add_option("--loss-model", so.loss_model, "bernoulli or burst")->capture_default_str();
    simulate->add_option("--burst-length", so.burst_length, "Run length for the burst model");
    simulate->add_option("--fail-anchor-prob", so.fail_anchor_prob, "Checkpoint anchoring failure probability");
    simulate->add_option("--threads", so.threads, "Worker threads (0 = hardware)");
    simulate->add_option("--out", so.out, "CSV path; a .json config sidecar is written next to it");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    }

    try {
        if (keygen->parsed()) return cmd_keygen(keygen_out, keygen_label, out);
        if (record->parsed()) return cmd_record(rec, out);
        if (lose_cmd->parsed()) {
            lose.random_p = lose_p;
            return cmd_lose(lose, out);
        }
        if (tamper->parsed()) {
            tam.index = tam_index;
            tam.byte = tam_byte;
            return cmd_tamper(tam, out);
        }
        if (verify->parsed()) {
            ver.a = ver_a;
            ver.s = ver_s;
            return cmd_verify(ver, out);
        }
        if (anchor_query->parsed()) return cmd_anchor_query(aq, out);
        if (simulate->parsed()) return cmd_simulate(so, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    }
    return exit_usage;
}

}  // namespace tevlog::cli
