#pragma once

#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "json.hpp"

#include "tevlog/anchor.hpp"
#include "tevlog/chain.hpp"
#include "tevlog/readout.hpp"
#include "tevlog/simulator.hpp"
#include "tevlog/verifier.hpp"

namespace tevlog::io {

using nlohmann::json;

inline constexpr int log_format_version = 1;
inline constexpr int anchor_format_version = 1;

class FormatError : public Error {
public:
    using Error::Error;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out << content;
    out.flush();
    if (!out) throw Error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// JSON views

inline json proof_to_json(const merkle::Proof& proof) {
    json path = json::array();
    for (const auto& step : proof.path) {
        path.push_back({{"sibling", step.sibling.hex()}, {"side", step.side == merkle::Side::left ? "left" : "right"}});
    }
    return {{"leaf", proof.leaf.hex()}, {"root", proof.root.hex()}, {"path", path}};
}

inline merkle::Proof proof_from_json(const json& j) {
    merkle::Proof proof;
    proof.leaf = Digest::from_hex(j.at("leaf").get<std::string>());
    proof.root = Digest::from_hex(j.at("root").get<std::string>());
    for (const auto& step : j.at("path")) {
        auto side = step.at("side").get<std::string>();
        if (side != "left" && side != "right") throw FormatError("invalid side flag: " + side);
        proof.path.push_back({Digest::from_hex(step.at("sibling").get<std::string>()),
                              side == "left" ? merkle::Side::left : merkle::Side::right});
    }
    return proof;
}

inline json receipt_to_json(const AnchorReceipt& r) {
    return {{"digest", r.digest.hex()}, {"block_number", r.block_number}, {"proof", proof_to_json(r.proof)}};
}

inline AnchorReceipt receipt_from_json(const json& j) {
    return AnchorReceipt{Digest::from_hex(j.at("digest").get<std::string>()), j.at("block_number").get<std::uint64_t>(),
                         proof_from_json(j.at("proof"))};
}

/// Human-readable fields of a readout record; "canonical" is authoritative.
inline json readout_to_json(const Readout& r) {
    json j;
    j["type"] = "readout";
    j["index"] = r.index;
    j["timestamp_us"] = r.timestamp_us;
    j["location"] = r.location ? json{{"latitude", r.location->latitude}, {"longitude", r.location->longitude}}
                               : json(nullptr);
    json segs = json::array();
    for (const auto& s : r.segments) segs.push_back({{"label", s.label}, {"body_hex", to_hex(s.body)}});
    j["segments"] = segs;
    json pairs = json::array();
    for (const auto& p : r.blinding_pairs) {
        pairs.push_back({{"random_number", to_hex(p.random_number)}, {"search_key", to_hex(p.search_key)}});
    }
    j["blinding_pairs"] = pairs;
    if (r.chain_link) {
        const auto& l = *r.chain_link;
        j["chain_link"] = {{"prev_digest", l.prev_digest.hex()},
                           {"prev_offset", l.prev_offset},
                           {"apast_digest", l.apast_digest ? json(l.apast_digest->hex()) : json(nullptr)},
                           {"apast_offset", l.apast_offset}};
    } else {
        j["chain_link"] = nullptr;
    }
    if (r.witness) {
        json seg = json::array(), blind = json::array();
        for (const auto& d : r.witness->segment_digests) seg.push_back(d.hex());
        for (const auto& d : r.witness->blinding_digests) blind.push_back(d.hex());
        j["witness"] = {{"segment_digests", seg}, {"blinding_digests", blind}};
    } else {
        j["witness"] = nullptr;
    }
    j["is_checkpoint"] = r.is_checkpoint;
    j["signature"] = to_hex(r.signature.bytes);
    j["final_digest"] = final_digest(r).hex();
    j["canonical"] = to_hex(canonical_bytes(r));
    return j;
}

// ---------------------------------------------------------------------------
// Log files (JSON Lines)

/// header, then one readout record per present index in increasing order,
/// then one receipt record per anchored checkpoint.
inline std::string serialize_log(const AvailableLog& log) {
    if (!log.recorded_config) throw Error("log needs a recorded chain config");
    std::string out;
    json header = {{"type", "header"},
                   {"format_version", log_format_version},
                   {"a", log.recorded_config->a},
                   {"s", log.recorded_config->s},
                   {"length", log.length},
                   {"sensor_public_key", to_hex(log.sensor_public_key)}};
    out += header.dump() + "\n";
    for (const auto& [i, r] : log.readouts) out += readout_to_json(r).dump() + "\n";
    for (const auto& [i, receipt] : log.receipts) {
        json j = receipt_to_json(receipt);
        j["type"] = "receipt";
        j["index"] = i;
        out += j.dump() + "\n";
    }
    return out;
}

/// Undecodable or inconsistent readout records do not fail the parse; they
/// land in AvailableLog::undecodable so the verifier reports them corrupt.
inline AvailableLog parse_log(const std::string& text) {
    AvailableLog log;
    bool have_header = false;
    std::optional<std::uint64_t> last_readout, last_receipt;
    std::size_t offset = 0;
    while (offset < text.size()) {
        std::size_t end = text.find('\n', offset);
        bool terminated = end != std::string::npos;
        if (!terminated) end = text.size();
        std::string_view line(text.data() + offset, end - offset);
        const std::size_t line_offset = offset;
        offset = terminated ? end + 1 : end;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

        auto fail = [&](const std::string& what) {
            throw FormatError(what + " (record at byte offset " + std::to_string(line_offset) + ")");
        };
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) fail("truncated or malformed record");
        if (!terminated) fail("truncated record: missing newline");

        try {
            auto type = j.at("type").get<std::string>();
            if (!have_header) {
                if (type != "header") fail("first record must be the header");
                if (j.at("format_version").get<int>() != log_format_version) {
                    fail("unsupported log format version " + j.at("format_version").dump());
                }
                log.recorded_config = ChainConfig{j.at("a").get<std::uint32_t>(), j.at("s").get<std::uint32_t>()};
                log.length = j.at("length").get<std::uint64_t>();
                log.sensor_public_key = from_hex(j.at("sensor_public_key").get<std::string>());
                have_header = true;
            } else if (type == "readout") {
                auto index = j.at("index").get<std::uint64_t>();
                if (last_readout && index <= *last_readout) fail("readout records out of order");
                if (last_receipt) fail("readout record after receipts");
                if (index >= log.length) fail("readout index beyond log length");
                last_readout = index;
                try {
                    Readout r = decode_readout(from_hex(j.at("canonical").get<std::string>()));
                    json rendered = readout_to_json(r);
                    for (const auto& [key, value] : rendered.items()) {
                        if (!j.contains(key) || j.at(key) != value) {
                            throw Error("field '" + key + "' disagrees with the canonical encoding");
                        }
                    }
                    log.readouts.emplace(index, std::move(r));
                } catch (const std::exception& e) {
                    log.undecodable.emplace(index, e.what());
                }
            } else if (type == "receipt") {
                auto index = j.at("index").get<std::uint64_t>();
                if (last_receipt && index <= *last_receipt) fail("receipt records out of order");
                last_receipt = index;
                log.receipts.emplace(index, receipt_from_json(j));
            } else if (type == "header") {
                fail("duplicate header");
            }
            // Unknown record types are skipped.
        } catch (const FormatError&) {
            throw;
        } catch (const std::exception& e) {
            fail(std::string("invalid record: ") + e.what());
        }
    }
    if (!have_header) throw FormatError("log has no header");
    return log;
}

inline void write_log(const std::string& path, const AvailableLog& log) { write_file(path, serialize_log(log)); }
inline AvailableLog read_log(const std::string& path) { return parse_log(read_file(path)); }

// ---------------------------------------------------------------------------
// Anchor files

inline std::string serialize_anchor(const AnchorStore& store) {
    auto entries = store.entries();
    std::vector<std::pair<std::uint64_t, Digest>> by_block;
    for (const auto& [d, block] : entries) by_block.emplace_back(block, d);
    std::sort(by_block.begin(), by_block.end());
    json digests = json::array();
    for (const auto& [block, d] : by_block) digests.push_back({{"digest", d.hex()}, {"block_number", block}});
    json j = {{"format_version", anchor_format_version}, {"current_block", store.current_block()}, {"digests", digests}};
    return j.dump(2) + "\n";
}

inline AnchorStore parse_anchor(const std::string& text) {
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) return AnchorStore{};
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw FormatError("anchor file is not valid JSON");
    try {
        if (j.at("format_version").get<int>() != anchor_format_version) {
            throw FormatError("unsupported anchor format version " + j.at("format_version").dump());
        }
        std::map<Digest, std::uint64_t> digests;
        for (const auto& e : j.at("digests")) {
            Digest d = Digest::from_hex(e.at("digest").get<std::string>());
            if (!digests.emplace(d, e.at("block_number").get<std::uint64_t>()).second) {
                throw FormatError("duplicate digest in anchor file: " + d.hex());
            }
        }
        return AnchorStore(std::move(digests), j.at("current_block").get<std::uint64_t>());
    } catch (const FormatError&) {
        throw;
    } catch (const std::exception& e) {
        throw FormatError(std::string("invalid anchor file: ") + e.what());
    }
}

inline void write_anchor(const std::string& path, const AnchorStore& store) {
    write_file(path, serialize_anchor(store));
}

inline AnchorStore read_anchor(const std::string& path) { return parse_anchor(read_file(path)); }

// ---------------------------------------------------------------------------
// Reports

inline json report_to_json(const VerificationReport& report) {
    json statuses = json::array();
    for (std::size_t i = 0; i < report.status.size(); ++i) {
        json e = {{"index", i}, {"status", std::string(to_string(report.status[i]))}};
        if (auto it = report.corrupt_reason.find(i); it != report.corrupt_reason.end()) e["reason"] = it->second;
        statuses.push_back(e);
    }
    json counts;
    for (auto s : all_statuses) counts[std::string(to_string(s))] = report.stats[s];
    counts["unreachable_head"] = report.stats.unreachable_head;
    return {{"length", report.status.size()},
            {"anchored_checkpoints", report.anchored_checkpoints},
            {"unanchored_checkpoints", report.unanchored_checkpoints},
            {"last_checkpoint", report.last_checkpoint ? json(*report.last_checkpoint) : json(nullptr)},
            {"counts", counts},
            {"statuses", statuses}};
}

inline std::string report_to_csv(const VerificationReport& report) {
    std::string out = "index,status\n";
    for (std::size_t i = 0; i < report.status.size(); ++i) {
        out += std::to_string(i) + "," + std::string(to_string(report.status[i])) + "\n";
    }
    return out;
}

inline json sim_config_to_json(const sim::SimConfig& c) {
    return {{"n", c.n},
            {"p_grid", c.p_grid},
            {"s_values", c.s_values},
            {"a_values", c.a_values},
            {"trials", c.trials},
            {"seed", c.seed},
            {"mode", c.mode == sim::Mode::fast ? "fast" : "full"},
            {"loss_model", c.loss_model == sim::LossModel::bernoulli ? "bernoulli" : "burst"},
            {"burst_length", c.burst_length},
            {"anchor_failure_prob", c.anchor_failure_prob}};
}

}  // namespace tevlog::io
