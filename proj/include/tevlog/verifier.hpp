#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tevlog/anchor.hpp"
#include "tevlog/chain.hpp"
#include "tevlog/reachability.hpp"
#include "tevlog/readout.hpp"

namespace tevlog {

class ConfigMismatch : public Error {
public:
    using Error::Error;
};

enum class Status : std::uint8_t { verifiable, lost, unreachable, corrupt, unanchored_tail };

inline constexpr std::array<Status, 5> all_statuses = {Status::verifiable, Status::lost, Status::unreachable,
                                                        Status::corrupt, Status::unanchored_tail};

inline constexpr std::string_view to_string(Status s) noexcept {
    switch (s) {
        case Status::verifiable: return "verifiable";
        case Status::lost: return "lost";
        case Status::unreachable: return "unreachable";
        case Status::corrupt: return "corrupt";
        case Status::unanchored_tail: return "unanchored_tail";
    }
    return "unknown";
}

/// What survived transit: readouts by index (gaps are losses), records that
/// were present but could not be decoded, and checkpoint receipts.
struct AvailableLog {
    std::uint64_t length = 0;
    Bytes sensor_public_key;
    std::optional<ChainConfig> recorded_config;
    std::map<std::uint64_t, Readout> readouts;
    std::map<std::uint64_t, std::string> undecodable;
    std::map<std::uint64_t, AnchorReceipt> receipts;
};

/// The log a verifier sees after transit; available[i] == false drops
/// readout i. Receipts come from the evidence service and are unaffected.
inline AvailableLog make_available_log(const RecordedStream& stream, const std::vector<bool>& available = {}) {
    AvailableLog log;
    log.length = stream.readouts.size();
    log.sensor_public_key = stream.sensor_public_key;
    log.recorded_config = stream.config;
    for (const auto& r : stream.readouts) {
        if (available.empty() || available.at(r.index)) log.readouts.emplace(r.index, r);
    }
    log.receipts = stream.receipts;
    return log;
}

struct StatusCounts {
    std::array<std::uint64_t, 5> by_status{};
    /// Unreachable indices that precede the first anchored checkpoint.
    std::uint64_t unreachable_head = 0;

    std::uint64_t operator[](Status s) const noexcept { return by_status[static_cast<std::size_t>(s)]; }
};

struct VerificationReport {
    std::vector<Status> status;
    std::map<std::uint64_t, std::string> corrupt_reason;
    std::set<std::uint64_t> anchored_checkpoints;
    /// Checkpoints that are present and valid but whose receipt is missing or fails.
    std::set<std::uint64_t> unanchored_checkpoints;
    std::optional<std::uint64_t> last_checkpoint;
    StatusCounts stats;

    /// Every present readout up to the last scheduled checkpoint verifies and
    /// nothing is corrupt.
    bool all_verified() const {
        for (std::size_t i = 0; i < status.size(); ++i) {
            if (status[i] == Status::corrupt) return false;
            if (last_checkpoint && i <= *last_checkpoint && status[i] != Status::verifiable &&
                status[i] != Status::lost) {
                return false;
            }
        }
        return true;
    }
};

/// Status assignment from masks alone. The same rules the full
/// verifier applies once crypto checks have produced the masks.
inline std::vector<Status> classify(const std::vector<bool>& available, const std::vector<bool>& corrupt,
                                    const std::vector<bool>& anchored_checkpoint, const std::vector<bool>& reach) {
    const std::size_t n = available.size();
    std::optional<std::size_t> last_anchor;
    for (std::size_t i = 0; i < n; ++i) {
        if (anchored_checkpoint[i]) last_anchor = i;
    }
    std::vector<Status> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!available[i]) {
            out[i] = Status::lost;
        } else if (corrupt[i]) {
            out[i] = Status::corrupt;
        } else if (reach[i]) {
            out[i] = Status::verifiable;
        } else if (!last_anchor || i > *last_anchor) {
            out[i] = Status::unanchored_tail;
        } else {
            out[i] = Status::unreachable;
        }
    }
    return out;
}

inline StatusCounts count_statuses(const std::vector<Status>& status, const std::set<std::uint64_t>& anchored) {
    StatusCounts c;
    for (auto s : status) ++c.by_status[static_cast<std::size_t>(s)];
    if (!anchored.empty()) {
        for (std::uint64_t i = 0; i < *anchored.begin() && i < status.size(); ++i) {
            if (status[i] == Status::unreachable) ++c.unreachable_head;
        }
    }
    return c;
}

namespace detail {

struct LogAnalysis {
    std::vector<bool> present;
    std::vector<bool> corrupt;
    std::vector<bool> anchored;
    std::vector<bool> reach;
    std::vector<std::optional<Digest>> digests;
    VerificationReport report;
};

inline LogAnalysis analyse(const AvailableLog& log, const AnchorStore& anchor, const ChainConfig& config) {
    config.validate();
    if (log.recorded_config && *log.recorded_config != config) {
        throw ConfigMismatch("log was recorded with a=" + std::to_string(log.recorded_config->a) +
                             " s=" + std::to_string(log.recorded_config->s));
    }
    const std::size_t n = log.length;
    LogAnalysis la;
    la.present.assign(n, false);
    la.corrupt.assign(n, false);
    la.anchored.assign(n, false);
    la.digests.assign(n, std::nullopt);
    auto& report = la.report;

    auto mark_corrupt = [&](std::uint64_t i, std::string reason) {
        la.corrupt[i] = true;
        la.digests[i].reset();
        report.corrupt_reason.emplace(i, std::move(reason));
    };

    for (const auto& [i, reason] : log.undecodable) {
        if (i >= n) continue;
        la.present[i] = true;
        mark_corrupt(i, "invalid record: " + reason);
    }
    for (const auto& [i, r] : log.readouts) {
        if (i >= n) throw Error("readout index " + std::to_string(i) + " beyond log length");
        la.present[i] = true;
        if (la.corrupt[i]) continue;
        if (r.index != i) {
            mark_corrupt(i, "record index does not match readout index");
            continue;
        }
        if (!log.sensor_public_key.empty() && r.sensor_public_key != log.sensor_public_key) {
            mark_corrupt(i, "foreign sensor key");
            continue;
        }
        if (auto defect = readout_defect(r)) {
            mark_corrupt(i, *defect);
            continue;
        }
        // Signature-valid readouts reveal the parameters they were built with.
        if (r.chain_link) {
            const auto& link = *r.chain_link;
            if (link.apast_offset != config.a || link.apast_digest.has_value() != has_apast_link(i, config.a)) {
                throw ConfigMismatch("readout " + std::to_string(i) + " carries a-past offset " +
                                     std::to_string(link.apast_offset) + ", expected " + std::to_string(config.a));
            }
        }
        if (r.is_checkpoint != is_checkpoint_index(i, config.s)) {
            throw ConfigMismatch("readout " + std::to_string(i) + " checkpoint flag disagrees with s=" +
                                 std::to_string(config.s));
        }
        la.digests[i] = final_digest(r);
    }

    // A valid referrer whose stored link disagrees with its target marks the
    // target corrupt. Referrers have higher indices, so a descending pass
    // sees every referrer's final state first.
    auto link_digest = [&](std::uint64_t from, std::uint64_t to) -> std::optional<Digest> {
        const auto& link = log.readouts.at(from).chain_link;
        if (!link) return std::nullopt;
        if (from - to == 1) return link->prev_digest;
        if (from - to == config.a) return link->apast_digest;
        return std::nullopt;
    };
    for (std::size_t k = n; k-- > 0;) {
        if (!la.digests[k]) continue;
        std::vector<std::uint64_t> referrers{static_cast<std::uint64_t>(k) + 1};
        if (config.a >= 2) referrers.push_back(static_cast<std::uint64_t>(k) + config.a);
        for (std::uint64_t from : referrers) {
            if (from >= n || !la.digests[from]) continue;
            auto stored = link_digest(from, k);
            if (stored && *stored != *la.digests[k]) {
                mark_corrupt(k, "digest link from " + std::to_string(from) + " does not match");
                break;
            }
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (!la.digests[i] || !is_checkpoint_index(i, config.s)) continue;
        auto it = log.receipts.find(i);
        if (it != log.receipts.end() && it->second.proof.leaf == *la.digests[i] && check_receipt(it->second, anchor)) {
            la.anchored[i] = true;
            report.anchored_checkpoints.insert(i);
        } else {
            report.unanchored_checkpoints.insert(i);
        }
    }

    std::vector<bool> valid(n);
    for (std::size_t i = 0; i < n; ++i) valid[i] = la.digests[i].has_value();
    la.reach = reachable_mask(valid, la.anchored, config.a, [&](std::size_t from, std::size_t to) {
        auto stored = link_digest(from, to);
        return stored && la.digests[to] && *stored == *la.digests[to];
    });

    report.status = classify(la.present, la.corrupt, la.anchored, la.reach);
    for (std::uint64_t i = n; i-- > 0;) {
        if (is_checkpoint_index(i, config.s)) {
            report.last_checkpoint = i;
            break;
        }
    }
    report.stats = count_statuses(report.status, report.anchored_checkpoints);
    return la;
}

}  // namespace detail

inline VerificationReport verify_log(const AvailableLog& log, const AnchorStore& anchor, const ChainConfig& config) {
    return detail::analyse(log, anchor, config).report;
}

/// Path from an anchored checkpoint down to the target, in verification
/// order (checkpoint first), plus the checkpoint's receipt.
struct EvidenceTrail {
    std::vector<std::uint64_t> path;
    std::optional<AnchorReceipt> receipt;
};

struct SingleVerification {
    Status status = Status::lost;
    EvidenceTrail trail;
};

inline SingleVerification verify_single(const AvailableLog& log, const AnchorStore& anchor, std::uint64_t index,
                                        const ChainConfig& config) {
    auto la = detail::analyse(log, anchor, config);
    SingleVerification out;
    if (index >= la.report.status.size()) return out;
    out.status = la.report.status[index];
    if (out.status != Status::verifiable) return out;

    // Walk forward along reversed edges, staying on reachable nodes, until an
    // anchored checkpoint is hit.
    std::vector<std::uint64_t> up{index};
    std::uint64_t cur = index;
    const std::size_t n = la.reach.size();
    while (!la.anchored[cur]) {
        std::uint64_t next = cur + 1;
        bool prev_ok = next < n && la.reach[next] && log.readouts.at(next).chain_link &&
                       log.readouts.at(next).chain_link->prev_digest == *la.digests[cur];
        if (!prev_ok) {
            next = cur + config.a;
            bool apast_ok = config.a >= 2 && next < n && la.reach[next] &&
                            log.readouts.at(next).chain_link->apast_digest == la.digests[cur];
            if (!apast_ok) throw Error("internal error: reachable index without reachable successor");
        }
        cur = next;
        up.push_back(cur);
    }
    out.trail.path.assign(up.rbegin(), up.rend());
    out.trail.receipt = log.receipts.at(cur);
    return out;
}

/// Independent replay of a trail: every hop's stored digest recomputes, the
/// receipt covers the checkpoint, and its root is anchored.
inline bool check_trail(const EvidenceTrail& trail, const AvailableLog& log, const AnchorStore& anchor) {
    if (trail.path.empty() || !trail.receipt) return false;
    auto find = [&](std::uint64_t i) -> const Readout* {
        auto it = log.readouts.find(i);
        return it == log.readouts.end() ? nullptr : &it->second;
    };
    const Readout* head = find(trail.path.front());
    if (!head || !head->is_checkpoint || readout_defect(*head)) return false;
    if (trail.receipt->proof.leaf != final_digest(*head) || !check_receipt(*trail.receipt, anchor)) return false;
    for (std::size_t k = 0; k + 1 < trail.path.size(); ++k) {
        const Readout* from = find(trail.path[k]);
        const Readout* to = find(trail.path[k + 1]);
        if (!from || !to || !from->chain_link || readout_defect(*to)) return false;
        std::uint64_t hop = trail.path[k] - trail.path[k + 1];
        Digest target = final_digest(*to);
        if (hop == 1) {
            if (from->chain_link->prev_digest != target) return false;
        } else if (hop == from->chain_link->apast_offset && from->chain_link->apast_digest) {
            if (*from->chain_link->apast_digest != target) return false;
        } else {
            return false;
        }
    }
    return true;
}

}  // namespace tevlog
