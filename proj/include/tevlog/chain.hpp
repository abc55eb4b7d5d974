#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "tevlog/anchor.hpp"
#include "tevlog/readout.hpp"

namespace tevlog {

/// a: offset of the redundant backward link (1 disables it).
/// s: checkpoint interval in readouts.
struct ChainConfig {
    std::uint32_t a = 3;
    std::uint32_t s = 100;

    void validate() const {
        if (a < 1) throw Error("a must be at least 1");
        if (s < 1) throw Error("s must be at least 1");
    }

    friend bool operator==(const ChainConfig&, const ChainConfig&) = default;
};

/// Checkpoints are the s-th, 2s-th, ... readouts.
constexpr bool is_checkpoint_index(std::uint64_t index, std::uint64_t s) noexcept {
    return s != 0 && index % s == s - 1;
}

constexpr bool has_apast_link(std::uint64_t index, std::uint32_t a) noexcept { return a >= 2 && index >= a; }

struct AtomicActionResult {
    Readout readout;
    bool anchored = false;
    std::optional<std::uint64_t> anchor_receipt;
    /// Every receipt issued during this action, including ones for earlier
    /// checkpoints flushed from the same batch.
    std::vector<AnchorReceipt> receipts;
};

/// Single-owner state of one sensor's stream.
class ChainState {
public:
    ChainState(ChainConfig config, KeyPair key) : config_(config), key_(std::move(key)) { config_.validate(); }

    const ChainConfig& config() const noexcept { return config_; }
    const KeyPair& key() const noexcept { return key_; }
    std::uint64_t next_index() const noexcept { return next_index_; }
    const std::deque<Digest>& recent_digests() const noexcept { return recent_; }

    /// Builds the next readout without touching the anchor.
    Readout next_readout(std::int64_t timestamp_us, std::optional<Location> location, std::vector<Segment> segments,
                         std::vector<BlindingPair> blinding_pairs = {}) const {
        std::uint64_t index = next_index_;
        std::optional<ChainLink> link;
        if (index > 0) {
            ChainLink l;
            l.prev_digest = recent_.back();
            l.prev_offset = 1;
            l.apast_offset = config_.a;
            if (has_apast_link(index, config_.a)) l.apast_digest = recent_.front();
            link = l;
        }
        return build_readout(key_, index, timestamp_us, location, std::move(segments), std::move(blinding_pairs),
                             link, is_checkpoint_index(index, config_.s));
    }

    /// Emits the next readout. On a checkpoint its final digest is submitted
    /// to the evidence service in the same action; a failed submission is
    /// reported through anchored=false and the readout is still emitted.
    /// Digests queued earlier by other submitters stay pending on failure.
    AtomicActionResult emit(std::int64_t timestamp_us, std::optional<Location> location,
                            std::vector<Segment> segments, std::vector<BlindingPair> blinding_pairs,
                            EvidenceService& service) {
        AtomicActionResult result;
        result.readout = next_readout(timestamp_us, location, std::move(segments), std::move(blinding_pairs));
        Digest digest = final_digest(result.readout);
        if (result.readout.is_checkpoint) {
            SubmitOutcome outcome = service.submit(digest);
            // The atomic action fails as a unit: this readout's evidence is
            // not retried, a later checkpoint takes over.
            if (outcome.failed) service.batch.withdraw(digest);
            for (const auto& receipt : outcome.receipts) {
                if (receipt.proof.leaf == digest) {
                    result.anchored = true;
                    result.anchor_receipt = receipt.block_number;
                }
            }
            result.receipts = std::move(outcome.receipts);
        }
        advance(digest);
        return result;
    }

private:
    void advance(const Digest& digest) {
        recent_.push_back(digest);
        if (recent_.size() > config_.a) recent_.pop_front();
        ++next_index_;
    }

    ChainConfig config_;
    KeyPair key_;
    std::uint64_t next_index_ = 0;
    std::deque<Digest> recent_;
};

/// Everything one sensor produced: its readouts in order and the receipts
/// issued for its checkpoints, keyed by readout index.
struct RecordedStream {
    ChainConfig config;
    Bytes sensor_public_key;
    std::vector<Readout> readouts;
    std::map<std::uint64_t, AnchorReceipt> receipts;
    std::uint64_t checkpoints = 0;
    std::uint64_t failed_submissions = 0;
};

/// Drives a ChainState against an evidence service and routes receipts,
/// which may arrive on a later emission when batching, to their readouts.
class Recorder {
public:
    Recorder(ChainConfig config, KeyPair key, EvidenceService service)
        : chain_(config, std::move(key)), service_(service) {
        stream_.config = config;
        stream_.sensor_public_key = chain_.key().public_key();
    }

    const AtomicActionResult& emit(std::int64_t timestamp_us, std::optional<Location> location,
                                   std::vector<Segment> segments, std::vector<BlindingPair> blinding_pairs = {}) {
        last_ = chain_.emit(timestamp_us, location, std::move(segments), std::move(blinding_pairs), service_);
        if (last_.readout.is_checkpoint) {
            ++stream_.checkpoints;
            awaiting_.emplace(final_digest(last_.readout), last_.readout.index);
            if (!last_.anchored && service_.batch.batch_size() == 1) ++stream_.failed_submissions;
        }
        route(last_.receipts);
        stream_.readouts.push_back(last_.readout);
        return last_;
    }

    /// Anchors whatever is still queued.
    void flush() { route(service_.flush().receipts); }

    ChainState& chain() noexcept { return chain_; }
    const RecordedStream& stream() const& noexcept { return stream_; }
    RecordedStream take() && { return std::move(stream_); }

private:
    void route(const std::vector<AnchorReceipt>& receipts) {
        for (const auto& receipt : receipts) {
            auto it = awaiting_.find(receipt.proof.leaf);
            if (it == awaiting_.end()) continue;
            stream_.receipts.emplace(it->second, receipt);
            awaiting_.erase(it);
        }
    }

    ChainState chain_;
    EvidenceService service_;
    RecordedStream stream_;
    std::map<Digest, std::uint64_t> awaiting_;
    AtomicActionResult last_;
};

inline ChainState new_chain(ChainConfig config, KeyPair key) { return ChainState(config, std::move(key)); }

/// Manual anchoring for sporadic readouts outside the checkpoint schedule.
inline SubmitOutcome anchor_readout(EvidenceService& service, const Readout& readout) {
    return service.submit(final_digest(readout));
}

}  // namespace tevlog
