#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <vector>

#include "tevlog/crypto.hpp"
#include "tevlog/merkle.hpp"

namespace tevlog {

/// Raised when an injected fault makes a submission fail.
class AnchorUnavailable : public Error {
public:
    AnchorUnavailable() : Error("anchor unavailable: evidence submission failed") {}
};

struct FaultPolicy {
    std::uint64_t fail_next = 0;
    double fail_probability = 0.0;
    std::uint64_t seed = 0;
};

/// In-process emulation of the digest-storage contract: a map from digest to
/// the block number it was first stored at, 0 meaning "not stored".
///
/// Every successful first store is its own block, so block numbers start at
/// 1 and advance by one per newly stored digest. All members are
/// linearizable.
class AnchorStore {
public:
    AnchorStore() = default;

    AnchorStore(std::map<Digest, std::uint64_t> digests, std::uint64_t current_block)
        : digests_(std::move(digests)), current_block_(current_block) {
        if (current_block_ == 0) throw Error("current block must be positive");
        for (const auto& [d, block] : digests_) {
            if (block == 0) throw Error("stored block number must be positive: " + d.hex());
        }
    }

    AnchorStore(const AnchorStore& other) {
        std::lock_guard lock(other.mu_);
        digests_ = other.digests_;
        current_block_ = other.current_block_;
    }

    AnchorStore& operator=(const AnchorStore&) = delete;

    /// Returns whether the digest was already stored. First write wins.
    bool store(const Digest& digest) {
        std::lock_guard lock(mu_);
        if (should_fail()) throw AnchorUnavailable();
        auto it = digests_.find(digest);
        bool already = it != digests_.end() && it->second > 0;
        if (!already) {
            digests_[digest] = current_block_;
            ++current_block_;
        }
        return already;
    }

    std::uint64_t get_stored(const Digest& digest) const {
        std::lock_guard lock(mu_);
        auto it = digests_.find(digest);
        return it == digests_.end() ? 0 : it->second;
    }

    bool is_stored(const Digest& digest) const { return get_stored(digest) > 0; }

    std::uint64_t current_block() const {
        std::lock_guard lock(mu_);
        return current_block_;
    }

    std::map<Digest, std::uint64_t> entries() const {
        std::lock_guard lock(mu_);
        return digests_;
    }

    void set_fault_policy(const FaultPolicy& policy) {
        std::lock_guard lock(mu_);
        fault_ = policy;
        fault_rng_.seed(policy.seed);
    }

    void fail_next(std::uint64_t n) {
        std::lock_guard lock(mu_);
        fault_.fail_next = n;
    }

private:
    bool should_fail() {
        if (fault_.fail_next > 0) {
            --fault_.fail_next;
            return true;
        }
        if (fault_.fail_probability > 0.0) {
            double u = static_cast<double>(fault_rng_() >> 11) * 0x1.0p-53;
            return u < fault_.fail_probability;
        }
        return false;
    }

    mutable std::mutex mu_;
    std::map<Digest, std::uint64_t> digests_;
    std::uint64_t current_block_ = 1;
    FaultPolicy fault_;
    std::mt19937_64 fault_rng_{0};
};

/// Links one anchored digest (proof.leaf) to a stored Merkle root.
struct AnchorReceipt {
    Digest digest;
    std::uint64_t block_number = 0;
    merkle::Proof proof;

    friend bool operator==(const AnchorReceipt&, const AnchorReceipt&) = default;
};

/// True when the proof folds to the receipt's root, that root is stored, and
/// the recorded block number matches the store.
inline bool check_receipt(const AnchorReceipt& receipt, const AnchorStore& store) {
    return receipt.block_number > 0 && receipt.proof.root == receipt.digest && merkle::verify_proof(receipt.proof) &&
           store.get_stored(receipt.digest) == receipt.block_number;
}

struct SubmitOutcome {
    std::vector<AnchorReceipt> receipts;
    bool failed = false;
};

/// Queues final digests and anchors them in batches as one Merkle root.
class EvidenceBatch {
public:
    explicit EvidenceBatch(std::size_t batch_size = 1) : batch_size_(batch_size) {
        if (batch_size_ == 0) throw Error("batch size must be at least 1");
    }

    std::size_t batch_size() const noexcept { return batch_size_; }

    std::vector<Digest> pending() const {
        std::lock_guard lock(mu_);
        return pending_;
    }

    SubmitOutcome submit(AnchorStore& store, const Digest& digest) {
        std::lock_guard lock(mu_);
        pending_.push_back(digest);
        if (pending_.size() < batch_size_) return {};
        return flush_locked(store);
    }

    /// Removes one queued occurrence of digest; returns whether it was queued.
    bool withdraw(const Digest& digest) {
        std::lock_guard lock(mu_);
        auto it = std::find(pending_.begin(), pending_.end(), digest);
        if (it == pending_.end()) return false;
        pending_.erase(it);
        return true;
    }

    SubmitOutcome flush(AnchorStore& store) {
        std::lock_guard lock(mu_);
        return flush_locked(store);
    }

private:
    // All or nothing: on store failure every digest stays pending.
    SubmitOutcome flush_locked(AnchorStore& store) {
        SubmitOutcome out;
        if (pending_.empty()) return out;
        merkle::Tree tree(pending_);
        try {
            store.store(tree.root());
        } catch (const AnchorUnavailable&) {
            out.failed = true;
            return out;
        }
        std::uint64_t block = store.get_stored(tree.root());
        for (std::size_t i = 0; i < pending_.size(); ++i) {
            out.receipts.push_back(AnchorReceipt{tree.root(), block, tree.prove(i)});
        }
        pending_.clear();
        return out;
    }

    std::size_t batch_size_;
    mutable std::mutex mu_;
    std::vector<Digest> pending_;
};

/// The blockchain-side service a sensor submits evidence to.
struct EvidenceService {
    AnchorStore& store;
    EvidenceBatch& batch;

    SubmitOutcome submit(const Digest& d) { return batch.submit(store, d); }
    SubmitOutcome flush() { return batch.flush(store); }
};

}  // namespace tevlog
