#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tevlog/bytes.hpp"
#include "tevlog/crypto.hpp"

namespace tevlog::merkle {

inline constexpr std::uint8_t interior_tag = 0x01;

/// Interior node: hash(0x01 || left || right). Leaves enter the tree as-is.
inline Digest combine(const Digest& left, const Digest& right) {
    std::array<std::uint8_t, 1 + 2 * Digest::size> buf;
    buf[0] = interior_tag;
    std::copy(left.bytes.begin(), left.bytes.end(), buf.begin() + 1);
    std::copy(right.bytes.begin(), right.bytes.end(), buf.begin() + 1 + Digest::size);
    return hash(buf);
}

/// Which side of the running node the sibling sits on.
enum class Side : std::uint8_t { left = 0, right = 1 };

struct PathStep {
    Digest sibling;
    Side side = Side::right;

    friend bool operator==(const PathStep&, const PathStep&) = default;
};

struct Proof {
    Digest leaf;
    std::vector<PathStep> path;
    Digest root;

    friend bool operator==(const Proof&, const Proof&) = default;
};

/// Immutable tree. Odd levels duplicate their last node; a single leaf is
/// its own root.
class Tree {
public:
    explicit Tree(std::vector<Digest> leaves) {
        if (leaves.empty()) throw Error("Merkle tree needs at least one leaf");
        levels_.push_back(std::move(leaves));
        while (levels_.back().size() > 1) {
            const auto& below = levels_.back();
            std::vector<Digest> above;
            above.reserve((below.size() + 1) / 2);
            for (std::size_t i = 0; i < below.size(); i += 2) {
                const Digest& right = i + 1 < below.size() ? below[i + 1] : below[i];
                above.push_back(combine(below[i], right));
            }
            levels_.push_back(std::move(above));
        }
    }

    const Digest& root() const noexcept { return levels_.back().front(); }
    const std::vector<Digest>& leaves() const noexcept { return levels_.front(); }
    const std::vector<std::vector<Digest>>& levels() const noexcept { return levels_; }
    std::size_t height() const noexcept { return levels_.size() - 1; }

    Proof prove(std::size_t leaf_index) const {
        if (leaf_index >= leaves().size()) throw Error("leaf index out of range");
        Proof proof;
        proof.leaf = leaves()[leaf_index];
        proof.root = root();
        std::size_t pos = leaf_index;
        for (std::size_t lvl = 0; lvl + 1 < levels_.size(); ++lvl) {
            const auto& nodes = levels_[lvl];
            const Digest& self = nodes[pos];
            PathStep step;
            if (pos % 2 == 0) {
                step.sibling = pos + 1 < nodes.size() ? nodes[pos + 1] : self;
                step.side = Side::right;
            } else {
                step.sibling = nodes[pos - 1];
                step.side = Side::left;
            }
            // A self-pair folds identically from either side; its canonical
            // flag is right so that verify_proof can reject the other one.
            if (step.sibling == self) step.side = Side::right;
            proof.path.push_back(step);
            pos /= 2;
        }
        return proof;
    }

private:
    std::vector<std::vector<Digest>> levels_;
};

inline Tree build_tree(std::vector<Digest> leaves) { return Tree(std::move(leaves)); }

inline bool verify_proof(const Proof& proof) noexcept {
    try {
        Digest node = proof.leaf;
        for (const auto& step : proof.path) {
            if (step.sibling == node) {
                if (step.side != Side::right) return false;
                node = combine(node, node);
            } else if (step.side == Side::left) {
                node = combine(step.sibling, node);
            } else if (step.side == Side::right) {
                node = combine(node, step.sibling);
            } else {
                return false;
            }
        }
        return node == proof.root;
    } catch (...) {
        return false;
    }
}

/// leaf(32) | root(32) | u32 path length | per step: side byte, sibling(32)
inline Bytes encode_proof(const Proof& proof) {
    ByteWriter w;
    w.raw(proof.leaf.bytes);
    w.raw(proof.root.bytes);
    w.u32(static_cast<std::uint32_t>(proof.path.size()));
    for (const auto& step : proof.path) {
        w.u8(static_cast<std::uint8_t>(step.side));
        w.raw(step.sibling.bytes);
    }
    return std::move(w).take();
}

inline Proof decode_proof(ByteView data) {
    ByteReader rd(data);
    Proof proof;
    proof.leaf = Digest::from_view(rd.raw(Digest::size));
    proof.root = Digest::from_view(rd.raw(Digest::size));
    std::size_t at = rd.offset();
    std::uint32_t n = rd.u32();
    if (static_cast<std::uint64_t>(n) * (1 + Digest::size) != rd.remaining()) {
        throw DecodeError("proof path length does not match input", at);
    }
    for (std::uint32_t i = 0; i < n; ++i) {
        at = rd.offset();
        std::uint8_t side = rd.u8();
        if (side > 1) throw DecodeError("invalid side flag", at);
        PathStep step;
        step.side = static_cast<Side>(side);
        step.sibling = Digest::from_view(rd.raw(Digest::size));
        proof.path.push_back(step);
    }
    return proof;
}

}  // namespace tevlog::merkle
