#pragma once

// Test-only reference implementations, kept independent of the library's
// production code paths.

#include <cstdint>
#include <map>
#include <queue>
#include <set>
#include <vector>

namespace tevlog::testing {

/// Explicit-graph breadth-first search over the digest DAG: nodes are
/// indices, edges i -> i-1 and i -> i-a (a >= 2, i >= a), restricted to
/// available nodes, seeded from available checkpoints.
inline std::set<std::uint64_t> brute_force_reachable(std::uint64_t n, const std::vector<bool>& available,
                                                     const std::set<std::uint64_t>& checkpoints, std::uint32_t a) {
    std::map<std::uint64_t, std::vector<std::uint64_t>> adjacency;
    for (std::uint64_t i = 0; i < n; ++i) {
        if (i >= 1) adjacency[i].push_back(i - 1);
        if (a >= 2 && i >= a) adjacency[i].push_back(i - a);
    }
    std::set<std::uint64_t> seen;
    std::queue<std::uint64_t> frontier;
    for (auto c : checkpoints) {
        if (c < n && available[c] && seen.insert(c).second) frontier.push(c);
    }
    while (!frontier.empty()) {
        auto u = frontier.front();
        frontier.pop();
        for (auto v : adjacency[u]) {
            if (available[v] && seen.insert(v).second) frontier.push(v);
        }
    }
    return seen;
}

/// Checkpoint indices for interval s, written as "every s-th readout".
inline std::set<std::uint64_t> checkpoints_for(std::uint64_t n, std::uint32_t s) {
    std::set<std::uint64_t> out;
    for (std::uint64_t k = s; k <= n; k += s) out.insert(k - 1);
    return out;
}

/// Longest run of false values.
inline std::uint64_t longest_loss_run(const std::vector<bool>& available) {
    std::uint64_t best = 0, run = 0;
    for (bool ok : available) {
        run = ok ? 0 : run + 1;
        best = std::max(best, run);
    }
    return best;
}

inline std::vector<bool> mask_from_bits(std::uint64_t bits, std::uint64_t n) {
    std::vector<bool> available(n);
    for (std::uint64_t i = 0; i < n; ++i) available[i] = ((bits >> i) & 1u) != 0;
    return available;
}

/// Expected verifiable fraction for a=1 with every checkpoint anchored and
/// n a multiple of s: index i survives iff it and every index up to its
/// nearest checkpoint are available, so the per-block mean is
/// (1/s) * sum_{k=1..s} q^k with q = 1 - p.
inline double singly_linked_expected_fraction(double p, std::uint32_t s) {
    const double q = 1.0 - p;
    double sum = 0.0, term = 1.0;
    for (std::uint32_t k = 1; k <= s; ++k) {
        term *= q;
        sum += term;
    }
    return sum / s;
}

}  // namespace tevlog::testing
