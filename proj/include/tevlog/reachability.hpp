#pragma once

#include <cstdint>
#include <set>
#include <vector>

namespace tevlog {

/// Backward reachability over the digest DAG with edges i -> i-1 and
/// i -> i-a (a >= 2). Traversal starts at anchored checkpoints and only
/// passes through available indices; edge_ok(from, to) can veto an edge.
///
/// Edges only point backward, so one descending sweep settles every node.
template <typename EdgeOk>
std::vector<bool> reachable_mask(const std::vector<bool>& available, const std::vector<bool>& anchored_checkpoint,
                                 std::uint32_t a, EdgeOk&& edge_ok) {
    const std::size_t n = available.size();
    std::vector<bool> reach(n, false);
    for (std::size_t k = n; k-- > 0;) {
        if (!available[k]) continue;
        if (anchored_checkpoint[k]) {
            reach[k] = true;
            continue;
        }
        if (k + 1 < n && reach[k + 1] && edge_ok(k + 1, k)) {
            reach[k] = true;
        } else if (a >= 2 && k + a < n && reach[k + a] && edge_ok(k + a, k)) {
            reach[k] = true;
        }
    }
    return reach;
}

inline std::vector<bool> reachable_mask(const std::vector<bool>& available,
                                        const std::vector<bool>& anchored_checkpoint, std::uint32_t a) {
    return reachable_mask(available, anchored_checkpoint, a, [](std::size_t, std::size_t) { return true; });
}

/// Set form. Checkpoints that are not available contribute nothing.
inline std::set<std::uint64_t> reachable_set(const std::set<std::uint64_t>& available,
                                             const std::set<std::uint64_t>& checkpoints, std::uint32_t a) {
    if (available.empty()) return {};
    const std::size_t n = static_cast<std::size_t>(*available.rbegin()) + 1;
    std::vector<bool> avail(n, false), anchored(n, false);
    for (auto i : available) avail[i] = true;
    for (auto c : checkpoints) {
        if (c < n && avail[c]) anchored[c] = true;
    }
    auto reach = reachable_mask(avail, anchored, a);
    std::set<std::uint64_t> out;
    for (std::size_t i = 0; i < n; ++i) {
        if (reach[i]) out.insert(i);
    }
    return out;
}

}  // namespace tevlog
