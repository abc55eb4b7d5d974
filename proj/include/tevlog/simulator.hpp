#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <random>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "tevlog/anchor.hpp"
#include "tevlog/chain.hpp"
#include "tevlog/reachability.hpp"
#include "tevlog/verifier.hpp"

namespace tevlog::sim {

enum class Mode { fast, full };

/// Bernoulli: each index lost independently with probability p.
/// Burst: runs of burst_length losses start at each index with probability
/// p / burst_length. Burst is an extension beyond independent loss.
enum class LossModel { bernoulli, burst };

struct SimConfig {
    std::uint64_t n = 10000;
    std::vector<double> p_grid;
    std::vector<std::uint32_t> s_values;
    std::vector<std::uint32_t> a_values;
    std::uint32_t trials = 1;
    std::uint64_t seed = 1;
    Mode mode = Mode::fast;
    LossModel loss_model = LossModel::bernoulli;
    std::uint32_t burst_length = 1;
    /// Probability that a checkpoint's evidence submission fails.
    double anchor_failure_prob = 0.0;
    unsigned threads = 0;

    void validate() const {
        if (n < 1) throw Error("n must be at least 1");
        if (trials < 1) throw Error("trials must be at least 1");
        if (p_grid.empty() || s_values.empty() || a_values.empty()) throw Error("empty simulation grid");
        for (double p : p_grid) {
            if (!(p >= 0.0 && p <= 0.5)) throw Error("loss probability outside [0, 0.5]");
        }
        for (auto s : s_values) {
            if (s < 1) throw Error("s must be at least 1");
        }
        for (auto a : a_values) {
            if (a < 1) throw Error("a must be at least 1");
        }
        if (loss_model == LossModel::burst && burst_length < 1) throw Error("burst length must be at least 1");
        if (!(anchor_failure_prob >= 0.0 && anchor_failure_prob <= 1.0)) {
            throw Error("anchor failure probability outside [0, 1]");
        }
    }
};

struct SimRow {
    double p = 0.0;
    std::uint32_t s = 1;
    std::uint32_t a = 1;
    std::uint32_t trial = 0;
    double verifiable = 0.0;
    double lost = 0.0;
    double unreachable = 0.0;
    double unanchored_tail = 0.0;
};

struct SimResult {
    std::vector<SimRow> rows;
};

inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent stream for (seed, trial, purpose).
inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t trial, std::uint64_t purpose) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(trial * 4 + purpose + 1)));
}

/// true = available.
inline std::vector<bool> sample_loss_mask(std::uint64_t n, double p, std::mt19937_64& rng) {
    std::vector<bool> available(n);
    for (std::uint64_t i = 0; i < n; ++i) available[i] = !(uniform01(rng) < p);
    return available;
}

/// Uniform draws shared by every cell of a trial. Thresholding the same
/// draws at each p makes loss sets nested in p.
struct TrialDraws {
    std::vector<double> loss;
    std::vector<double> anchor;

    static TrialDraws make(std::uint64_t n, std::uint64_t seed, std::uint64_t trial) {
        TrialDraws d;
        auto loss_rng = stream_rng(seed, trial, 0);
        auto anchor_rng = stream_rng(seed, trial, 1);
        d.loss.resize(n);
        d.anchor.resize(n);
        for (auto& u : d.loss) u = uniform01(loss_rng);
        for (auto& u : d.anchor) u = uniform01(anchor_rng);
        return d;
    }
};

inline std::vector<bool> availability(const std::vector<double>& draws, double p, LossModel model,
                                      std::uint32_t burst_length) {
    const std::size_t n = draws.size();
    std::vector<bool> available(n, true);
    if (model == LossModel::bernoulli) {
        for (std::size_t i = 0; i < n; ++i) available[i] = !(draws[i] < p);
        return available;
    }
    const double start = p / burst_length;
    for (std::size_t i = 0; i < n; ++i) {
        if (draws[i] < start) {
            for (std::size_t j = i; j < std::min(n, i + burst_length); ++j) available[j] = false;
        }
    }
    return available;
}

/// Checkpoints whose evidence submission is configured to fail.
inline std::vector<bool> anchor_failures(const std::vector<double>& draws, double prob) {
    std::vector<bool> failed(draws.size());
    for (std::size_t i = 0; i < draws.size(); ++i) failed[i] = draws[i] < prob;
    return failed;
}

/// Index combinatorics only: a checkpoint is anchored iff it is available
/// and its submission did not fail.
inline std::vector<Status> statuses_fast(const std::vector<bool>& available, const std::vector<bool>& anchor_failed,
                                         std::uint32_t s, std::uint32_t a) {
    const std::size_t n = available.size();
    std::vector<bool> anchored(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        anchored[i] = available[i] && is_checkpoint_index(i, s) && !anchor_failed[i];
    }
    auto reach = reachable_mask(available, anchored, a);
    return classify(available, std::vector<bool>(n, false), anchored, reach);
}

/// Runs the real pipeline: signed readouts, anchored checkpoints, transit
/// losses, then the full verifier.
inline std::vector<Status> statuses_full(const std::vector<bool>& available, const std::vector<bool>& anchor_failed,
                                         std::uint32_t s, std::uint32_t a) {
    const std::size_t n = available.size();
    ChainConfig config{a, s};
    AnchorStore store;
    EvidenceBatch batch(1);
    Recorder recorder(config, KeyPair::from_label("simulated-sensor"), EvidenceService{store, batch});
    for (std::size_t i = 0; i < n; ++i) {
        bool fail = is_checkpoint_index(i, s) && anchor_failed[i];
        if (fail) store.fail_next(1);
        std::string body = "reading " + std::to_string(i);
        recorder.emit(static_cast<std::int64_t>(i) * 1000, std::nullopt, {Segment{"value", to_bytes(body)}});
        if (fail) store.fail_next(0);
    }
    return verify_log(make_available_log(recorder.stream(), available), store, config).status;
}

inline SimRow summarize(double p, std::uint32_t s, std::uint32_t a, std::uint32_t trial,
                        const std::vector<Status>& status) {
    std::array<std::uint64_t, 5> counts{};
    for (auto st : status) ++counts[static_cast<std::size_t>(st)];
    const double n = static_cast<double>(status.size());
    auto frac = [&](Status st) { return static_cast<double>(counts[static_cast<std::size_t>(st)]) / n; };
    return SimRow{p, s, a, trial, frac(Status::verifiable), frac(Status::lost), frac(Status::unreachable),
                  frac(Status::unanchored_tail)};
}

/// One row per (p, s, a, trial), ordered p-major then s, a, trial.
/// Identical output for any thread count.
inline SimResult run_sweep(const SimConfig& config) {
    config.validate();
    const std::size_t np = config.p_grid.size(), ns = config.s_values.size(), na = config.a_values.size();
    const std::size_t nt = config.trials;
    SimResult result;
    result.rows.resize(np * ns * na * nt);

    auto run_trial = [&](std::uint32_t trial) {
        auto draws = TrialDraws::make(config.n, config.seed, trial);
        auto failed = anchor_failures(draws.anchor, config.anchor_failure_prob);
        for (std::size_t ip = 0; ip < np; ++ip) {
            double p = config.p_grid[ip];
            auto available = availability(draws.loss, p, config.loss_model, config.burst_length);
            for (std::size_t is = 0; is < ns; ++is) {
                for (std::size_t ia = 0; ia < na; ++ia) {
                    auto s = config.s_values[is];
                    auto a = config.a_values[ia];
                    auto status = config.mode == Mode::fast ? statuses_fast(available, failed, s, a)
                                                            : statuses_full(available, failed, s, a);
                    result.rows[((ip * ns + is) * na + ia) * nt + trial] = summarize(p, s, a, trial, status);
                }
            }
        }
    };

    unsigned workers = config.threads != 0 ? config.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(nt));
    if (workers <= 1) {
        for (std::uint32_t t = 0; t < nt; ++t) run_trial(t);
        return result;
    }
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::uint32_t t = w; t < nt; t += workers) run_trial(t);
        });
    }
    for (auto& th : pool) th.join();
    return result;
}

/// Verifiable fraction against a at s=100.
inline SimResult saturation_curve(std::vector<double> p_grid, std::uint32_t a_max, std::uint32_t trials,
                                  std::uint64_t seed, std::uint64_t n = 10000) {
    SimConfig config;
    config.n = n;
    config.p_grid = std::move(p_grid);
    config.s_values = {100};
    for (std::uint32_t a = 1; a <= a_max; ++a) config.a_values.push_back(a);
    config.trials = trials;
    config.seed = seed;
    return run_sweep(config);
}

inline std::string to_csv(const SimResult& result) {
    std::string out = "p,s,a,trial,verifiable,lost,unreachable,unanchored_tail\n";
    char line[256];
    for (const auto& r : result.rows) {
        std::snprintf(line, sizeof line, "%.6f,%u,%u,%u,%.6f,%.6f,%.6f,%.6f\n", r.p, r.s, r.a, r.trial, r.verifiable,
                      r.lost, r.unreachable, r.unanchored_tail);
        out += line;
    }
    return out;
}

struct CellMean {
    double verifiable = 0.0;
    double stddev = 0.0;
    std::uint32_t trials = 0;
};

/// Mean and sample standard deviation of the verifiable fraction per (p, s, a).
inline std::map<std::tuple<double, std::uint32_t, std::uint32_t>, CellMean> cell_means(const SimResult& result) {
    std::map<std::tuple<double, std::uint32_t, std::uint32_t>, std::vector<double>> values;
    for (const auto& r : result.rows) values[{r.p, r.s, r.a}].push_back(r.verifiable);
    std::map<std::tuple<double, std::uint32_t, std::uint32_t>, CellMean> out;
    for (const auto& [key, v] : values) {
        CellMean m;
        m.trials = static_cast<std::uint32_t>(v.size());
        for (double x : v) m.verifiable += x;
        m.verifiable /= static_cast<double>(v.size());
        if (v.size() > 1) {
            double ss = 0.0;
            for (double x : v) ss += (x - m.verifiable) * (x - m.verifiable);
            m.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
        }
        out[key] = m;
    }
    return out;
}

}  // namespace tevlog::sim
