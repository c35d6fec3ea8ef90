// Reference implementations used only by the tests. They share no code with
// the library: different state encodings, straight-line formulas, no caching.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

// ── Hanoi by brute force over rods stored bottom-first ───────────────────

using Rods = std::vector<std::vector<int>>;  // 3 rods, bottom first

inline std::string key(const Rods& r) {
    std::string s;
    for (const auto& rod : r) {
        for (int d : rod) s += static_cast<char>('0' + d);
        s += '|';
    }
    return s;
}

inline bool valid(const Rods& r, int k) {
    std::vector<int> seen(static_cast<std::size_t>(k) + 1, 0);
    for (const auto& rod : r) {
        for (std::size_t i = 0; i < rod.size(); ++i) {
            if (rod[i] < 1 || rod[i] > k) return false;
            ++seen[static_cast<std::size_t>(rod[i])];
            if (i > 0 && rod[i] >= rod[i - 1]) return false;
        }
    }
    for (int d = 1; d <= k; ++d) {
        if (seen[static_cast<std::size_t>(d)] != 1) return false;
    }
    return true;
}

/// Every assignment of disks to rods, placed largest first so each rod is bottom-up.
inline std::vector<Rods> all_states(int k) {
    std::vector<Rods> out;
    std::vector<int> choice(static_cast<std::size_t>(k), 0);
    while (true) {
        Rods r(3);
        for (int d = k; d >= 1; --d) r[static_cast<std::size_t>(choice[static_cast<std::size_t>(d - 1)])].push_back(d);
        out.push_back(r);
        int i = 0;
        while (i < k && ++choice[static_cast<std::size_t>(i)] == 3) choice[static_cast<std::size_t>(i++)] = 0;
        if (i == k) break;
    }
    return out;
}

inline std::vector<std::pair<int, int>> moves(const Rods& r) {
    std::vector<std::pair<int, int>> m;
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            if (a == b || r[static_cast<std::size_t>(a)].empty()) continue;
            const auto& dst = r[static_cast<std::size_t>(b)];
            if (dst.empty() || dst.back() > r[static_cast<std::size_t>(a)].back()) m.emplace_back(a, b);
        }
    }
    return m;
}

inline Rods apply(Rods r, std::pair<int, int> m) {
    const int d = r[static_cast<std::size_t>(m.first)].back();
    r[static_cast<std::size_t>(m.first)].pop_back();
    r[static_cast<std::size_t>(m.second)].push_back(d);
    return r;
}

inline std::map<std::string, int> bfs(const Rods& src) {
    std::map<std::string, int> dist{{key(src), 0}};
    std::deque<Rods> q{src};
    while (!q.empty()) {
        auto cur = q.front();
        q.pop_front();
        const int dc = dist[key(cur)];
        for (auto m : moves(cur)) {
            auto nxt = apply(cur, m);
            if (dist.emplace(key(nxt), dc + 1).second) q.push_back(nxt);
        }
    }
    return dist;
}

inline int distance(const Rods& a, const Rods& b) { return bfs(a).at(key(b)); }

/// Converts top-first rods (library convention) to bottom-first.
inline Rods from_top_first(const std::vector<std::vector<int>>& top_first) {
    Rods r(3);
    for (std::size_t i = 0; i < 3; ++i) r[i].assign(top_first[i].rbegin(), top_first[i].rend());
    return r;
}

// ── flow-controller formulas written out ─────────────────────────────────

inline double challenge(int k, int d, int slack, double budget_ms, double w_depth = 0.5, double w_time = 0.3,
                        double w_slack = 0.2, double t_ref = 4000.0) {
    double depth_term = 0.0, time_term = 0.0;
    if (d > 0) {
        depth_term = d / (std::pow(2.0, k) - 1.0);
        time_term = 1.0 - budget_ms / (t_ref * d);
        if (time_term < 0) time_term = 0;
        if (time_term > 1) time_term = 1;
    }
    const double s = slack > 3 ? 3 : slack;
    double c = w_depth * depth_term + w_time * time_term + w_slack * (1.0 - s / 3.0);
    return c < 0 ? 0 : (c > 1 ? 1 : c);
}

inline double score(bool solved, int moves_used, int min_moves, double time_used, double budget) {
    if (!solved) return 0.0;
    double remaining = 1.0 - time_used / budget;
    remaining = remaining < 0 ? 0 : (remaining > 1 ? 1 : remaining);
    double eff = moves_used == 0 ? 0.0 : static_cast<double>(min_moves) / moves_used;
    eff = eff > 1 ? 1 : eff;
    return 0.5 + 0.3 * remaining + 0.2 * eff;
}

inline double ewma(double prior, int observed, double score, double alpha = 0.3) {
    return observed == 0 ? score : prior + alpha * (score - prior);
}

/// Zone by exact comparison on a 1/1000 lattice, so decimal boundary ties are exact.
inline int zone_millis(int skill_m, int challenge_m, int band_m = 150) {
    const int gap = challenge_m - skill_m;
    if (gap > band_m) return 0;   // anxiety
    if (-gap > band_m) return 2;  // boredom
    return 1;                     // flow
}

// ── clock exchange ───────────────────────────────────────────────────────

struct Exchange {
    long long t1, t2, t3, t4;
};

inline std::pair<double, double> offset_rtt(const Exchange& x) {
    const double theta = 0.5 * static_cast<double>(x.t2 - x.t1) + 0.5 * static_cast<double>(x.t3 - x.t4);
    const double delta = static_cast<double>(x.t4 - x.t1) - static_cast<double>(x.t3 - x.t2);
    return {theta, delta};
}

// ── HRV in the most literal form ─────────────────────────────────────────

struct Hrv {
    double mean_hr, rmssd, sdnn;
};

inline Hrv hrv(const std::vector<double>& beats) {
    std::vector<double> ibi;
    for (std::size_t i = 1; i < beats.size(); ++i) ibi.push_back(beats[i] - beats[i - 1]);
    long double sum = 0;
    for (double x : ibi) sum += x;
    const long double mean = sum / ibi.size();
    long double var = 0;
    for (double x : ibi) var += (x - mean) * (x - mean);
    var /= ibi.size();
    long double sq = 0;
    for (std::size_t i = 1; i < ibi.size(); ++i) sq += (ibi[i] - ibi[i - 1]) * (ibi[i] - ibi[i - 1]);
    const double rmssd = ibi.size() < 2 ? 0.0 : static_cast<double>(std::sqrt(sq / (ibi.size() - 1)));
    return {static_cast<double>(60000.0L / mean), rmssd, static_cast<double>(std::sqrt(var))};
}

// ── tick schedule by millisecond scan ────────────────────────────────────

/// Walks the budget one millisecond at a time, emitting a tick whenever the
/// interval appropriate to the time left at the previous tick has elapsed.
inline std::vector<long long> ticks(long long budget) {
    std::vector<long long> out{0};
    long long last = 0;
    for (long long t = 1; t < budget; ++t) {
        const long long left = budget - last;
        const long long gap = left > 10000 ? 1000 : (left > 3000 ? 500 : 250);
        if (t - last == gap) {
            out.push_back(t);
            last = t;
        }
    }
    return out;
}

} // namespace oracle
