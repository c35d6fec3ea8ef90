/**
 * puzzle.hpp: three-rod Tower of Hanoi state machine and exact solver
 *
 * A state stores, for every disk, the rod it sits on. Because disks on a
 * rod are always ordered by size, that assignment determines the state
 * uniquely and gives a dense base-3 index (disk 1 is the least significant
 * digit). Rod contents are reported top-first.
 *
 * Shortest paths come from breadth-first search over the explicit state
 * graph (at most 3^7 = 2187 vertices). Graphs are built once per disk
 * count and shared read-only.
 */

#pragma once

#include "xroom/error.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace xroom {

inline constexpr int kRodCount = 3;
inline constexpr int kMaxDisks = 7;
inline constexpr int kDefaultDisks = 3;

inline constexpr std::size_t pow3(int k) {
    std::size_t n = 1;
    for (int i = 0; i < k; ++i) n *= 3;
    return n;
}

struct Move {
    int from_rod = 0;
    int to_rod = 0;

    constexpr bool is_valid() const noexcept {
        return from_rod >= 0 && from_rod < kRodCount && to_rod >= 0 && to_rod < kRodCount &&
               from_rod != to_rod;
    }

    constexpr Move reversed() const noexcept { return {to_rod, from_rod}; }

    friend constexpr bool operator==(const Move&, const Move&) = default;
};

inline Move make_move(int from_rod, int to_rod) {
    Move m{from_rod, to_rod};
    if (!m.is_valid()) {
        fail(ErrorCode::BadMove, "move " + std::to_string(from_rod) + "->" + std::to_string(to_rod) +
                                     " needs two distinct rods in 0..2");
    }
    return m;
}

using RodContents = std::array<std::vector<int>, kRodCount>;

class HanoiState {
public:
    /// rod_of_disk[d-1] is the rod holding disk d.
    explicit HanoiState(std::vector<std::uint8_t> rod_of_disk) : rod_of_(std::move(rod_of_disk)) {
        if (rod_of_.empty() || static_cast<int>(rod_of_.size()) > kMaxDisks) {
            fail(ErrorCode::InvalidState, "disk count must be in 1.." + std::to_string(kMaxDisks));
        }
        for (auto r : rod_of_) {
            if (r >= kRodCount) fail(ErrorCode::InvalidState, "rod index out of range");
        }
    }

    /// All k disks stacked on one rod.
    static HanoiState tower(int k, int rod = 0) {
        if (rod < 0 || rod >= kRodCount) fail(ErrorCode::InvalidState, "rod index out of range");
        if (k < 1 || k > kMaxDisks) {
            fail(ErrorCode::InvalidState, "disk count must be in 1.." + std::to_string(kMaxDisks));
        }
        return HanoiState(std::vector<std::uint8_t>(static_cast<std::size_t>(k), static_cast<std::uint8_t>(rod)));
    }

    /// Builds a state from top-first rod listings, checking every invariant.
    static HanoiState from_rods(const RodContents& rods) {
        std::size_t k = 0;
        for (const auto& rod : rods) k += rod.size();
        if (k == 0 || k > static_cast<std::size_t>(kMaxDisks)) {
            fail(ErrorCode::InvalidState, "disk count must be in 1.." + std::to_string(kMaxDisks));
        }
        std::vector<std::uint8_t> rod_of(k, 0xff);
        for (int r = 0; r < kRodCount; ++r) {
            const auto& rod = rods[static_cast<std::size_t>(r)];
            for (std::size_t i = 0; i < rod.size(); ++i) {
                const int disk = rod[i];
                if (disk < 1 || static_cast<std::size_t>(disk) > k) {
                    fail(ErrorCode::InvalidState, "disk id " + std::to_string(disk) + " outside 1.." + std::to_string(k));
                }
                if (rod_of[static_cast<std::size_t>(disk - 1)] != 0xff) {
                    fail(ErrorCode::InvalidState, "disk " + std::to_string(disk) + " appears twice");
                }
                if (i > 0 && rod[i - 1] >= disk) {
                    fail(ErrorCode::InvalidState, "rod " + std::to_string(r) + " is not ordered small-on-top");
                }
                rod_of[static_cast<std::size_t>(disk - 1)] = static_cast<std::uint8_t>(r);
            }
        }
        return HanoiState(std::move(rod_of));
    }

    static HanoiState from_index(int k, std::size_t index) {
        if (k < 1 || k > kMaxDisks) fail(ErrorCode::BoundExceeded, "disk count out of range");
        if (index >= pow3(k)) fail(ErrorCode::InvalidState, "state index out of range");
        std::vector<std::uint8_t> rod_of(static_cast<std::size_t>(k));
        for (auto& r : rod_of) {
            r = static_cast<std::uint8_t>(index % 3);
            index /= 3;
        }
        return HanoiState(std::move(rod_of));
    }

    int disk_count() const noexcept { return static_cast<int>(rod_of_.size()); }

    int rod_of(int disk) const { return rod_of_.at(static_cast<std::size_t>(disk - 1)); }

    /// Smallest disk on the rod, or nullopt when the rod is empty.
    std::optional<int> top(int rod) const noexcept {
        for (std::size_t d = 0; d < rod_of_.size(); ++d) {
            if (rod_of_[d] == rod) return static_cast<int>(d) + 1;
        }
        return std::nullopt;
    }

    RodContents rods() const {
        RodContents out;
        for (std::size_t d = 0; d < rod_of_.size(); ++d) out[rod_of_[d]].push_back(static_cast<int>(d) + 1);
        return out;
    }

    std::size_t index() const noexcept {
        std::size_t idx = 0;
        for (std::size_t d = rod_of_.size(); d-- > 0;) idx = idx * 3 + rod_of_[d];
        return idx;
    }

    /// Moves the top disk without checking legality; callers validate first.
    void move_top_unchecked(Move m) {
        const auto disk = top(m.from_rod);
        rod_of_[static_cast<std::size_t>(*disk - 1)] = static_cast<std::uint8_t>(m.to_rod);
    }

    friend bool operator==(const HanoiState&, const HanoiState&) = default;

private:
    std::vector<std::uint8_t> rod_of_;
};

inline bool is_legal(const HanoiState& state, Move m) noexcept {
    if (!m.is_valid()) return false;
    const auto moving = state.top(m.from_rod);
    if (!moving) return false;
    const auto dest = state.top(m.to_rod);
    return !dest || *dest > *moving;
}

/// Legal moves ordered by from_rod, then to_rod.
inline std::vector<Move> legal_moves(const HanoiState& state) {
    std::vector<Move> moves;
    for (int from = 0; from < kRodCount; ++from) {
        for (int to = 0; to < kRodCount; ++to) {
            const Move m{from, to};
            if (is_legal(state, m)) moves.push_back(m);
        }
    }
    return moves;
}

inline HanoiState apply_move(const HanoiState& state, Move m) {
    if (!m.is_valid()) fail(ErrorCode::BadMove, "move needs two distinct rods in 0..2");
    if (!is_legal(state, m)) {
        if (!state.top(m.from_rod)) {
            fail(ErrorCode::IllegalMove, "rod " + std::to_string(m.from_rod) + " is empty");
        }
        fail(ErrorCode::IllegalMove, "cannot place a larger disk on a smaller one");
    }
    HanoiState next = state;
    next.move_top_unchecked(m);
    return next;
}

/// Explicit adjacency over all 3^k states of one disk count.
class StateGraph {
public:
    explicit StateGraph(int k) : k_(k) {
        if (k < 1 || k > kMaxDisks) {
            fail(ErrorCode::BoundExceeded, "disk count " + std::to_string(k) + " outside 1.." + std::to_string(kMaxDisks));
        }
        const std::size_t n = pow3(k);
        edges_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto s = HanoiState::from_index(k, i);
            for (const Move m : legal_moves(s)) {
                auto t = s;
                t.move_top_unchecked(m);
                edges_[i].push_back({m, static_cast<std::uint32_t>(t.index())});
            }
        }
    }

    int disk_count() const noexcept { return k_; }
    std::size_t size() const noexcept { return edges_.size(); }

    struct Edge {
        Move move;
        std::uint32_t to;
    };

    const std::vector<Edge>& neighbours(std::size_t i) const { return edges_.at(i); }

    /// BFS distances from one state to every state.
    std::vector<int> distances_from(std::size_t source) const {
        std::vector<int> dist(size(), -1);
        std::deque<std::size_t> queue{source};
        dist[source] = 0;
        while (!queue.empty()) {
            const auto u = queue.front();
            queue.pop_front();
            for (const auto& e : edges_[u]) {
                if (dist[e.to] < 0) {
                    dist[e.to] = dist[u] + 1;
                    queue.push_back(e.to);
                }
            }
        }
        return dist;
    }

    /// A shortest move sequence, reconstructed from the BFS predecessor map.
    std::vector<Move> shortest_path(std::size_t source, std::size_t target) const {
        constexpr auto kNone = std::numeric_limits<std::uint32_t>::max();
        std::vector<std::uint32_t> pred(size(), kNone);
        std::vector<Move> via(size());
        std::deque<std::size_t> queue{source};
        pred[source] = static_cast<std::uint32_t>(source);
        while (!queue.empty() && pred[target] == kNone) {
            const auto u = queue.front();
            queue.pop_front();
            for (const auto& e : edges_[u]) {
                if (pred[e.to] == kNone) {
                    pred[e.to] = static_cast<std::uint32_t>(u);
                    via[e.to] = e.move;
                    queue.push_back(e.to);
                }
            }
        }
        std::vector<Move> path;
        for (auto v = target; v != source; v = pred[v]) path.push_back(via[v]);
        std::reverse(path.begin(), path.end());
        return path;
    }

private:
    int k_;
    std::vector<std::vector<Edge>> edges_;
};

/// Shared, lazily built graph for disk count k (thread-safe).
inline const StateGraph& state_graph(int k) {
    if (k < 1 || k > kMaxDisks) {
        fail(ErrorCode::BoundExceeded, "disk count " + std::to_string(k) + " outside 1.." + std::to_string(kMaxDisks));
    }
    static std::array<std::once_flag, kMaxDisks + 1> once;
    static std::array<std::optional<StateGraph>, kMaxDisks + 1> graphs;
    const auto slot = static_cast<std::size_t>(k);
    std::call_once(once[slot], [&] { graphs[slot].emplace(k); });
    return *graphs[slot];
}

/// Row-major all-pairs distance table for disk count k (thread-safe, cached).
inline const std::vector<std::uint8_t>& all_pairs_distances(int k) {
    const auto& graph = state_graph(k);
    static std::array<std::once_flag, kMaxDisks + 1> once;
    static std::array<std::vector<std::uint8_t>, kMaxDisks + 1> tables;
    const auto slot = static_cast<std::size_t>(k);
    std::call_once(once[slot], [&] {
        const std::size_t n = graph.size();
        auto& table = tables[slot];
        table.resize(n * n);
        for (std::size_t s = 0; s < n; ++s) {
            const auto dist = graph.distances_from(s);
            for (std::size_t t = 0; t < n; ++t) table[s * n + t] = static_cast<std::uint8_t>(dist[t]);
        }
    });
    return tables[slot];
}

inline void require_same_disks(const HanoiState& a, const HanoiState& b) {
    if (a.disk_count() != b.disk_count()) {
        fail(ErrorCode::DiskCountMismatch,
             std::to_string(a.disk_count()) + " vs " + std::to_string(b.disk_count()) + " disks");
    }
}

inline int min_moves(const HanoiState& start, const HanoiState& target) {
    require_same_disks(start, target);
    if (start == target) return 0;
    const auto& graph = state_graph(start.disk_count());
    return graph.distances_from(start.index())[target.index()];
}

inline std::vector<Move> shortest_path(const HanoiState& start, const HanoiState& target) {
    require_same_disks(start, target);
    return state_graph(start.disk_count()).shortest_path(start.index(), target.index());
}

/// Every valid state for k disks, in index order.
inline std::vector<HanoiState> enumerate_states(int k) {
    if (k < 1 || k > kMaxDisks) {
        fail(ErrorCode::BoundExceeded, "disk count " + std::to_string(k) + " outside 1.." + std::to_string(kMaxDisks));
    }
    std::vector<HanoiState> states;
    const std::size_t n = pow3(k);
    states.reserve(n);
    for (std::size_t i = 0; i < n; ++i) states.push_back(HanoiState::from_index(k, i));
    return states;
}

struct PuzzleTask {
    HanoiState start = HanoiState::tower(kDefaultDisks, 0);
    HanoiState target = HanoiState::tower(kDefaultDisks, 2);
    int move_budget = 7;
    std::int64_t time_budget_ms = 28000;
    int min_moves = 7;
    int slack = 0;
    double challenge = 0.0;

    int disk_count() const noexcept { return start.disk_count(); }

    /// Throws InvalidArgument when the cached fields disagree with the states.
    void validate() const {
        require_same_disks(start, target);
        if (time_budget_ms <= 0) fail(ErrorCode::InvalidArgument, "time budget must be positive");
        if (min_moves != xroom::min_moves(start, target)) {
            fail(ErrorCode::InvalidArgument, "cached min_moves disagrees with BFS distance");
        }
        if (move_budget < min_moves) fail(ErrorCode::InvalidArgument, "move budget below minimal solution");
        if (slack != move_budget - min_moves) fail(ErrorCode::InvalidArgument, "slack != move_budget - min_moves");
    }

    friend bool operator==(const PuzzleTask&, const PuzzleTask&) = default;
};

inline bool is_solved(const HanoiState& state, const PuzzleTask& task) { return state == task.target; }

} // namespace xroom
