/**
 * task_generator.hpp: difficulty-targeted puzzle task selection
 *
 * Challenge depends on a task only through (depth, slack, seconds per
 * optimal move), so the search runs over that grid and then draws one
 * concrete (start, target) pair at the chosen depth from the seed.
 * Trivial tasks (start == target) are never produced.
 */

#pragma once

#include "xroom/flow.hpp"
#include "xroom/puzzle.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace xroom {

struct TaskGrid {
    std::vector<int> slacks{0, 1, 2, 3};
    std::vector<int> seconds_per_move{2, 3, 4, 6, 8};

    friend bool operator==(const TaskGrid&, const TaskGrid&) = default;
};

inline constexpr double kChallengeTolerance = 0.05;
inline constexpr double kMaxChallengeGap = 0.25;

/// One cell of the (depth, slack, pace) grid and the challenge it yields.
struct TaskShape {
    int min_moves = 0;
    int slack = 0;
    int seconds_per_move = 0;
    double challenge = 0.0;
};

/// Number of ordered state pairs at each BFS distance (index = distance).
inline std::vector<std::size_t> distance_histogram(int k) {
    const auto& table = all_pairs_distances(k);
    std::vector<std::size_t> hist;
    for (auto d : table) {
        if (d >= hist.size()) hist.resize(d + 1u, 0);
        ++hist[d];
    }
    return hist;
}

inline std::vector<TaskShape> task_shapes(int k, const ControllerConfig& cfg = {}, const TaskGrid& grid = {}) {
    const auto hist = distance_histogram(k);
    std::vector<TaskShape> shapes;
    for (std::size_t d = 1; d < hist.size(); ++d) {
        if (hist[d] == 0) continue;
        for (int slack : grid.slacks) {
            for (int spm : grid.seconds_per_move) {
                const auto depth = static_cast<int>(d);
                const std::int64_t budget = std::int64_t{spm} * 1000 * depth;
                shapes.push_back({depth, slack, spm, challenge_of(k, depth, slack, budget, cfg).value});
            }
        }
    }
    return shapes;
}

inline PuzzleTask generate_task(ChallengeLevel requested, int k, std::uint64_t rng_seed,
                                const ControllerConfig& cfg = {}, const TaskGrid& grid = {}) {
    if (!(requested.value >= 0.0 && requested.value <= 1.0)) {
        fail(ErrorCode::InvalidArgument, "requested challenge outside [0,1]");
    }
    const auto shapes = task_shapes(k, cfg, grid);
    const TaskShape* best = nullptr;
    double best_gap = 0.0;
    constexpr double kTie = 1e-12;
    for (const auto& shape : shapes) {
        const double gap = std::abs(shape.challenge - requested.value);
        bool better = best == nullptr || gap < best_gap - kTie;
        if (!better && std::abs(gap - best_gap) <= kTie) {
            if (shape.slack != best->slack) {
                better = shape.slack < best->slack;
            } else if (shape.seconds_per_move != best->seconds_per_move) {
                better = shape.seconds_per_move < best->seconds_per_move;
            }
        }
        if (better) {
            best = &shape;
            best_gap = gap;
        }
    }
    if (best == nullptr || best_gap > kMaxChallengeGap) {
        fail(ErrorCode::Unattainable, "no task within challenge distance 0.25 of " + std::to_string(requested.value));
    }

    // Uniform draw among all ordered pairs at the chosen depth, in row-major enumeration order.
    const auto& table = all_pairs_distances(k);
    const std::size_t n = pow3(k);
    const auto count = distance_histogram(k)[static_cast<std::size_t>(best->min_moves)];
    std::mt19937_64 rng(rng_seed);
    auto pick = rng() % count;
    std::size_t chosen = 0;
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (table[i] == best->min_moves) {
            if (pick == 0) {
                chosen = i;
                break;
            }
            --pick;
        }
    }

    PuzzleTask task{HanoiState::from_index(k, chosen / n), HanoiState::from_index(k, chosen % n)};
    task.min_moves = best->min_moves;
    task.slack = best->slack;
    task.move_budget = best->min_moves + best->slack;
    task.time_budget_ms = std::int64_t{best->seconds_per_move} * 1000 * best->min_moves;
    task.challenge = best->challenge;
    return task;
}

} // namespace xroom
