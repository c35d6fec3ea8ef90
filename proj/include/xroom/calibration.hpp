/**
 * calibration.hpp: difficulty tables for a disk count
 *
 * Lists how many ordered state pairs sit at each BFS distance and which
 * challenge each (distance, slack, pace) cell of the task grid yields.
 */

#pragma once

#include "xroom/flow.hpp"
#include "xroom/puzzle.hpp"
#include "xroom/task_generator.hpp"

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

namespace xroom {

struct CalibrationCell {
    int min_moves = 0;
    int slack = 0;
    int seconds_per_move = 0;
    int move_budget = 0;
    std::int64_t time_budget_ms = 0;
    double challenge = 0.0;
};

struct CalibrationTable {
    int disks = 0;
    std::size_t state_count = 0;
    int max_distance = 0;
    std::vector<std::size_t> pairs_at_distance;  // ordered pairs, index = distance
    std::vector<CalibrationCell> cells;
};

inline CalibrationTable calibrate(int k, const ControllerConfig& cfg = {}, const TaskGrid& grid = {}) {
    if (k < 1) fail(ErrorCode::InvalidArgument, "disk count must be at least 1");
    if (k > kMaxDisks) fail(ErrorCode::BoundExceeded, "disk count above " + std::to_string(kMaxDisks));
    CalibrationTable t;
    t.disks = k;
    t.state_count = enumerate_states(k).size();
    t.pairs_at_distance = distance_histogram(k);
    t.max_distance = static_cast<int>(t.pairs_at_distance.size()) - 1;
    for (const auto& s : task_shapes(k, cfg, grid)) {
        t.cells.push_back({s.min_moves, s.slack, s.seconds_per_move, s.min_moves + s.slack,
                           std::int64_t{s.seconds_per_move} * 1000 * s.min_moves, s.challenge});
    }
    return t;
}

inline std::string format_calibration(const CalibrationTable& t) {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "disks %d: %zu states, max distance %d\n\n", t.disks, t.state_count, t.max_distance);
    out += buf;
    out += "distance  ordered_pairs\n";
    for (std::size_t d = 0; d < t.pairs_at_distance.size(); ++d) {
        std::snprintf(buf, sizeof buf, "%8zu  %13zu\n", d, t.pairs_at_distance[d]);
        out += buf;
    }
    out += "\nmin_moves  slack  s_per_move  move_budget  time_budget_ms  challenge\n";
    for (const auto& c : t.cells) {
        std::snprintf(buf, sizeof buf, "%9d  %5d  %10d  %11d  %14lld  %9.4f\n", c.min_moves, c.slack, c.seconds_per_move,
                      c.move_budget, static_cast<long long>(c.time_budget_ms), c.challenge);
        out += buf;
    }
    return out;
}

} // namespace xroom
