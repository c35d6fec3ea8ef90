/**
 * flow.hpp: flow-theory controller
 *
 * Skill and challenge live on a shared [0,1] axis. A task's challenge is a
 * weighted blend of solution depth, time pressure and move slack; skill is
 * an exponentially weighted average of per-trial performance scores. The
 * gap between the two selects one of three zones:
 *
 *   challenge - skill > band   -> Anxiety
 *   skill - challenge > band   -> Boredom
 *   otherwise                  -> Flow
 */

#pragma once

#include "xroom/error.hpp"
#include "xroom/puzzle.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace xroom {

enum class FlowZone { Anxiety, Flow, Boredom };

/// Elicitation targets are the three zones; "stress" parses as Anxiety.
using TargetEmotion = FlowZone;

inline const char* zone_name(FlowZone z) {
    switch (z) {
    case FlowZone::Anxiety: return "anxiety";
    case FlowZone::Flow: return "flow";
    case FlowZone::Boredom: return "boredom";
    }
    return "flow";
}

inline std::optional<FlowZone> parse_zone(std::string_view s) {
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "anxiety" || lower == "stress") return FlowZone::Anxiety;
    if (lower == "flow") return FlowZone::Flow;
    if (lower == "boredom") return FlowZone::Boredom;
    return std::nullopt;
}

struct ChallengeLevel {
    double value = 0.0;

    friend bool operator==(const ChallengeLevel&, const ChallengeLevel&) = default;
};

struct ChallengeWeights {
    double depth = 0.5;
    double time = 0.3;
    double slack = 0.2;

    friend bool operator==(const ChallengeWeights&, const ChallengeWeights&) = default;
};

struct ScoreWeights {
    double solved = 0.5;
    double time = 0.3;
    double efficiency = 0.2;

    friend bool operator==(const ScoreWeights&, const ScoreWeights&) = default;
};

inline constexpr int kMaxCountedSlack = 3;

struct ControllerConfig {
    double flow_band = 0.15;
    double ewma_alpha = 0.3;
    double target_offset = 0.30;
    ChallengeWeights challenge_weights;
    ScoreWeights score_weights;
    double t_ref_ms_per_move = 4000.0;

    void validate() const {
        const auto near_one = [](double s) { return std::abs(s - 1.0) <= 1e-9; };
        const auto& cw = challenge_weights;
        const auto& sw = score_weights;
        if (cw.depth < 0 || cw.time < 0 || cw.slack < 0 || !near_one(cw.depth + cw.time + cw.slack)) {
            fail(ErrorCode::InvalidConfig, "challenge weights must be non-negative and sum to 1");
        }
        if (sw.solved < 0 || sw.time < 0 || sw.efficiency < 0 || !near_one(sw.solved + sw.time + sw.efficiency)) {
            fail(ErrorCode::InvalidConfig, "score weights must be non-negative and sum to 1");
        }
        if (!(flow_band > 0.0 && flow_band < 0.5)) fail(ErrorCode::InvalidConfig, "flow_band must lie in (0, 0.5)");
        if (!(ewma_alpha > 0.0 && ewma_alpha <= 1.0)) fail(ErrorCode::InvalidConfig, "ewma_alpha must lie in (0, 1]");
        if (!(target_offset > flow_band)) fail(ErrorCode::InvalidConfig, "target_offset must exceed flow_band");
        if (!(t_ref_ms_per_move > 0.0)) fail(ErrorCode::InvalidConfig, "t_ref_ms_per_move must be positive");
    }

    friend bool operator==(const ControllerConfig&, const ControllerConfig&) = default;
};

inline double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

/// Challenge of a task described by its depth, slack and time budget.
inline ChallengeLevel challenge_of(int disk_count, int min_moves, int slack, std::int64_t time_budget_ms,
                                   const ControllerConfig& cfg = {}) {
    const auto& w = cfg.challenge_weights;
    double depth = 0.0;
    double time = 0.0;
    if (min_moves > 0) {
        const double diameter = static_cast<double>((std::int64_t{1} << disk_count) - 1);
        depth = static_cast<double>(min_moves) / diameter;
        time = clamp01(1.0 - static_cast<double>(time_budget_ms) / (cfg.t_ref_ms_per_move * min_moves));
    }
    const double slack_term = 1.0 - static_cast<double>(std::min(slack, kMaxCountedSlack)) / kMaxCountedSlack;
    return {clamp01(w.depth * depth + w.time * time + w.slack * slack_term)};
}

inline ChallengeLevel compute_challenge(const PuzzleTask& task, const ControllerConfig& cfg = {}) {
    return challenge_of(task.disk_count(), task.min_moves, task.slack, task.time_budget_ms, cfg);
}

enum class CloseCause { Open, Solved, MoveBudgetExhausted, TimeBudgetExhausted };

inline const char* cause_name(CloseCause c) {
    switch (c) {
    case CloseCause::Open: return "open";
    case CloseCause::Solved: return "solved";
    case CloseCause::MoveBudgetExhausted: return "move_budget_exhausted";
    case CloseCause::TimeBudgetExhausted: return "time_budget_exhausted";
    }
    return "open";
}

inline std::optional<CloseCause> parse_cause(std::string_view s) {
    for (auto c : {CloseCause::Open, CloseCause::Solved, CloseCause::MoveBudgetExhausted, CloseCause::TimeBudgetExhausted}) {
        if (s == cause_name(c)) return c;
    }
    return std::nullopt;
}

struct MoveLogEntry {
    std::int64_t session_ts_ms = 0;
    Move move;
    bool accepted = false;

    friend bool operator==(const MoveLogEntry&, const MoveLogEntry&) = default;
};

struct TrialOutcome {
    bool solved = false;
    int moves_used = 0;
    std::int64_t time_used_ms = 0;
    int illegal_attempts = 0;
    CloseCause cause = CloseCause::Open;
    std::vector<MoveLogEntry> move_log;

    friend bool operator==(const TrialOutcome&, const TrialOutcome&) = default;
};

/// Task-dependent performance score in [0,1].
inline double score_trial(const TrialOutcome& outcome, const PuzzleTask& task, const ControllerConfig& cfg = {}) {
    if (outcome.solved && outcome.moves_used < task.min_moves) {
        fail(ErrorCode::InconsistentOutcome, "solved with fewer moves than the minimal solution");
    }
    if (outcome.moves_used < 0 || outcome.time_used_ms < 0) {
        fail(ErrorCode::InconsistentOutcome, "negative moves or time");
    }
    if (!outcome.solved) return 0.0;
    const auto& w = cfg.score_weights;
    const double remaining = clamp01(1.0 - static_cast<double>(outcome.time_used_ms) / static_cast<double>(task.time_budget_ms));
    const double efficiency =
        outcome.moves_used == 0 ? 0.0 : std::min(1.0, static_cast<double>(task.min_moves) / outcome.moves_used);
    return clamp01(w.solved + w.time * remaining + w.efficiency * efficiency);
}

struct SkillEstimate {
    double value = 0.5;
    int trials_observed = 0;
    double last_score = 0.0;

    friend bool operator==(const SkillEstimate&, const SkillEstimate&) = default;
};

inline SkillEstimate update_skill(const SkillEstimate& prior, double score, const ControllerConfig& cfg = {}) {
    if (!(score >= 0.0 && score <= 1.0)) fail(ErrorCode::InvalidArgument, "score outside [0,1]");
    SkillEstimate next = prior;
    next.value = prior.trials_observed == 0 ? score : (1.0 - cfg.ewma_alpha) * prior.value + cfg.ewma_alpha * score;
    next.trials_observed = prior.trials_observed + 1;
    next.last_score = score;
    return next;
}

// Gaps equal to the band (up to rounding of decimal grid values) count as Flow.
inline constexpr double kBandTolerance = 1e-9;

inline FlowZone classify_zone(double skill, ChallengeLevel challenge, const ControllerConfig& cfg = {}) {
    const double gap = challenge.value - skill;
    if (gap > cfg.flow_band + kBandTolerance) return FlowZone::Anxiety;
    if (-gap > cfg.flow_band + kBandTolerance) return FlowZone::Boredom;
    return FlowZone::Flow;
}

inline FlowZone classify_zone(const SkillEstimate& skill, ChallengeLevel challenge, const ControllerConfig& cfg = {}) {
    return classify_zone(skill.value, challenge, cfg);
}

inline ChallengeLevel next_challenge(double skill, TargetEmotion target, const ControllerConfig& cfg = {}) {
    switch (target) {
    case FlowZone::Anxiety: return {clamp01(skill + cfg.target_offset)};
    case FlowZone::Boredom: return {clamp01(skill - cfg.target_offset)};
    case FlowZone::Flow: break;
    }
    return {clamp01(skill)};
}

inline ChallengeLevel next_challenge(const SkillEstimate& skill, TargetEmotion target, const ControllerConfig& cfg = {}) {
    return next_challenge(skill.value, target, cfg);
}

} // namespace xroom
