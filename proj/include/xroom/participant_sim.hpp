/**
 * participant_sim.hpp: scripted synthetic participant
 *
 * Puzzle behaviour: a trial succeeds with probability
 * logistic((true_skill - challenge) / temperature). Successful attempts
 * replay a BFS-optimal path; failed attempts play a partial optimal path
 * and then let the clock run out.
 *
 * Physiology: a raised-cosine PPG whose rate depends on the experienced
 * zone, and a GSR level with Poisson phasic steps whose rate also depends
 * on the zone. Both are streaming generators so a session driver can pull
 * samples one at a time while the zone changes underneath.
 *
 * All randomness comes from std::mt19937_64, whose output sequence is
 * fixed by the standard, so runs are reproducible across platforms.
 */

#pragma once

#include "xroom/error.hpp"
#include "xroom/flow.hpp"
#include "xroom/puzzle.hpp"
#include "xroom/random.hpp"
#include "xroom/sensor_hub.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace xroom {

struct SimProfile {
    double true_skill = 0.5;
    double temperature = 0.1;
    double base_hr_bpm = 70.0;
    double hr_anxiety_gain_bpm = 20.0;
    double gsr_base = 2.0;
    std::uint64_t rng_seed = 42;

    void validate() const {
        if (!(true_skill >= 0.0 && true_skill <= 1.0)) fail(ErrorCode::InvalidArgument, "true_skill must lie in [0,1]");
        if (!(temperature > 0.0)) fail(ErrorCode::InvalidArgument, "temperature must be positive");
        if (!(base_hr_bpm > 0.0)) fail(ErrorCode::InvalidArgument, "base heart rate must be positive");
    }
};

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double success_probability(double true_skill, double challenge, double temperature) {
    return logistic((true_skill - challenge) / temperature);
}

struct TimedMove {
    std::int64_t offset_ms = 0;  // from trial start
    Move move;
};

struct AttemptPlan {
    bool will_solve = false;
    std::vector<TimedMove> moves;
};

class SimParticipant {
public:
    explicit SimParticipant(SimProfile profile) : profile_(profile), rng_(profile.rng_seed) { profile_.validate(); }

    const SimProfile& profile() const noexcept { return profile_; }
    std::mt19937_64& rng() noexcept { return rng_; }

    AttemptPlan plan_attempt(const PuzzleTask& task) {
        const double p = success_probability(profile_.true_skill, task.challenge, profile_.temperature);
        AttemptPlan plan;
        plan.will_solve = unit_uniform(rng_) < p;
        auto path = shortest_path(task.start, task.target);
        const auto budget = task.time_budget_ms;
        std::int64_t span_ms = 0;
        if (plan.will_solve) {
            // Pace: the budget scaled by (1 + (1 - skill)) / 2, times a seeded factor in [0.6, 1).
            const double pace = (1.0 + (1.0 - profile_.true_skill)) / 2.0;
            span_ms = static_cast<std::int64_t>(static_cast<double>(budget) * pace * (0.6 + 0.4 * unit_uniform(rng_)));
        } else {
            const auto partial = path.empty() ? 0 : static_cast<std::size_t>(rng_() % path.size());
            path.resize(partial);
            span_ms = static_cast<std::int64_t>(static_cast<double>(budget) * 0.9);
        }
        span_ms = std::clamp<std::int64_t>(span_ms, static_cast<std::int64_t>(path.size()), budget - 1);

        std::vector<double> weights(path.size());
        double total = 0.0;
        for (auto& w : weights) total += (w = 0.5 + unit_uniform(rng_));
        double acc = 0.0;
        for (std::size_t i = 0; i < path.size(); ++i) {
            acc += weights[i];
            const auto at = static_cast<std::int64_t>(std::floor(static_cast<double>(span_ms) * acc / total));
            plan.moves.push_back({std::min(at, span_ms), path[i]});
        }
        return plan;
    }

    /// Plays one attempt and adjudicates it the way the engine would.
    TrialOutcome solve_attempt(const PuzzleTask& task, std::int64_t trial_start_ms = 0) {
        const auto plan = plan_attempt(task);
        TrialOutcome out;
        auto state = task.start;
        for (const auto& tm : plan.moves) {
            state = apply_move(state, tm.move);
            ++out.moves_used;
            out.move_log.push_back({trial_start_ms + tm.offset_ms, tm.move, true});
        }
        out.solved = plan.will_solve && is_solved(state, task);
        if (out.solved) {
            out.time_used_ms = plan.moves.empty() ? 0 : plan.moves.back().offset_ms;
            out.cause = CloseCause::Solved;
        } else {
            out.time_used_ms = task.time_budget_ms;
            out.cause = CloseCause::TimeBudgetExhausted;
        }
        return out;
    }

private:
    SimProfile profile_;
    std::mt19937_64 rng_;
};

/// One-shot attempt seeded from the profile.
inline TrialOutcome solve_attempt(const PuzzleTask& task, const SimProfile& profile) {
    SimParticipant p(profile);
    return p.solve_attempt(task);
}

struct SynthRates {
    double ppg_hz = 64.0;
    double gsr_hz = 16.0;
    double eye_hz = 60.0;
};

inline double zone_heart_rate(const SimProfile& p, FlowZone zone) {
    switch (zone) {
    case FlowZone::Anxiety: return p.base_hr_bpm + p.hr_anxiety_gain_bpm;
    case FlowZone::Boredom: return p.base_hr_bpm - 5.0;
    case FlowZone::Flow: break;
    }
    return p.base_hr_bpm;
}

/// Phasic GSR events per minute.
inline double zone_phasic_rate(FlowZone zone) {
    switch (zone) {
    case FlowZone::Anxiety: return 6.0;
    case FlowZone::Flow: return 2.0;
    case FlowZone::Boredom: return 0.5;
    }
    return 2.0;
}

/// Fixed-rate sample clock: tick i lands at start + floor(i * 1000 / rate).
class SampleClock {
public:
    SampleClock(std::int64_t start_ms, double rate_hz) : start_(start_ms), rate_(rate_hz) {}
    std::int64_t next_ts() const {
        return start_ + static_cast<std::int64_t>(std::floor(static_cast<double>(index_) * 1000.0 / rate_));
    }
    std::int64_t advance() {
        const auto t = next_ts();
        ++index_;
        return t;
    }
    double rate_hz() const noexcept { return rate_; }

private:
    std::int64_t start_;
    double rate_;
    std::uint64_t index_ = 0;
};

class PpgSynth {
public:
    PpgSynth(const SimProfile& p, std::int64_t start_ms, double rate_hz = 64.0, std::string stream_id = "ppg")
        : profile_(p), clock_(start_ms, rate_hz), rng_(mix_seed(p.rng_seed, 101)), id_(std::move(stream_id)),
          last_ts_(start_ms) {}

    std::int64_t next_ts() const { return clock_.next_ts(); }

    Sample take(FlowZone zone) {
        const auto t = clock_.advance();
        if (ibi_ms_ <= 0.0) ibi_ms_ = draw_ibi(zone);
        phase_ += static_cast<double>(t - last_ts_) / ibi_ms_;
        last_ts_ = t;
        while (phase_ >= 1.0) {
            phase_ -= 1.0;
            ibi_ms_ = draw_ibi(zone);
        }
        const double wave = 0.5 + 0.5 * std::cos(2.0 * std::numbers::pi * phase_);
        const double noise = kNoise * (2.0 * unit_uniform(rng_) - 1.0);
        return {id_, t, {wave + noise}};
    }

private:
    static constexpr double kIbiJitter = 0.02;
    static constexpr double kNoise = 0.02;

    double draw_ibi(FlowZone zone) {
        const double ibi = 60000.0 / zone_heart_rate(profile_, zone);
        return ibi * std::clamp(1.0 + kIbiJitter * standard_normal(rng_), 0.9, 1.1);
    }

    SimProfile profile_;
    SampleClock clock_;
    std::mt19937_64 rng_;
    std::string id_;
    std::int64_t last_ts_;
    double phase_ = 0.0;
    double ibi_ms_ = 0.0;
};

class GsrSynth {
public:
    GsrSynth(const SimProfile& p, std::int64_t start_ms, double rate_hz = 16.0, std::string stream_id = "gsr")
        : profile_(p), clock_(start_ms, rate_hz), rng_(mix_seed(p.rng_seed, 202)), id_(std::move(stream_id)),
          last_ts_(start_ms) {}

    std::int64_t next_ts() const { return clock_.next_ts(); }

    Sample take(FlowZone zone) {
        const auto t = clock_.advance();
        const double dt = static_cast<double>(t - last_ts_);
        last_ts_ = t;
        phasic_ *= std::exp(-dt / kRecoveryMs);
        const double p_event = zone_phasic_rate(zone) * dt / 60000.0;
        if (unit_uniform(rng_) < p_event) phasic_ += kStep;
        const double noise = 0.002 * (2.0 * unit_uniform(rng_) - 1.0);
        return {id_, t, {profile_.gsr_base + phasic_ + noise}};
    }

private:
    static constexpr double kRecoveryMs = 4000.0;
    static constexpr double kStep = 0.3;

    SimProfile profile_;
    SampleClock clock_;
    std::mt19937_64 rng_;
    std::string id_;
    std::int64_t last_ts_;
    double phasic_ = 0.0;
};

/// Normalised gaze position random walk; recorded raw only.
class GazeSynth {
public:
    GazeSynth(std::uint64_t seed, std::int64_t start_ms, double rate_hz = 60.0, std::string stream_id = "eye")
        : clock_(start_ms, rate_hz), rng_(mix_seed(seed, 303)), id_(std::move(stream_id)) {}

    std::int64_t next_ts() const { return clock_.next_ts(); }

    Sample take(FlowZone) {
        const auto t = clock_.advance();
        x_ = std::clamp(x_ + 0.01 * standard_normal(rng_), 0.0, 1.0);
        y_ = std::clamp(y_ + 0.01 * standard_normal(rng_), 0.0, 1.0);
        return {id_, t, {x_, y_}};
    }

private:
    SampleClock clock_;
    std::mt19937_64 rng_;
    std::string id_;
    double x_ = 0.5;
    double y_ = 0.5;
};

/// Batch PPG + GSR for a fixed zone over [0, duration_ms), merged by timestamp.
inline std::vector<Sample> synth_signals(FlowZone zone, std::int64_t duration_ms, const SimProfile& profile,
                                         SynthRates rates = {}) {
    if (duration_ms <= 0) fail(ErrorCode::InvalidArgument, "duration must be positive");
    profile.validate();
    PpgSynth ppg(profile, 0, rates.ppg_hz);
    GsrSynth gsr(profile, 0, rates.gsr_hz);
    std::vector<Sample> out;
    while (true) {
        const bool ppg_due = ppg.next_ts() < duration_ms;
        const bool gsr_due = gsr.next_ts() < duration_ms;
        if (!ppg_due && !gsr_due) break;
        if (ppg_due && (!gsr_due || ppg.next_ts() <= gsr.next_ts())) {
            out.push_back(ppg.take(zone));
        } else {
            out.push_back(gsr.take(zone));
        }
    }
    return out;
}

} // namespace xroom
