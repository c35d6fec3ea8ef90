#include "oracles/oracles.hpp"
#include "xroom/flow.hpp"
#include "xroom/puzzle.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace xroom;

namespace {

PuzzleTask classic(int budget_moves, std::int64_t budget_ms) {
    PuzzleTask t;
    t.move_budget = budget_moves;
    t.slack = budget_moves - 7;
    t.time_budget_ms = budget_ms;
    return t;
}

TrialOutcome solved(int moves, std::int64_t ms) {
    TrialOutcome o;
    o.solved = true;
    o.moves_used = moves;
    o.time_used_ms = ms;
    o.cause = CloseCause::Solved;
    return o;
}

} // namespace

TEST(Challenge, MatchesFormulaAcrossGrid) {
    for (int k = 1; k <= 5; ++k) {
        for (int d = 0; d < (1 << k); ++d) {
            for (int slack = 0; slack <= 5; ++slack) {
                for (std::int64_t budget : {500, 2000, 7000, 28000, 60000}) {
                    EXPECT_NEAR(challenge_of(k, d, slack, budget).value, oracle::challenge(k, d, slack, static_cast<double>(budget)),
                                1e-12);
                }
            }
        }
    }
}

TEST(Challenge, ClassicTightTaskIsHigh) {
    // full depth, no slack, 2 s per move
    EXPECT_NEAR(compute_challenge(classic(7, 14000)).value, 0.5 + 0.3 * 0.5 + 0.2, 1e-12);
}

TEST(Challenge, Monotone) {
    EXPECT_GT(challenge_of(3, 5, 0, 10000).value, challenge_of(3, 5, 2, 10000).value);
    EXPECT_GT(challenge_of(3, 5, 1, 10000).value, challenge_of(3, 5, 1, 20000).value);
    EXPECT_GT(challenge_of(3, 6, 1, 24000).value, challenge_of(3, 3, 1, 12000).value);
}

TEST(Score, UnsolvedIsZero) {
    TrialOutcome o;
    o.moves_used = 5;
    o.time_used_ms = 28000;
    o.cause = CloseCause::TimeBudgetExhausted;
    EXPECT_EQ(score_trial(o, classic(7, 28000)), 0.0);
}

TEST(Score, FormulaAndRange) {
    const auto task = classic(9, 28000);
    for (int moves = 7; moves <= 9; ++moves) {
        for (std::int64_t ms : {0, 1000, 14000, 27999, 28000}) {
            const double s = score_trial(solved(moves, ms), task);
            EXPECT_NEAR(s, oracle::score(true, moves, 7, static_cast<double>(ms), 28000.0), 1e-12);
            EXPECT_GE(s, 0.0);
            EXPECT_LE(s, 1.0);
        }
    }
    EXPECT_NEAR(score_trial(solved(7, 0), task), 1.0, 1e-15);
}

TEST(Score, SolvedBelowMinimumIsInconsistent) {
    try {
        score_trial(solved(3, 1000), classic(7, 28000));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InconsistentOutcome);
    }
}

TEST(Skill, FirstTrialSetsValueThenEwma) {
    SkillEstimate s;
    s = update_skill(s, 0.8);
    EXPECT_EQ(s.value, 0.8);
    EXPECT_EQ(s.trials_observed, 1);
    s = update_skill(s, 0.2);
    EXPECT_DOUBLE_EQ(s.value, 0.7 * 0.8 + 0.3 * 0.2);
    EXPECT_THROW(update_skill(s, 1.1), Error);
}

TEST(Skill, RecurrenceAgainstOracle) {
    std::mt19937_64 rng(3);
    SkillEstimate s;
    double ref = 0.5;
    for (int i = 0; i < 200; ++i) {
        const double score = static_cast<double>(rng() % 1001) / 1000.0;
        ref = oracle::ewma(ref, i, score);
        s = update_skill(s, score);
        EXPECT_NEAR(s.value, ref, 1e-12);
        EXPECT_GE(s.value, 0.0);
        EXPECT_LE(s.value, 1.0);
    }
}

TEST(Zone, Examples) {
    EXPECT_EQ(classify_zone(0.5, {0.9}), FlowZone::Anxiety);
    EXPECT_EQ(classify_zone(0.5, {0.5}), FlowZone::Flow);
    EXPECT_EQ(classify_zone(0.5, {0.1}), FlowZone::Boredom);
    // Boundaries belong to Flow.
    EXPECT_EQ(classify_zone(0.5, {0.65}), FlowZone::Flow);
    EXPECT_EQ(classify_zone(0.5, {0.35}), FlowZone::Flow);
    EXPECT_EQ(classify_zone(0.5, {0.6501}), FlowZone::Anxiety);
}

TEST(Zone, GridAgreesWithExactLattice) {
    for (int si = 0; si <= 100; ++si) {
        for (int ci = 0; ci <= 100; ++ci) {
            const auto z = classify_zone(si / 100.0, {ci / 100.0});
            EXPECT_EQ(static_cast<int>(z), oracle::zone_millis(si * 10, ci * 10)) << si << "," << ci;
        }
    }
}

TEST(NextChallenge, OffsetsAndClamp) {
    EXPECT_NEAR(next_challenge(0.5, FlowZone::Anxiety).value, 0.8, 1e-15);
    EXPECT_NEAR(next_challenge(0.5, FlowZone::Flow).value, 0.5, 1e-15);
    EXPECT_NEAR(next_challenge(0.5, FlowZone::Boredom).value, 0.2, 1e-15);
    EXPECT_EQ(next_challenge(0.9, FlowZone::Anxiety).value, 1.0);
    EXPECT_EQ(next_challenge(0.1, FlowZone::Boredom).value, 0.0);
}

TEST(NextChallenge, LandsInTargetWhereverUnclamped) {
    for (int si = 0; si <= 100; ++si) {
        const double s = si / 100.0;
        for (auto target : {FlowZone::Anxiety, FlowZone::Flow, FlowZone::Boredom}) {
            const auto c = next_challenge(s, target);
            const double raw = target == FlowZone::Anxiety ? s + 0.3 : (target == FlowZone::Boredom ? s - 0.3 : s);
            if (raw < 0.0 || raw > 1.0) continue;
            EXPECT_EQ(classify_zone(s, c), target) << "skill " << s;
        }
    }
}

TEST(Config, Validation) {
    ControllerConfig c;
    EXPECT_NO_THROW(c.validate());
    c.flow_band = 0.4;
    EXPECT_THROW(c.validate(), Error);  // offset must exceed the band
    c = {};
    c.challenge_weights.depth = 0.9;
    EXPECT_THROW(c.validate(), Error);
    c = {};
    c.ewma_alpha = 0.0;
    EXPECT_THROW(c.validate(), Error);
}

TEST(Names, RoundTrip) {
    for (auto z : {FlowZone::Anxiety, FlowZone::Flow, FlowZone::Boredom}) EXPECT_EQ(parse_zone(zone_name(z)), z);
    EXPECT_EQ(parse_zone("stress"), FlowZone::Anxiety);
    EXPECT_FALSE(parse_zone("calm"));
    for (auto c : {CloseCause::Open, CloseCause::Solved, CloseCause::MoveBudgetExhausted, CloseCause::TimeBudgetExhausted}) {
        EXPECT_EQ(parse_cause(cause_name(c)), c);
    }
}
