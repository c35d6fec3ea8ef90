#include "oracles/oracles.hpp"
#include "xroom/puzzle.hpp"
#include "xroom/task_generator.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace xroom;

namespace {

RodContents rods_of(std::vector<int> r0, std::vector<int> r1, std::vector<int> r2) { return {r0, r1, r2}; }

oracle::Rods to_oracle(const HanoiState& s) {
    const auto r = s.rods();
    return oracle::from_top_first({r[0], r[1], r[2]});
}

} // namespace

TEST(HanoiState, TowerAndRods) {
    const auto s = HanoiState::tower(3);
    EXPECT_EQ(s.disk_count(), 3);
    EXPECT_EQ(s.rods()[0], (std::vector<int>{1, 2, 3}));
    EXPECT_TRUE(s.rods()[1].empty());
    EXPECT_EQ(s.top(0), 1);
    EXPECT_FALSE(s.top(2).has_value());
}

TEST(HanoiState, FromRodsRejectsBrokenInvariants) {
    EXPECT_THROW(HanoiState::from_rods(rods_of({2, 1}, {}, {})), Error);    // larger above smaller
    EXPECT_THROW(HanoiState::from_rods(rods_of({1}, {1}, {})), Error);      // duplicate
    EXPECT_THROW(HanoiState::from_rods(rods_of({1, 3}, {}, {})), Error);    // gap in ids
    EXPECT_THROW(HanoiState::from_rods(rods_of({}, {}, {})), Error);        // k = 0
    EXPECT_NO_THROW(HanoiState::from_rods(rods_of({2}, {1}, {3})));
}

TEST(HanoiState, IndexRoundTrip) {
    for (int k = 1; k <= 4; ++k) {
        for (std::size_t i = 0; i < pow3(k); ++i) EXPECT_EQ(HanoiState::from_index(k, i).index(), i);
    }
}

TEST(Move, Invariant) {
    EXPECT_THROW(make_move(1, 1), Error);
    EXPECT_THROW(make_move(0, 3), Error);
    EXPECT_EQ(make_move(0, 2).reversed(), make_move(2, 0));
}

TEST(LegalMoves, ClassicStart) {
    const auto moves = legal_moves(HanoiState::tower(3));
    EXPECT_EQ(moves, (std::vector<Move>{{0, 1}, {0, 2}}));
}

TEST(LegalMoves, SingleDiskOnMiddleRod) {
    EXPECT_EQ(legal_moves(HanoiState::tower(1, 1)), (std::vector<Move>{{1, 0}, {1, 2}}));
}

TEST(LegalMoves, OneDiskPerRod) {
    const auto s = HanoiState::from_rods(rods_of({1}, {2}, {3}));
    EXPECT_EQ(legal_moves(s), (std::vector<Move>{{0, 1}, {0, 2}, {1, 2}}));
}

TEST(LegalMoves, MatchesBruteForceOnEveryState) {
    for (int k = 1; k <= 4; ++k) {
        for (const auto& s : enumerate_states(k)) {
            std::vector<std::pair<int, int>> got;
            for (auto m : legal_moves(s)) got.emplace_back(m.from_rod, m.to_rod);
            EXPECT_EQ(got, oracle::moves(to_oracle(s)));
        }
    }
}

TEST(ApplyMove, ClassicFirstMove) {
    const auto s = apply_move(HanoiState::tower(3), {0, 2});
    EXPECT_EQ(s.rods()[0], (std::vector<int>{2, 3}));
    EXPECT_EQ(s.rods()[2], (std::vector<int>{1}));
}

TEST(ApplyMove, LargerOntoSmallerIsIllegal) {
    const auto s = HanoiState::from_rods(rods_of({2}, {1}, {}));
    try {
        apply_move(s, {0, 1});
        FAIL() << "expected IllegalMove";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IllegalMove);
    }
}

TEST(ApplyMove, EmptySourceIsIllegal) {
    try {
        apply_move(HanoiState::tower(2), {1, 2});
        FAIL() << "expected IllegalMove";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IllegalMove);
    }
}

TEST(ApplyMove, PureAndReversible) {
    const auto s = HanoiState::tower(3);
    const auto t = apply_move(s, {0, 1});
    EXPECT_EQ(s, HanoiState::tower(3));
    EXPECT_EQ(apply_move(t, {1, 0}), s);
}

TEST(ApplyMove, PreservesInvariantsEverywhere) {
    for (int k = 1; k <= 4; ++k) {
        for (const auto& s : enumerate_states(k)) {
            for (auto m : legal_moves(s)) {
                const auto n = apply_move(s, m);
                EXPECT_TRUE(oracle::valid(to_oracle(n), k));
                EXPECT_EQ(apply_move(n, m.reversed()), s);
            }
        }
    }
}

TEST(MinMoves, ClassicIsSeven) {
    EXPECT_EQ(min_moves(HanoiState::tower(3, 0), HanoiState::tower(3, 2)), 7);
    EXPECT_EQ(oracle::distance(to_oracle(HanoiState::tower(3, 0)), to_oracle(HanoiState::tower(3, 2))), 7);
}

TEST(MinMoves, IdentityAndMismatch) {
    const auto s = HanoiState::from_rods(rods_of({1}, {2}, {3}));
    EXPECT_EQ(min_moves(s, s), 0);
    try {
        min_moves(HanoiState::tower(2), HanoiState::tower(3));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DiskCountMismatch);
    }
}

TEST(MinMoves, AgreesWithBruteForceBfs) {
    for (int k = 1; k <= 3; ++k) {
        const auto states = enumerate_states(k);
        for (const auto& a : states) {
            const auto dist = oracle::bfs(to_oracle(a));
            for (const auto& b : states) EXPECT_EQ(min_moves(a, b), dist.at(oracle::key(to_oracle(b))));
        }
    }
}

TEST(MinMoves, SymmetricOnRandomPairs) {
    std::mt19937_64 rng(7);
    const auto states = enumerate_states(3);
    for (int i = 0; i < 50; ++i) {
        const auto& a = states[rng() % states.size()];
        const auto& b = states[rng() % states.size()];
        EXPECT_EQ(min_moves(a, b), min_moves(b, a));
    }
}

TEST(MinMoves, TriangleInequality) {
    std::mt19937_64 rng(11);
    const auto states = enumerate_states(3);
    for (int i = 0; i < 100; ++i) {
        const auto& a = states[rng() % states.size()];
        const auto& b = states[rng() % states.size()];
        const auto& c = states[rng() % states.size()];
        EXPECT_LE(min_moves(a, c), min_moves(a, b) + min_moves(b, c));
    }
}

TEST(EnumerateStates, CountsAndValidity) {
    for (int k = 1; k <= 5; ++k) {
        const auto states = enumerate_states(k);
        EXPECT_EQ(states.size(), pow3(k));
        std::set<std::size_t> seen;
        for (const auto& s : states) {
            EXPECT_TRUE(oracle::valid(to_oracle(s), k));
            seen.insert(s.index());
        }
        EXPECT_EQ(seen.size(), states.size());
        EXPECT_EQ(oracle::all_states(k).size(), states.size());
    }
    EXPECT_EQ(enumerate_states(3), enumerate_states(3));
}

TEST(EnumerateStates, Bound) {
    try {
        enumerate_states(8);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::BoundExceeded);
    }
}

TEST(StateGraph, DiameterIsTwoToTheKMinusOne) {
    for (int k = 1; k <= 4; ++k) {
        int diameter = 0;
        for (const auto& a : oracle::all_states(k)) {
            for (const auto& [key, d] : oracle::bfs(a)) diameter = std::max(diameter, d);
        }
        EXPECT_EQ(diameter, (1 << k) - 1);
        const auto& table = all_pairs_distances(k);
        EXPECT_EQ(*std::max_element(table.begin(), table.end()), (1 << k) - 1);
    }
}

TEST(ShortestPath, ReplaySolvesTask) {
    PuzzleTask task;
    const auto path = shortest_path(task.start, task.target);
    ASSERT_EQ(path.size(), 7u);
    auto s = task.start;
    for (auto m : path) s = apply_move(s, m);
    EXPECT_TRUE(is_solved(s, task));
    EXPECT_FALSE(is_solved(task.start, task));
}

TEST(GenerateTask, ZeroRequestGivesNearestAttainable) {
    // start == target is never produced, so the floor is depth 1 with full slack.
    const auto t = generate_task({0.0}, 3, 42);
    EXPECT_EQ(t.min_moves, 1);
    EXPECT_EQ(t.slack, 3);
    EXPECT_EQ(t.time_budget_ms, 4000);
    EXPECT_NEAR(t.challenge, oracle::challenge(3, 1, 3, 4000), 1e-15);
    EXPECT_NEAR(t.challenge, 0.5 / 7.0, 1e-15);
    EXPECT_NO_THROW(t.validate());
}

TEST(GenerateTask, FullRequestGivesDiameterPair) {
    const auto t = generate_task({1.0}, 3, 42);
    EXPECT_EQ(t.min_moves, 7);
    EXPECT_EQ(t.slack, 0);
    EXPECT_EQ(t.time_budget_ms, 2000 * 7);
    EXPECT_EQ(min_moves(t.start, t.target), 7);
    EXPECT_NEAR(t.challenge, oracle::challenge(3, 7, 0, 14000), 1e-15);
}

TEST(GenerateTask, Deterministic) {
    EXPECT_EQ(generate_task({0.6}, 3, 42), generate_task({0.6}, 3, 42));
    EXPECT_THROW(generate_task({1.2}, 3, 1), Error);
    EXPECT_THROW(generate_task({-0.1}, 3, 1), Error);
}

TEST(GenerateTask, NearestOverExhaustiveScan) {
    // Oracle: scan every (pair, slack, pace) combination and take the smallest gap.
    const auto states = oracle::all_states(3);
    std::set<int> depths;
    for (const auto& [key, d] : oracle::bfs(states[0])) depths.insert(d);
    for (int r = 0; r <= 100; ++r) {
        const double req = r / 100.0;
        double best = 1e9;
        for (int d : depths) {
            if (d == 0) continue;
            for (int slack = 0; slack <= 3; ++slack) {
                for (int spm : {2, 3, 4, 6, 8}) best = std::min(best, std::abs(oracle::challenge(3, d, slack, spm * 1000.0 * d) - req));
            }
        }
        const auto t = generate_task({req}, 3, static_cast<std::uint64_t>(r));
        EXPECT_NEAR(std::abs(t.challenge - req), best, 1e-12) << "requested " << req;
        EXPECT_LE(std::abs(t.challenge - req), kMaxChallengeGap);
        EXPECT_NE(t.start, t.target);
        EXPECT_NO_THROW(t.validate());
        EXPECT_NEAR(compute_challenge(t).value, t.challenge, 1e-15);
    }
}

TEST(GenerateTask, SeedsSpreadOverPairs) {
    std::set<std::pair<std::size_t, std::size_t>> pairs;
    for (std::uint64_t seed = 0; seed < 64; ++seed) {
        const auto t = generate_task({0.5}, 3, seed);
        pairs.insert({t.start.index(), t.target.index()});
    }
    EXPECT_GT(pairs.size(), 10u);
}

TEST(GenerateTask, AlwaysValidAcrossDisks) {
    for (int k = 1; k <= 5; ++k) {
        for (int r = 0; r <= 20; ++r) {
            const double req = r / 20.0;
            try {
                const auto t = generate_task({req}, k, 99);
                EXPECT_NO_THROW(t.validate());
                EXPECT_LE(std::abs(t.challenge - req), kMaxChallengeGap);
            } catch (const Error& e) {
                EXPECT_EQ(e.code(), ErrorCode::Unattainable) << "k=" << k << " req=" << req;
            }
        }
    }
}
