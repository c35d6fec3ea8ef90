#include "xroom/participant_sim.hpp"
#include "xroom/physio.hpp"
#include "xroom/task_generator.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>

using namespace xroom;

TEST(SimParticipant, SuccessProbability) {
    EXPECT_DOUBLE_EQ(success_probability(0.5, 0.5, 0.1), 0.5);
    EXPECT_NEAR(success_probability(0.8, 0.5, 0.1), 1.0 / (1.0 + std::exp(-3.0)), 1e-15);
    EXPECT_LT(success_probability(0.2, 0.9, 0.1), 0.001);
    EXPECT_THROW((SimParticipant{SimProfile{1.2}}), Error);
    SimProfile p;
    p.temperature = 0.0;
    EXPECT_THROW(SimParticipant{p}, Error);
}

TEST(SimParticipant, AttemptsAreLegalAndAdjudicated) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        SimProfile p;
        p.true_skill = 0.5;
        p.rng_seed = seed;
        const auto task = generate_task({0.5}, 3, seed);
        const auto out = solve_attempt(task, p);
        EXPECT_NO_THROW(score_trial(out, task)) << seed;
        if (out.solved) {
            EXPECT_EQ(out.moves_used, task.min_moves);
            EXPECT_LT(out.time_used_ms, task.time_budget_ms);
        } else {
            EXPECT_LT(out.moves_used, task.min_moves);
            EXPECT_EQ(out.time_used_ms, task.time_budget_ms);
        }
        std::int64_t prev = 0;
        for (const auto& e : out.move_log) {
            EXPECT_GE(e.session_ts_ms, prev);
            prev = e.session_ts_ms;
        }
    }
}

TEST(SimParticipant, SuccessRateTracksLogistic) {
    const auto task = generate_task({0.5}, 3, 1);
    SimProfile p;
    p.true_skill = 0.55;
    p.rng_seed = 77;
    SimParticipant sim(p);
    int solved = 0;
    const int n = 4000;
    for (int i = 0; i < n; ++i) solved += sim.solve_attempt(task).solved ? 1 : 0;
    const double expected = success_probability(0.55, task.challenge, 0.1);
    const double sd = std::sqrt(expected * (1 - expected) / n);
    EXPECT_NEAR(static_cast<double>(solved) / n, expected, 4 * sd);
}

TEST(SimParticipant, Deterministic) {
    const auto task = generate_task({0.7}, 4, 3);
    SimProfile p;
    p.rng_seed = 5;
    EXPECT_EQ(solve_attempt(task, p), solve_attempt(task, p));
    EXPECT_EQ(synth_signals(FlowZone::Flow, 5000, p).size(), synth_signals(FlowZone::Flow, 5000, p).size());
    const auto a = synth_signals(FlowZone::Anxiety, 5000, p);
    const auto b = synth_signals(FlowZone::Anxiety, 5000, p);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].device_ts_ms, b[i].device_ts_ms);
        EXPECT_EQ(a[i].values, b[i].values);
    }
}

TEST(Synth, RatesWithinOnePerSecond) {
    const auto samples = synth_signals(FlowZone::Flow, 60000, SimProfile{});
    std::map<std::string, std::size_t> counts;
    for (const auto& s : samples) ++counts[s.stream_id];
    EXPECT_NEAR(static_cast<double>(counts["ppg"]) / 60.0, 64.0, 1.0);
    EXPECT_NEAR(static_cast<double>(counts["gsr"]) / 60.0, 16.0, 1.0);
    std::int64_t prev = INT64_MIN;
    for (const auto& s : samples) {
        EXPECT_GE(s.device_ts_ms, prev);
        prev = s.device_ts_ms;
    }
    EXPECT_THROW(synth_signals(FlowZone::Flow, 0, SimProfile{}), Error);
}

TEST(Synth, HeartRateFollowsZone) {
    SimProfile p;
    std::map<FlowZone, double> hr;
    for (auto zone : {FlowZone::Anxiety, FlowZone::Flow, FlowZone::Boredom}) {
        PpgSynth ppg(p, 0);
        std::vector<std::int64_t> ts;
        std::vector<double> v;
        for (int i = 0; i < 64 * 60; ++i) {
            const auto s = ppg.take(zone);
            ts.push_back(s.device_ts_ms);
            v.push_back(s.values[0]);
        }
        hr[zone] = hrv_metrics(detect_beats(ts, v)).mean_hr_bpm;
        EXPECT_NEAR(hr[zone], zone_heart_rate(p, zone), 3.0) << zone_name(zone);
    }
    EXPECT_GT(hr[FlowZone::Anxiety], hr[FlowZone::Flow]);
    EXPECT_GT(hr[FlowZone::Flow], hr[FlowZone::Boredom]);
}

TEST(Synth, PhasicActivityFollowsZone) {
    SimProfile p;
    std::map<FlowZone, int> peaks;
    for (auto zone : {FlowZone::Anxiety, FlowZone::Boredom}) {
        GsrSynth gsr(p, 0);
        std::vector<SyncedSample> series;
        for (int i = 0; i < 16 * 600; ++i) {
            auto s = gsr.take(zone);
            series.push_back({s.stream_id, s.device_ts_ms, s.values, false});
        }
        peaks[zone] = gsr_features(series, {0, 600000}).phasic_peak_count;
    }
    // ten minutes: about 60 events versus about 5
    EXPECT_GT(peaks[FlowZone::Anxiety], 30);
    EXPECT_LT(peaks[FlowZone::Boredom], 15);
}
