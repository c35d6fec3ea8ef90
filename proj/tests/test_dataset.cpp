#include "xroom/dataset.hpp"
#include "xroom/participant_sim.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace xroom;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        path_ = fs::temp_directory_path() /
                ("xroom-" + std::string(info->name()) + "-" + std::to_string(::getpid()));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void sync(Session& s, const std::string& id, std::int64_t offset) {
    const SyncExchange x{0, 5 + offset, 5 + offset, 10};
    s.hub().update_clock(id, std::span<const SyncExchange>(&x, 1));
}

/// Three finished trials with PPG and GSR streaming throughout, one late sample and one missing report.
Session recorded_session() {
    SessionConfig cfg;
    cfg.trials = 3;
    Session s("ds-1", "p7", FlowZone::Anxiety, cfg, {{"room", "b"}, {"lighting", "dim"}});
    s.start();
    s.hub().register_stream({SensorKind::PPG, "", {"pulse"}, 64.0});
    s.hub().register_stream({SensorKind::GSR, "", {"conductance"}, 16.0});
    sync(s, "ppg", 12345);
    sync(s, "gsr", -5000);
    SimProfile profile;
    PpgSynth ppg(profile, 12345);
    GsrSynth gsr(profile, -5000);

    std::int64_t t = 0;
    auto stream_until = [&](std::int64_t until) {
        while (ppg.next_ts() - 12345 < until) s.ingest(ppg.take(FlowZone::Flow));
        while (gsr.next_ts() + 5000 < until) s.ingest(gsr.take(FlowZone::Flow));
    };
    for (int i = 0; i < 3; ++i) {
        s.next_trial(t);
        const auto path = shortest_path(s.live_state(), s.active_task().target);
        t += 3000;  // thinking time before the first move keeps every window long enough for HRV
        for (auto m : path) {
            t += 900;
            stream_until(t);
            s.submit_move(m, t);
        }
        stream_until(t + 1500);
        if (i == 1) s.ingest({"gsr", t - 5000 - 2000, {2.0}});  // arrives after its slot was released
        if (i == 2) {
            s.advance_to(t + cfg.report_timeout_ms);
        } else {
            SelfReport r;
            r.valence = 3 + i;
            r.arousal = 7;
            r.label = i == 0 ? ReportLabel::Anxiety : ReportLabel::Other;
            if (i == 1) r.other_text = "frustrated, \"stuck\"";
            s.submit_self_report(r, t + 1500);
        }
        t += 2000;
    }
    return s;
}

std::vector<std::string> messages(const std::vector<Finding>& fs) {
    std::vector<std::string> out;
    for (const auto& f : fs) out.push_back(to_string(f));
    return out;
}

bool any_contains(const std::vector<Finding>& fs, const std::string& needle) {
    for (const auto& f : fs) {
        if (to_string(f).find(needle) != std::string::npos) return true;
    }
    return false;
}

} // namespace

TEST(Dataset, RequiresTerminalSession) {
    Session s("ds-0", "p", FlowZone::Flow, SessionConfig{});
    s.start();
    try {
        make_dataset(s);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnfinishedSession);
    }
}

TEST(Dataset, AbortedBeforeAnyTrialIsValid) {
    TempDir tmp;
    Session s("ds-empty", "p", FlowZone::Boredom, SessionConfig{});
    s.start();
    s.hub().register_stream({SensorKind::EyeTracker, "", {"x", "y"}, 60.0});
    s.abort(250);
    const auto d = export_dataset(s, tmp.path());
    EXPECT_TRUE(d.trials.empty());
    EXPECT_EQ(slurp(tmp.path() / "trials.jsonl"), "");
    EXPECT_EQ(slurp(tmp.path() / "streams" / "eye.csv"), "session_ts_ms,x,y\n");
    const auto findings = validate_dataset(tmp.path());
    EXPECT_TRUE(findings.empty()) << ::testing::PrintToString(messages(findings));
    const auto back = read_dataset(tmp.path());
    EXPECT_EQ(back, d);
    EXPECT_EQ(back.meta.state, SessionState::Aborted);
    EXPECT_EQ(back.meta.end_ts_ms, 250);
}

TEST(Dataset, ContentsOfARecordedSession) {
    const auto s = recorded_session();
    ASSERT_EQ(s.state(), SessionState::Finished);
    const auto d = make_dataset(s);
    ASSERT_EQ(d.trials.size(), 3u);
    EXPECT_EQ(d.labels.size(), 2u);  // trial 2 timed out
    EXPECT_TRUE(d.trials[2].report_missing);
    ASSERT_EQ(d.streams.size(), 2u);
    for (const auto& st : d.streams) {
        std::int64_t prev = INT64_MIN;
        for (const auto& x : st.samples) {
            EXPECT_GE(x.session_ts_ms, prev);
            prev = x.session_ts_ms;
        }
        EXPECT_EQ(st.features.size(), 3u);
    }
    const auto& gsr = d.streams[1];
    EXPECT_EQ(std::count_if(gsr.samples.begin(), gsr.samples.end(), [](const auto& x) { return x.late; }), 1);
    const auto& ppg = d.streams[0];
    ASSERT_TRUE(ppg.features[0].hrv.has_value());
    EXPECT_NEAR(ppg.features[0].hrv->mean_hr_bpm, 70.0, 5.0);
    ASSERT_TRUE(gsr.features[0].gsr.has_value());
    EXPECT_NEAR(gsr.features[0].gsr->tonic_mean, 2.0, 0.5);
    // streams started at session time 0 after the offsets were removed
    EXPECT_EQ(ppg.samples.front().session_ts_ms, 0);
    EXPECT_EQ(gsr.samples.front().session_ts_ms, 0);
}

TEST(Dataset, RoundTripIsByteIdentical) {
    TempDir tmp;
    const auto d = export_dataset(recorded_session(), tmp.path() / "a");
    const auto back = read_dataset(tmp.path() / "a");
    EXPECT_EQ(back, d);
    write_dataset(back, tmp.path() / "b");
    for (const auto* f : {"session.json", "trials.jsonl", "labels.jsonl", "streams/ppg.csv", "streams/gsr.csv"}) {
        EXPECT_EQ(slurp(tmp.path() / "a" / f), slurp(tmp.path() / "b" / f)) << f;
    }
    const auto meta = json::parse(slurp(tmp.path() / "a" / "session.json"));
    EXPECT_EQ(meta.at("format"), "xroom-dataset/1");
    EXPECT_EQ(meta.at("scale_version"), kScaleVersion);
    EXPECT_EQ(meta.at("context").at("lighting"), "dim");
    EXPECT_EQ(meta.at("streams").at(0).at("clock").at("offset_ms"), 12345.0);
}

TEST(Dataset, EveryTrialLineCarriesTheSchema) {
    TempDir tmp;
    export_dataset(recorded_session(), tmp.path());
    std::istringstream lines(slurp(tmp.path() / "trials.jsonl"));
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) {
        const auto j = json::parse(line);
        for (const auto* key : {"trial_index", "task", "outcome", "predicted_zone", "skill_before", "skill_after", "score",
                                "target_emotion", "requested_challenge", "probe"}) {
            EXPECT_TRUE(j.contains(key)) << key;
        }
        EXPECT_EQ(j.at("trial_index"), n++);
    }
    EXPECT_EQ(n, 3);
}

TEST(Dataset, WideCsvMergesStreams) {
    const auto d = make_dataset(recorded_session());
    const auto csv = wide_csv(d);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "session_ts_ms,ppg.pulse,gsr.conductance");
    std::size_t rows = 0;
    for (char c : csv) rows += c == '\n';
    EXPECT_GE(rows - 1, d.streams[0].samples.size());
    EXPECT_LE(rows - 1, d.streams[0].samples.size() + d.streams[1].samples.size());
}

class CorruptedBundle : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = tmp_.path() / "bundle";
        export_dataset(recorded_session(), dir_);
        ASSERT_TRUE(validate_dataset(dir_).empty());
    }
    void rewrite(const std::string& file, const std::function<std::string(std::string)>& edit) {
        write_text(dir_ / file, edit(slurp(dir_ / file)));
    }
    TempDir tmp_;
    fs::path dir_;
};

TEST_F(CorruptedBundle, NonMonotoneRowNamesFileAndLine) {
    rewrite("streams/ppg.csv", [](std::string text) {
        // swap rows 3 and 4 (lines 4 and 5)
        std::vector<std::string> lines;
        std::istringstream in(text);
        for (std::string l; std::getline(in, l);) lines.push_back(l);
        std::swap(lines[3], lines[4]);
        std::string out;
        for (const auto& l : lines) out += l + "\n";
        return out;
    });
    const auto findings = validate_dataset(dir_);
    ASSERT_EQ(findings.size(), 1u) << ::testing::PrintToString(messages(findings));
    EXPECT_EQ(findings[0].file, "streams/ppg.csv");
    EXPECT_EQ(findings[0].line, 5u);
    EXPECT_NE(findings[0].message.find("not monotone"), std::string::npos);
    try {
        read_dataset(dir_);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SchemaViolation);
    }
}

TEST_F(CorruptedBundle, HeaderMismatch) {
    rewrite("streams/gsr.csv", [](std::string t) { return "session_ts_ms,eda" + t.substr(t.find('\n')); });
    EXPECT_TRUE(any_contains(validate_dataset(dir_), "streams/gsr.csv:1: header"));
}

TEST_F(CorruptedBundle, BadCell) {
    rewrite("streams/gsr.csv", [](std::string t) { return t + "99999999,abc\n"; });
    EXPECT_TRUE(any_contains(validate_dataset(dir_), "bad value 'abc'"));
}

TEST_F(CorruptedBundle, RowCount) {
    rewrite("streams/gsr.csv", [](std::string t) { return t.substr(0, t.rfind('\n', t.size() - 2) + 1); });
    EXPECT_TRUE(any_contains(validate_dataset(dir_), "differs from registry sample_count"));
}

TEST_F(CorruptedBundle, UnregisteredAndMissingStreamFiles) {
    write_text(dir_ / "streams" / "face.csv", "session_ts_ms,a\n");
    fs::remove(dir_ / "streams" / "ppg.csv");
    const auto f = validate_dataset(dir_);
    EXPECT_TRUE(any_contains(f, "streams/face.csv: file is not in the stream registry"));
    EXPECT_TRUE(any_contains(f, "missing file for registered stream 'ppg'"));
}

TEST_F(CorruptedBundle, LabelOutsideScale) {
    rewrite("labels.jsonl", [](std::string t) {
        const auto pos = t.find("\"valence\":");
        return t.replace(pos, std::string("\"valence\":3").size(), "\"valence\":0");
    });
    EXPECT_TRUE(any_contains(validate_dataset(dir_), "labels.jsonl:1:"));
}

TEST_F(CorruptedBundle, BrokenSkillChain) {
    rewrite("trials.jsonl", [](std::string t) {
        std::vector<std::string> lines;
        std::istringstream in(t);
        for (std::string l; std::getline(in, l);) lines.push_back(l);
        auto j = json::parse(lines[1]);
        j["skill_after"]["value"] = 0.99999;
        lines[1] = j.dump();
        std::string out;
        for (const auto& l : lines) out += l + "\n";
        return out;
    });
    const auto f = validate_dataset(dir_);
    EXPECT_TRUE(any_contains(f, "trials.jsonl:2: skill recurrence is broken"));
    EXPECT_TRUE(any_contains(f, "trials.jsonl:3: skill recurrence is broken"));
}

TEST_F(CorruptedBundle, MissingFilesAndGarbage) {
    fs::remove(dir_ / "labels.jsonl");
    rewrite("trials.jsonl", [](std::string t) { return t + "{not json\n"; });
    const auto f = validate_dataset(dir_);
    EXPECT_TRUE(any_contains(f, "labels.jsonl: missing"));
    EXPECT_TRUE(any_contains(f, "trials.jsonl:4:"));
}
