/**
 * dataset.hpp: on-disk session bundle
 *
 *   <dir>/session.json          metadata: ids, config, context, stream registry
 *   <dir>/trials.jsonl          one TrialRecord per line
 *   <dir>/labels.jsonl          one self-report per line
 *   <dir>/streams/<id>.csv      header, then session_ts_ms,<channels...>
 *
 * Stream files are sorted by session time; samples that arrived late are
 * listed by row index in the registry. Per-trial stream features (HRV for
 * PPG streams, tonic/phasic for GSR streams) also live in the registry so
 * trial records never depend on which sensors were connected.
 *
 * Writing is a pure function of the SessionDataset value and every number
 * uses its shortest round-trip form, so read -> write reproduces the input
 * byte for byte.
 */

#pragma once

#include "xroom/error.hpp"
#include "xroom/json_io.hpp"
#include "xroom/physio.hpp"
#include "xroom/session.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

namespace xroom {

inline constexpr const char* kDatasetFormat = "xroom-dataset/1";

struct TrialFeatures {
    int trial_index = 0;
    std::optional<HrvMetrics> hrv;
    std::optional<GsrFeatures> gsr;

    friend bool operator==(const TrialFeatures&, const TrialFeatures&) = default;
};

struct StreamRecord {
    std::string id;
    StreamSpec spec;
    bool connected_at_end = false;
    std::optional<ClockMap> clock;
    std::vector<ClockMap> clock_history;
    std::vector<SyncedSample> samples;  // sorted by session time
    std::vector<TrialFeatures> features;

    friend bool operator==(const StreamRecord&, const StreamRecord&) = default;
};

struct LabelRecord {
    int trial_index = 0;
    std::int64_t session_ts_ms = 0;
    SelfReport report;

    friend bool operator==(const LabelRecord&, const LabelRecord&) = default;
};

struct SessionMeta {
    std::string session_id;
    std::string participant_id;
    TargetEmotion target_emotion = FlowZone::Flow;
    SessionConfig config;
    Context context;
    SessionState state = SessionState::Finished;
    std::int64_t end_ts_ms = 0;

    friend bool operator==(const SessionMeta&, const SessionMeta&) = default;
};

struct SessionDataset {
    SessionMeta meta;
    std::vector<TrialRecord> trials;
    std::vector<LabelRecord> labels;
    std::vector<StreamRecord> streams;

    friend bool operator==(const SessionDataset&, const SessionDataset&) = default;
};

struct Finding {
    std::string file;
    std::size_t line = 0;  // 0 when the finding concerns the whole file
    std::string message;
};

inline std::string to_string(const Finding& f) {
    return f.line ? f.file + ":" + std::to_string(f.line) + ": " + f.message : f.file + ": " + f.message;
}

// ── building ──────────────────────────────────────────────────────────────

inline TrialFeatures trial_features(const StreamRecord& stream, const TrialRecord& trial, const SessionConfig& cfg) {
    TrialFeatures f;
    f.trial_index = trial.trial_index;
    const TimeWindow window{trial.start_ts_ms, trial.end_ts_ms - trial.start_ts_ms};
    try {
        if (stream.spec.kind == SensorKind::PPG) {
            std::vector<SyncedSample> inside;
            for (const auto& s : stream.samples) {
                if (window.contains(static_cast<double>(s.session_ts_ms))) inside.push_back(s);
            }
            const auto beats = detect_beats(inside, 0, cfg.beats);
            f.hrv = hrv_metrics(beats, window);
        } else if (stream.spec.kind == SensorKind::GSR) {
            f.gsr = gsr_features(stream.samples, window, 0, cfg.gsr);
        }
    } catch (const Error&) {
        // not enough signal in this window; the feature stays absent
    }
    return f;
}

/// Snapshot of a finished or aborted session.
inline SessionDataset make_dataset(const Session& session) {
    if (session.state() != SessionState::Finished && session.state() != SessionState::Aborted) {
        fail(ErrorCode::UnfinishedSession, "session is still " + std::string(state_name(session.state())));
    }
    SessionDataset d;
    d.meta.session_id = session.id();
    d.meta.participant_id = session.participant_id();
    d.meta.target_emotion = session.target();
    d.meta.config = session.config();
    d.meta.context = session.context();
    d.meta.state = session.state();
    d.meta.end_ts_ms = session.end_ts_ms();
    d.trials = session.records();
    for (const auto& t : d.trials) {
        if (t.self_report) d.labels.push_back({t.trial_index, t.finalized_ts_ms, *t.self_report});
    }
    const auto& hub = session.hub();
    for (const auto& id : hub.stream_ids()) {
        const auto& s = hub.stream(id);
        StreamRecord r;
        r.id = id;
        r.spec = s.spec;
        r.connected_at_end = s.active;
        r.clock = s.clock;
        r.clock_history = s.clock_history;
        r.samples = s.record;
        for (const auto& [ts, pending] : s.pending) r.samples.push_back(pending);
        std::stable_sort(r.samples.begin(), r.samples.end(),
                         [](const SyncedSample& a, const SyncedSample& b) { return a.session_ts_ms < b.session_ts_ms; });
        if (s.spec.kind == SensorKind::PPG || s.spec.kind == SensorKind::GSR) {
            for (const auto& t : d.trials) r.features.push_back(trial_features(r, t, d.meta.config));
        }
        d.streams.push_back(std::move(r));
    }
    return d;
}

// ── writing ───────────────────────────────────────────────────────────────

inline std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline json stream_to_json(const StreamRecord& s) {
    json j{{"stream_id", s.id},
           {"kind", kind_name(s.spec.kind)},
           {"name", s.spec.name},
           {"channels", s.spec.channels},
           {"nominal_rate_hz", s.spec.nominal_rate_hz},
           {"connected_at_end", s.connected_at_end},
           {"clock", s.clock ? json(*s.clock) : json(nullptr)},
           {"clock_history", s.clock_history},
           {"sample_count", s.samples.size()}};
    json late = json::array();
    for (std::size_t i = 0; i < s.samples.size(); ++i) {
        if (s.samples[i].late) late.push_back(i);
    }
    j["late_rows"] = late;
    json feats = json::array();
    for (const auto& f : s.features) {
        json fj{{"trial_index", f.trial_index}};
        if (s.spec.kind == SensorKind::PPG) fj["hrv"] = f.hrv ? json(*f.hrv) : json(nullptr);
        if (s.spec.kind == SensorKind::GSR) fj["gsr"] = f.gsr ? json(*f.gsr) : json(nullptr);
        feats.push_back(std::move(fj));
    }
    j["trial_features"] = feats;
    return j;
}

inline json meta_to_json(const SessionDataset& d) {
    json streams = json::array();
    for (const auto& s : d.streams) streams.push_back(stream_to_json(s));
    return json{{"format", kDatasetFormat},
                {"protocol_version", "1"},
                {"scale_version", kScaleVersion},
                {"session_id", d.meta.session_id},
                {"participant_id", d.meta.participant_id},
                {"target_emotion", zone_name(d.meta.target_emotion)},
                {"state", state_name(d.meta.state)},
                {"end_ts_ms", d.meta.end_ts_ms},
                {"config", d.meta.config},
                {"context", d.meta.context},
                {"trial_count", d.trials.size()},
                {"streams", streams}};
}

inline std::string stream_csv(const StreamRecord& s) {
    std::string out = "session_ts_ms";
    for (const auto& c : s.spec.channels) out += "," + c;
    out += "\n";
    for (const auto& sample : s.samples) {
        out += std::to_string(sample.session_ts_ms);
        for (double v : sample.values) {
            out += ',';
            out += format_number(v);
        }
        out += '\n';
    }
    return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
    f << text;
    if (!f) fail(ErrorCode::IoFailure, "write to " + path.string() + " failed");
}

inline void write_dataset(const SessionDataset& d, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir / "streams", ec);
    if (ec) fail(ErrorCode::IoFailure, "cannot create " + (dir / "streams").string() + ": " + ec.message());
    write_text(dir / "session.json", meta_to_json(d).dump(2) + "\n");
    std::string trials;
    for (const auto& t : d.trials) trials += json(t).dump() + "\n";
    write_text(dir / "trials.jsonl", trials);
    std::string labels;
    for (const auto& l : d.labels) {
        json j = l.report;
        j["trial_index"] = l.trial_index;
        j["session_ts_ms"] = l.session_ts_ms;
        labels += j.dump() + "\n";
    }
    write_text(dir / "labels.jsonl", labels);
    for (const auto& s : d.streams) write_text(dir / "streams" / (s.id + ".csv"), stream_csv(s));
}

inline SessionDataset export_dataset(const Session& session, const std::filesystem::path& dir) {
    auto d = make_dataset(session);
    write_dataset(d, dir);
    return d;
}

// ── reading ───────────────────────────────────────────────────────────────

namespace detail {

inline std::optional<std::string> read_text(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) return std::nullopt;
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

inline std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        lines.push_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return lines;
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t pos = 0;
    while (true) {
        auto c = line.find(',', pos);
        cells.push_back(line.substr(pos, c == std::string::npos ? std::string::npos : c - pos));
        if (c == std::string::npos) break;
        pos = c + 1;
    }
    return cells;
}

template <class T>
bool parse_number(const std::string& s, T& out) {
    if (s.empty()) return false;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

class Collector {
public:
    void add(std::string file, std::size_t line, std::string message) {
        findings.push_back({std::move(file), line, std::move(message)});
    }
    std::vector<Finding> findings;
};

inline StreamRecord stream_from_json(const json& j) {
    StreamRecord s;
    s.id = get_field<std::string>(j, "stream_id");
    const auto kind = parse_kind(get_enum_text(j, "kind"));
    if (!kind) fail(ErrorCode::SchemaViolation, "unknown sensor kind");
    s.spec.kind = *kind;
    s.spec.name = get_field<std::string>(j, "name");
    s.spec.channels = j.at("channels").get<std::vector<std::string>>();
    s.spec.nominal_rate_hz = get_field<double>(j, "nominal_rate_hz");
    if (stream_id_for(s.spec) != s.id) fail(ErrorCode::SchemaViolation, "stream id does not match kind/name");
    s.connected_at_end = get_field<bool>(j, "connected_at_end");
    if (const auto& c = j.at("clock"); !c.is_null()) s.clock = clock_from_json(c, s.id);
    for (const auto& c : j.at("clock_history")) s.clock_history.push_back(clock_from_json(c, s.id));
    for (const auto& f : j.at("trial_features")) {
        TrialFeatures tf;
        tf.trial_index = get_field<int>(f, "trial_index");
        if (auto it = f.find("hrv"); it != f.end() && !it->is_null()) tf.hrv = it->get<HrvMetrics>();
        if (auto it = f.find("gsr"); it != f.end() && !it->is_null()) tf.gsr = it->get<GsrFeatures>();
        s.features.push_back(tf);
    }
    return s;
}

inline SessionMeta meta_from_json(const json& j) {
    if (get_field<std::string>(j, "format") != kDatasetFormat) fail(ErrorCode::SchemaViolation, "unsupported bundle format");
    SessionMeta m;
    m.session_id = get_field<std::string>(j, "session_id");
    m.participant_id = get_field<std::string>(j, "participant_id");
    m.target_emotion = zone_from_json(j, "target_emotion");
    const auto state = parse_state(get_enum_text(j, "state"));
    if (!state) fail(ErrorCode::SchemaViolation, "unknown session state");
    m.state = *state;
    m.end_ts_ms = get_field<std::int64_t>(j, "end_ts_ms");
    m.config = session_config_from_json(j.at("config"));
    m.context = j.at("context").get<Context>();
    return m;
}

} // namespace detail

/// Reads a bundle, collecting every schema problem instead of stopping at the first.
inline SessionDataset load_dataset(const std::filesystem::path& dir, std::vector<Finding>& findings) {
    detail::Collector col;
    SessionDataset d;
    std::vector<std::size_t> expected_counts;
    std::vector<std::vector<std::size_t>> late_rows;

    const auto meta_text = detail::read_text(dir / "session.json");
    if (!meta_text) {
        col.add("session.json", 0, "missing");
    } else {
        try {
            const auto j = json::parse(*meta_text);
            d.meta = detail::meta_from_json(j);
            for (const auto& sj : j.at("streams")) {
                d.streams.push_back(detail::stream_from_json(sj));
                expected_counts.push_back(get_field<std::size_t>(sj, "sample_count"));
                late_rows.push_back(sj.at("late_rows").get<std::vector<std::size_t>>());
            }
        } catch (const std::exception& e) {
            col.add("session.json", 0, e.what());
        }
    }

    const auto trials_text = detail::read_text(dir / "trials.jsonl");
    if (!trials_text) {
        col.add("trials.jsonl", 0, "missing");
    } else {
        const auto lines = detail::split_lines(*trials_text);
        for (std::size_t i = 0; i < lines.size(); ++i) {
            try {
                auto t = trial_from_json(json::parse(lines[i]));
                if (t.trial_index != static_cast<int>(d.trials.size())) {
                    col.add("trials.jsonl", i + 1, "trial_index " + std::to_string(t.trial_index) + " out of sequence");
                }
                // The controller may have been overridden mid-session, so the check is
                // alpha-free: the chain links up and each update lands between old and new.
                const auto prev = d.trials.empty() ? SkillEstimate{} : d.trials.back().skill_after;
                const double lo = std::min(t.skill_before.value, t.score), hi = std::max(t.skill_before.value, t.score);
                const bool first = t.skill_before.trials_observed == 0;
                if (t.skill_before != prev || t.skill_after.trials_observed != t.skill_before.trials_observed + 1 ||
                    (first ? t.skill_after.value != t.score
                           : !(t.skill_after.value >= lo - 1e-12 && t.skill_after.value <= hi + 1e-12))) {
                    col.add("trials.jsonl", i + 1, "skill recurrence is broken");
                }
                d.trials.push_back(std::move(t));
            } catch (const std::exception& e) {
                col.add("trials.jsonl", i + 1, e.what());
            }
        }
    }

    const auto labels_text = detail::read_text(dir / "labels.jsonl");
    if (!labels_text) {
        col.add("labels.jsonl", 0, "missing");
    } else {
        const auto lines = detail::split_lines(*labels_text);
        for (std::size_t i = 0; i < lines.size(); ++i) {
            try {
                const auto j = json::parse(lines[i]);
                LabelRecord l;
                l.trial_index = get_field<int>(j, "trial_index");
                l.session_ts_ms = get_field<std::int64_t>(j, "session_ts_ms");
                l.report = report_from_json(j);
                l.report.validate();
                const bool matches = l.trial_index >= 0 && static_cast<std::size_t>(l.trial_index) < d.trials.size() &&
                                     d.trials[static_cast<std::size_t>(l.trial_index)].self_report == l.report;
                if (!matches) col.add("labels.jsonl", i + 1, "label does not match a trial's self-report");
                d.labels.push_back(std::move(l));
            } catch (const std::exception& e) {
                col.add("labels.jsonl", i + 1, e.what());
            }
        }
    }

    std::set<std::string> known;
    for (std::size_t si = 0; si < d.streams.size(); ++si) {
        auto& s = d.streams[si];
        known.insert(s.id + ".csv");
        const std::string file = "streams/" + s.id + ".csv";
        const auto text = detail::read_text(dir / "streams" / (s.id + ".csv"));
        if (!text) {
            col.add(file, 0, "missing file for registered stream '" + s.id + "'");
            continue;
        }
        const auto lines = detail::split_lines(*text);
        std::string header = "session_ts_ms";
        for (const auto& c : s.spec.channels) header += "," + c;
        if (lines.empty() || lines[0] != header) {
            col.add(file, 1, "header does not match registered channels");
            continue;
        }
        std::optional<std::int64_t> prev;
        for (std::size_t i = 1; i < lines.size(); ++i) {
            const auto cells = detail::split_csv(lines[i]);
            if (cells.size() != s.spec.channels.size() + 1) {
                col.add(file, i + 1, "expected " + std::to_string(s.spec.channels.size() + 1) + " columns");
                continue;
            }
            SyncedSample sample;
            sample.stream_id = s.id;
            if (!detail::parse_number(cells[0], sample.session_ts_ms)) {
                col.add(file, i + 1, "bad timestamp '" + cells[0] + "'");
                continue;
            }
            bool ok = true;
            for (std::size_t c = 1; c < cells.size(); ++c) {
                double v = 0;
                if (!detail::parse_number(cells[c], v)) {
                    col.add(file, i + 1, "bad value '" + cells[c] + "' in column " + std::to_string(c + 1));
                    ok = false;
                    break;
                }
                sample.values.push_back(v);
            }
            if (!ok) continue;
            if (prev && sample.session_ts_ms < *prev) {
                col.add(file, i + 1,
                        "stream '" + s.id + "' is not monotone: session_ts_ms " + std::to_string(sample.session_ts_ms) +
                            " after " + std::to_string(*prev));
            }
            prev = sample.session_ts_ms;
            s.samples.push_back(std::move(sample));
        }
        if (s.samples.size() != expected_counts[si]) {
            col.add(file, 0, "row count " + std::to_string(s.samples.size()) + " differs from registry sample_count " +
                                 std::to_string(expected_counts[si]));
        }
        for (auto row : late_rows[si]) {
            if (row < s.samples.size()) {
                s.samples[row].late = true;
            } else {
                col.add("session.json", 0, "late row " + std::to_string(row) + " outside stream '" + s.id + "'");
            }
        }
    }

    std::error_code ec;
    if (std::filesystem::is_directory(dir / "streams", ec)) {
        std::vector<std::string> extra;
        for (const auto& entry : std::filesystem::directory_iterator(dir / "streams", ec)) {
            const auto name = entry.path().filename().string();
            if (!known.count(name)) extra.push_back(name);
        }
        std::sort(extra.begin(), extra.end());
        for (const auto& name : extra) col.add("streams/" + name, 0, "file is not in the stream registry");
    } else if (meta_text) {
        col.add("streams", 0, "missing directory");
    }

    findings = std::move(col.findings);
    return d;
}

inline SessionDataset read_dataset(const std::filesystem::path& dir) {
    std::vector<Finding> findings;
    auto d = load_dataset(dir, findings);
    if (!findings.empty()) fail(ErrorCode::SchemaViolation, to_string(findings.front()));
    return d;
}

inline std::vector<Finding> validate_dataset(const std::filesystem::path& dir) {
    std::vector<Finding> findings;
    load_dataset(dir, findings);
    return findings;
}

/// All streams merged on the union of their timestamps; empty cells where a stream has no row.
inline std::string wide_csv(const SessionDataset& d) {
    std::string out = "session_ts_ms";
    for (const auto& s : d.streams) {
        for (const auto& c : s.spec.channels) out += "," + s.id + "." + c;
    }
    out += "\n";
    // (ts, stream, occurrence) keeps duplicate timestamps within a stream on separate rows
    std::map<std::pair<std::int64_t, std::size_t>, std::vector<std::optional<const SyncedSample*>>> rows;
    for (std::size_t si = 0; si < d.streams.size(); ++si) {
        std::map<std::int64_t, std::size_t> seen;
        for (const auto& sample : d.streams[si].samples) {
            const auto occurrence = seen[sample.session_ts_ms]++;
            auto& row = rows[{sample.session_ts_ms, occurrence}];
            row.resize(d.streams.size());
            row[si] = &sample;
        }
    }
    for (const auto& [key, row] : rows) {
        out += std::to_string(key.first);
        for (std::size_t si = 0; si < d.streams.size(); ++si) {
            const auto width = d.streams[si].spec.channels.size();
            if (si < row.size() && row[si]) {
                for (double v : (*row[si])->values) out += "," + format_number(v);
            } else {
                out += std::string(width, ',');
            }
        }
        out += "\n";
    }
    return out;
}

} // namespace xroom
