/**
 * json_io.hpp: JSON mappings for domain types
 *
 * Used by the dataset bundle and the wire protocol. States are written as
 * three top-first arrays of disk ids. Readers are strict: a missing or
 * mistyped field throws (nlohmann::json::exception or xroom::Error).
 */

#pragma once

#include "xroom/flow.hpp"
#include "xroom/physio.hpp"
#include "xroom/puzzle.hpp"
#include "xroom/sensor_hub.hpp"
#include "xroom/session.hpp"
#include "xroom/task_generator.hpp"

#include <json.hpp>

#include <limits>
#include <optional>
#include <string>
#include <type_traits>

namespace xroom {

using json = nlohmann::json;

/// Typed field read; numbers must already have the right kind (no 1.5 -> 1).
template <class T>
T get_field(const json& j, const char* key) {
    const auto& v = j.at(key);
    if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) fail(ErrorCode::SchemaViolation, std::string("field '") + key + "' must be a boolean");
    } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) fail(ErrorCode::SchemaViolation, std::string("field '") + key + "' must be an integer");
        if (v.is_number_unsigned()) {
            if (v.get<std::uint64_t>() > static_cast<std::uint64_t>(std::numeric_limits<T>::max())) {
                fail(ErrorCode::SchemaViolation, std::string("field '") + key + "' is out of range");
            }
        } else {
            const auto x = v.get<std::int64_t>();
            if (x < static_cast<std::int64_t>(std::numeric_limits<T>::min()) ||
                (x > 0 && static_cast<std::uint64_t>(x) > static_cast<std::uint64_t>(std::numeric_limits<T>::max()))) {
                fail(ErrorCode::SchemaViolation, std::string("field '") + key + "' is out of range");
            }
        }
    } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) fail(ErrorCode::SchemaViolation, std::string("field '") + key + "' must be a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) fail(ErrorCode::SchemaViolation, std::string("field '") + key + "' must be a string");
    }
    return v.get<T>();
}

template <class T>
void get_optional(const json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

inline std::string get_enum_text(const json& j, const char* key) {
    const auto& v = j.at(key);
    if (!v.is_string()) fail(ErrorCode::SchemaViolation, std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

inline FlowZone zone_from_json(const json& j, const char* key) {
    const auto s = get_enum_text(j, key);
    const auto z = parse_zone(s);
    if (!z || s == "stress") fail(ErrorCode::SchemaViolation, "unknown zone '" + s + "'");
    return *z;
}

// ── puzzle ────────────────────────────────────────────────────────────────

inline void to_json(json& j, const HanoiState& s) {
    const auto rods = s.rods();
    j = json::array({rods[0], rods[1], rods[2]});
}

inline HanoiState state_from_json(const json& j) {
    if (!j.is_array() || j.size() != kRodCount) fail(ErrorCode::InvalidState, "a state is exactly three rod arrays");
    RodContents rods;
    for (std::size_t r = 0; r < kRodCount; ++r) {
        if (!j[r].is_array()) fail(ErrorCode::InvalidState, "rod must be an array");
        for (const auto& d : j[r]) {
            if (!d.is_number_integer()) fail(ErrorCode::InvalidState, "disk ids must be integers");
            rods[r].push_back(d.get<int>());
        }
    }
    return HanoiState::from_rods(rods);
}

inline void to_json(json& j, const Move& m) { j = json{{"from", m.from_rod}, {"to", m.to_rod}}; }

inline void from_json(const json& j, Move& m) {
    m.from_rod = get_field<int>(j, "from");
    m.to_rod = get_field<int>(j, "to");
}

inline void to_json(json& j, const PuzzleTask& t) {
    j = json{{"start", t.start},
             {"target", t.target},
             {"move_budget", t.move_budget},
             {"time_budget_ms", t.time_budget_ms},
             {"min_moves", t.min_moves},
             {"slack", t.slack},
             {"challenge", t.challenge}};
}

inline PuzzleTask task_from_json(const json& j) {
    PuzzleTask t{state_from_json(j.at("start")), state_from_json(j.at("target"))};
    t.move_budget = get_field<int>(j, "move_budget");
    t.time_budget_ms = get_field<std::int64_t>(j, "time_budget_ms");
    t.min_moves = get_field<int>(j, "min_moves");
    t.slack = get_field<int>(j, "slack");
    t.challenge = get_field<double>(j, "challenge");
    return t;
}

// ── flow controller ───────────────────────────────────────────────────────

inline void to_json(json& j, const ControllerConfig& c) {
    j = json{{"flow_band", c.flow_band},
             {"ewma_alpha", c.ewma_alpha},
             {"target_offset", c.target_offset},
             {"challenge_weights",
              {{"depth", c.challenge_weights.depth}, {"time", c.challenge_weights.time}, {"slack", c.challenge_weights.slack}}},
             {"score_weights",
              {{"solved", c.score_weights.solved}, {"time", c.score_weights.time}, {"efficiency", c.score_weights.efficiency}}},
             {"t_ref_ms_per_move", c.t_ref_ms_per_move}};
}

/// Overlays the keys present in j onto c; unknown keys are rejected.
inline void patch_controller(const json& j, ControllerConfig& c) {
    if (!j.is_object()) fail(ErrorCode::InvalidConfig, "controller settings must be an object");
    for (const auto& [key, value] : j.items()) {
        if (key == "flow_band") c.flow_band = value.get<double>();
        else if (key == "ewma_alpha") c.ewma_alpha = value.get<double>();
        else if (key == "target_offset") c.target_offset = value.get<double>();
        else if (key == "t_ref_ms_per_move") c.t_ref_ms_per_move = value.get<double>();
        else if (key == "challenge_weights") {
            c.challenge_weights.depth = get_field<double>(value, "depth");
            c.challenge_weights.time = get_field<double>(value, "time");
            c.challenge_weights.slack = get_field<double>(value, "slack");
        } else if (key == "score_weights") {
            c.score_weights.solved = get_field<double>(value, "solved");
            c.score_weights.time = get_field<double>(value, "time");
            c.score_weights.efficiency = get_field<double>(value, "efficiency");
        } else {
            fail(ErrorCode::InvalidConfig, "unknown controller setting '" + key + "'");
        }
    }
}

inline void to_json(json& j, const SkillEstimate& s) {
    j = json{{"value", s.value}, {"trials_observed", s.trials_observed}, {"last_score", s.last_score}};
}

inline void from_json(const json& j, SkillEstimate& s) {
    s.value = get_field<double>(j, "value");
    s.trials_observed = get_field<int>(j, "trials_observed");
    s.last_score = get_field<double>(j, "last_score");
}

inline void to_json(json& j, const MoveLogEntry& e) {
    j = json{{"session_ts_ms", e.session_ts_ms}, {"from", e.move.from_rod}, {"to", e.move.to_rod}, {"accepted", e.accepted}};
}

inline void from_json(const json& j, MoveLogEntry& e) {
    e.session_ts_ms = get_field<std::int64_t>(j, "session_ts_ms");
    e.move.from_rod = get_field<int>(j, "from");
    e.move.to_rod = get_field<int>(j, "to");
    e.accepted = get_field<bool>(j, "accepted");
}

inline void to_json(json& j, const TrialOutcome& o) {
    j = json{{"solved", o.solved},
             {"moves_used", o.moves_used},
             {"time_used_ms", o.time_used_ms},
             {"illegal_attempts", o.illegal_attempts},
             {"cause", cause_name(o.cause)},
             {"move_log", o.move_log}};
}

inline void from_json(const json& j, TrialOutcome& o) {
    o.solved = get_field<bool>(j, "solved");
    o.moves_used = get_field<int>(j, "moves_used");
    o.time_used_ms = get_field<std::int64_t>(j, "time_used_ms");
    o.illegal_attempts = get_field<int>(j, "illegal_attempts");
    const auto cause = parse_cause(get_enum_text(j, "cause"));
    if (!cause) fail(ErrorCode::SchemaViolation, "unknown closure cause");
    o.cause = *cause;
    o.move_log = get_field<std::vector<MoveLogEntry>>(j, "move_log");
}

// ── session ───────────────────────────────────────────────────────────────

inline void to_json(json& j, const SelfReport& r) {
    j = json{{"valence", r.valence},
             {"arousal", r.arousal},
             {"label", label_name(r.label)},
             {"report_latency_ms", r.report_latency_ms}};
    if (r.label == ReportLabel::Other) j["label_text"] = r.other_text;
}

/// Reads a report; range checks are left to SelfReport::validate().
inline SelfReport report_from_json(const json& j) {
    SelfReport r;
    r.valence = get_field<int>(j, "valence");
    r.arousal = get_field<int>(j, "arousal");
    const auto label = parse_label(get_enum_text(j, "label"));
    if (!label) fail(ErrorCode::InvalidArgument, "unknown report label");
    r.label = *label;
    get_optional(j, "label_text", r.other_text);
    get_optional(j, "report_latency_ms", r.report_latency_ms);
    return r;
}

inline void to_json(json& j, const TrialRecord& t) {
    j = json{{"trial_index", t.trial_index},
             {"probe", t.probe},
             {"target_emotion", zone_name(t.target)},
             {"requested_challenge", t.requested_challenge},
             {"task", t.task},
             {"outcome", t.outcome},
             {"predicted_zone", zone_name(t.predicted_zone)},
             {"skill_before", t.skill_before},
             {"skill_after", t.skill_after},
             {"score", t.score},
             {"self_report", t.self_report ? json(*t.self_report) : json(nullptr)},
             {"report_missing", t.report_missing},
             {"start_ts_ms", t.start_ts_ms},
             {"end_ts_ms", t.end_ts_ms},
             {"finalized_ts_ms", t.finalized_ts_ms},
             {"tick_events", t.tick_events}};
}

inline TrialRecord trial_from_json(const json& j) {
    TrialRecord t;
    t.trial_index = get_field<int>(j, "trial_index");
    t.probe = get_field<bool>(j, "probe");
    t.target = zone_from_json(j, "target_emotion");
    t.requested_challenge = get_field<double>(j, "requested_challenge");
    t.task = task_from_json(j.at("task"));
    t.outcome = get_field<TrialOutcome>(j, "outcome");
    t.predicted_zone = zone_from_json(j, "predicted_zone");
    t.skill_before = get_field<SkillEstimate>(j, "skill_before");
    t.skill_after = get_field<SkillEstimate>(j, "skill_after");
    t.score = get_field<double>(j, "score");
    if (const auto& r = j.at("self_report"); !r.is_null()) {
        t.self_report = report_from_json(r);
        t.self_report->validate();
    }
    t.report_missing = get_field<bool>(j, "report_missing");
    t.start_ts_ms = get_field<std::int64_t>(j, "start_ts_ms");
    t.end_ts_ms = get_field<std::int64_t>(j, "end_ts_ms");
    t.finalized_ts_ms = get_field<std::int64_t>(j, "finalized_ts_ms");
    t.tick_events = get_field<std::vector<std::int64_t>>(j, "tick_events");
    return t;
}

inline void to_json(json& j, const SessionConfig& c) {
    j = json{{"controller", c.controller},
             {"trials", c.trials},
             {"disks", c.disks},
             {"report_timeout_ms", c.report_timeout_ms},
             {"probe_challenges", c.probe_challenges},
             {"ticks",
              {{"base_interval_ms", c.ticks.base_interval_ms},
               {"fast_interval_ms", c.ticks.fast_interval_ms},
               {"fastest_interval_ms", c.ticks.fastest_interval_ms},
               {"fast_window_ms", c.ticks.fast_window_ms},
               {"fastest_window_ms", c.ticks.fastest_window_ms}}},
             {"task_grid", {{"slacks", c.grid.slacks}, {"seconds_per_move", c.grid.seconds_per_move}}},
             {"sensors",
              {{"reorder_buffer_ms", c.hub.reorder_buffer_ms},
               {"sync_rounds", c.hub.sync_rounds},
               {"resync_interval_ms", c.hub.resync_interval_ms}}},
             {"beats",
              {{"window_ms", c.beats.window_ms},
               {"threshold_k", c.beats.threshold_k},
               {"refractory_ms", c.beats.refractory_ms},
               {"min_span_ms", c.beats.min_span_ms}}},
             {"gsr", {{"rise_threshold", c.gsr.rise_threshold}, {"refractory_ms", c.gsr.refractory_ms}}},
             {"seed", c.seed}};
}

namespace detail {

template <class Fn>
void for_keys(const json& j, const char* section, Fn&& fn) {
    if (!j.is_object()) fail(ErrorCode::InvalidConfig, std::string("'") + section + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        if (!fn(key, value)) fail(ErrorCode::InvalidConfig, std::string("unknown key '") + key + "' in '" + section + "'");
    }
}

} // namespace detail

/// Overlays a (possibly partial) session configuration; unknown keys are rejected.
inline void patch_session_config(const json& j, SessionConfig& c) {
    detail::for_keys(j, "session", [&](const std::string& key, const json& v) {
        if (key == "controller") patch_controller(v, c.controller);
        else if (key == "trials") c.trials = v.get<int>();
        else if (key == "disks") c.disks = v.get<int>();
        else if (key == "report_timeout_ms") c.report_timeout_ms = v.get<std::int64_t>();
        else if (key == "probe_challenges") c.probe_challenges = v.get<std::vector<double>>();
        else if (key == "seed") c.seed = v.get<std::uint64_t>();
        else if (key == "ticks") {
            detail::for_keys(v, "ticks", [&](const std::string& k, const json& x) {
                if (k == "base_interval_ms") c.ticks.base_interval_ms = x.get<std::int64_t>();
                else if (k == "fast_interval_ms") c.ticks.fast_interval_ms = x.get<std::int64_t>();
                else if (k == "fastest_interval_ms") c.ticks.fastest_interval_ms = x.get<std::int64_t>();
                else if (k == "fast_window_ms") c.ticks.fast_window_ms = x.get<std::int64_t>();
                else if (k == "fastest_window_ms") c.ticks.fastest_window_ms = x.get<std::int64_t>();
                else return false;
                return true;
            });
        } else if (key == "task_grid") {
            detail::for_keys(v, "task_grid", [&](const std::string& k, const json& x) {
                if (k == "slacks") c.grid.slacks = x.get<std::vector<int>>();
                else if (k == "seconds_per_move") c.grid.seconds_per_move = x.get<std::vector<int>>();
                else return false;
                return true;
            });
        } else if (key == "sensors") {
            detail::for_keys(v, "sensors", [&](const std::string& k, const json& x) {
                if (k == "reorder_buffer_ms") c.hub.reorder_buffer_ms = x.get<std::int64_t>();
                else if (k == "sync_rounds") c.hub.sync_rounds = x.get<int>();
                else if (k == "resync_interval_ms") c.hub.resync_interval_ms = x.get<std::int64_t>();
                else return false;
                return true;
            });
        } else if (key == "beats") {
            detail::for_keys(v, "beats", [&](const std::string& k, const json& x) {
                if (k == "window_ms") c.beats.window_ms = x.get<std::int64_t>();
                else if (k == "threshold_k") c.beats.threshold_k = x.get<double>();
                else if (k == "refractory_ms") c.beats.refractory_ms = x.get<std::int64_t>();
                else if (k == "min_span_ms") c.beats.min_span_ms = x.get<std::int64_t>();
                else return false;
                return true;
            });
        } else if (key == "gsr") {
            detail::for_keys(v, "gsr", [&](const std::string& k, const json& x) {
                if (k == "rise_threshold") c.gsr.rise_threshold = x.get<double>();
                else if (k == "refractory_ms") c.gsr.refractory_ms = x.get<std::int64_t>();
                else return false;
                return true;
            });
        } else {
            return false;
        }
        return true;
    });
}

inline SessionConfig session_config_from_json(const json& j) {
    SessionConfig c;
    patch_session_config(j, c);
    c.validate();
    return c;
}

// ── sensors ───────────────────────────────────────────────────────────────

inline void to_json(json& j, const ClockMap& m) {
    j = json{{"offset_ms", m.offset_ms}, {"rtt_ms", m.rtt_ms}, {"rounds", m.rounds}};
}

inline ClockMap clock_from_json(const json& j, const std::string& stream_id) {
    return {stream_id, get_field<double>(j, "offset_ms"), get_field<double>(j, "rtt_ms"), get_field<int>(j, "rounds")};
}

inline void to_json(json& j, const HrvMetrics& m) {
    j = json{{"window_start_ms", m.window_start_ms}, {"window_len_ms", m.window_len_ms}, {"mean_hr_bpm", m.mean_hr_bpm},
             {"rmssd_ms", m.rmssd_ms},           {"sdnn_ms", m.sdnn_ms},             {"n_beats", m.n_beats}};
}

inline void from_json(const json& j, HrvMetrics& m) {
    m.window_start_ms = get_field<std::int64_t>(j, "window_start_ms");
    m.window_len_ms = get_field<std::int64_t>(j, "window_len_ms");
    m.mean_hr_bpm = get_field<double>(j, "mean_hr_bpm");
    m.rmssd_ms = get_field<double>(j, "rmssd_ms");
    m.sdnn_ms = get_field<double>(j, "sdnn_ms");
    m.n_beats = get_field<int>(j, "n_beats");
}

inline void to_json(json& j, const GsrFeatures& f) {
    j = json{{"tonic_mean", f.tonic_mean}, {"phasic_peak_count", f.phasic_peak_count}};
}

inline void from_json(const json& j, GsrFeatures& f) {
    f.tonic_mean = get_field<double>(j, "tonic_mean");
    f.phasic_peak_count = get_field<int>(j, "phasic_peak_count");
}

} // namespace xroom
