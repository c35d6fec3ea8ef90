/**
 * session.hpp: elicitation session engine
 *
 * A session runs a fixed number of trials. Each trial:
 *
 *   next_trial          pick a challenge (probe or controller), generate a task
 *   submit_move ...     adjudicate moves against the live state and budgets
 *   (close)             solved, move budget spent, or time budget spent
 *   submit_self_report  attach the ground-truth label, update skill
 *
 * The engine never reads a wall clock: every operation takes the current
 * session time, so a server, a simulator and a test all drive it the same
 * way. advance_to() releases tick events and fires deadlines.
 *
 * State machine:
 *   Created -> Running <-> AwaitingReport -> Running ... -> Finished
 *   any non-terminal state -> Aborted
 */

#pragma once

#include "xroom/error.hpp"
#include "xroom/flow.hpp"
#include "xroom/physio.hpp"
#include "xroom/puzzle.hpp"
#include "xroom/random.hpp"
#include "xroom/sensor_hub.hpp"
#include "xroom/task_generator.hpp"

#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace xroom {

enum class SessionState { Created, Running, AwaitingReport, Finished, Aborted };

inline const char* state_name(SessionState s) {
    switch (s) {
    case SessionState::Created: return "created";
    case SessionState::Running: return "running";
    case SessionState::AwaitingReport: return "awaiting_report";
    case SessionState::Finished: return "finished";
    case SessionState::Aborted: return "aborted";
    }
    return "created";
}

inline std::optional<SessionState> parse_state(std::string_view s) {
    for (auto st : {SessionState::Created, SessionState::Running, SessionState::AwaitingReport, SessionState::Finished,
                    SessionState::Aborted}) {
        if (s == state_name(st)) return st;
    }
    return std::nullopt;
}

struct TickConfig {
    std::int64_t base_interval_ms = 1000;
    std::int64_t fast_interval_ms = 500;
    std::int64_t fastest_interval_ms = 250;
    std::int64_t fast_window_ms = 10000;     // final stretch at the fast rate
    std::int64_t fastest_window_ms = 3000;   // final stretch at the fastest rate

    friend bool operator==(const TickConfig&, const TickConfig&) = default;
};

/// Tick offsets from trial start, accelerating towards the end of the budget.
inline std::vector<std::int64_t> tick_schedule(std::int64_t time_budget_ms, const TickConfig& cfg = {}) {
    if (time_budget_ms <= 0) fail(ErrorCode::InvalidArgument, "time budget must be positive");
    std::vector<std::int64_t> ticks;
    for (std::int64_t t = 0; t < time_budget_ms;) {
        ticks.push_back(t);
        const auto remaining = time_budget_ms - t;
        if (remaining > cfg.fast_window_ms) {
            t += cfg.base_interval_ms;
        } else if (remaining > cfg.fastest_window_ms) {
            t += cfg.fast_interval_ms;
        } else {
            t += cfg.fastest_interval_ms;
        }
    }
    return ticks;
}

enum class ReportLabel { Anxiety, Flow, Boredom, Neutral, Other };

inline const char* label_name(ReportLabel l) {
    switch (l) {
    case ReportLabel::Anxiety: return "anxiety";
    case ReportLabel::Flow: return "flow";
    case ReportLabel::Boredom: return "boredom";
    case ReportLabel::Neutral: return "neutral";
    case ReportLabel::Other: return "other";
    }
    return "other";
}

inline std::optional<ReportLabel> parse_label(std::string_view s) {
    for (auto l : {ReportLabel::Anxiety, ReportLabel::Flow, ReportLabel::Boredom, ReportLabel::Neutral, ReportLabel::Other}) {
        if (s == label_name(l)) return l;
    }
    return std::nullopt;
}

inline constexpr int kScaleMin = 1;
inline constexpr int kScaleMax = 9;
inline constexpr const char* kScaleVersion = "sam9-v1";

/// Ground-truth self-report: 9-point valence/arousal plus a discrete label.
struct SelfReport {
    int valence = 5;
    int arousal = 5;
    ReportLabel label = ReportLabel::Neutral;
    std::string other_text;  // only for ReportLabel::Other
    std::int64_t report_latency_ms = 0;

    void validate() const {
        if (valence < kScaleMin || valence > kScaleMax) fail(ErrorCode::InvalidScale, "valence outside 1..9");
        if (arousal < kScaleMin || arousal > kScaleMax) fail(ErrorCode::InvalidScale, "arousal outside 1..9");
        if (label == ReportLabel::Other && other_text.empty()) {
            fail(ErrorCode::InvalidArgument, "label 'other' needs a text");
        }
        if (label != ReportLabel::Other && !other_text.empty()) {
            fail(ErrorCode::InvalidArgument, "text is only allowed with label 'other'");
        }
    }

    friend bool operator==(const SelfReport&, const SelfReport&) = default;
};

struct SessionConfig {
    ControllerConfig controller;
    int trials = 20;
    int disks = kDefaultDisks;
    std::int64_t report_timeout_ms = 60000;
    std::vector<double> probe_challenges{0.3, 0.6};
    TickConfig ticks;
    TaskGrid grid;
    HubConfig hub;
    BeatConfig beats;
    GsrConfig gsr;
    std::uint64_t seed = 42;

    void validate() const {
        controller.validate();
        if (trials < 1) fail(ErrorCode::InvalidConfig, "trials must be at least 1");
        if (disks < 1 || disks > kMaxDisks) fail(ErrorCode::InvalidConfig, "disks must lie in 1..7");
        if (report_timeout_ms <= 0) fail(ErrorCode::InvalidConfig, "report timeout must be positive");
        for (double p : probe_challenges) {
            if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::InvalidConfig, "probe challenges must lie in [0,1]");
        }
        if (grid.slacks.empty() || grid.seconds_per_move.empty()) fail(ErrorCode::InvalidConfig, "empty task grid");
        for (int s : grid.slacks) {
            if (s < 0) fail(ErrorCode::InvalidConfig, "slack must be non-negative");
        }
        for (int s : grid.seconds_per_move) {
            if (s <= 0) fail(ErrorCode::InvalidConfig, "seconds per move must be positive");
        }
        if (ticks.base_interval_ms <= 0 || ticks.fast_interval_ms <= 0 || ticks.fastest_interval_ms <= 0) {
            fail(ErrorCode::InvalidConfig, "tick intervals must be positive");
        }
        if (hub.reorder_buffer_ms < 0 || hub.sync_rounds < 1 || hub.resync_interval_ms <= 0) {
            fail(ErrorCode::InvalidConfig, "invalid sensor hub settings");
        }
    }

    friend bool operator==(const SessionConfig&, const SessionConfig&) = default;
};

using Context = std::map<std::string, std::string>;

struct TrialRecord {
    int trial_index = 0;
    bool probe = false;
    TargetEmotion target = FlowZone::Flow;
    double requested_challenge = 0.0;
    PuzzleTask task;
    TrialOutcome outcome;
    FlowZone predicted_zone = FlowZone::Flow;
    SkillEstimate skill_before;
    SkillEstimate skill_after;
    double score = 0.0;
    std::optional<SelfReport> self_report;
    bool report_missing = false;
    std::int64_t start_ts_ms = 0;
    std::int64_t end_ts_ms = 0;
    std::int64_t finalized_ts_ms = 0;
    std::vector<std::int64_t> tick_events;

    friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

struct MoveResult {
    bool accepted = false;
    HanoiState state = HanoiState::tower(1);
    bool solved = false;
    bool budget_exhausted = false;
    int moves_remaining = 0;
    int illegal_attempts = 0;
    CloseCause cause = CloseCause::Open;  // Open while the trial continues
    std::string reason;                   // why a move was rejected
};

enum class SessionEventKind { Tick, TrialClosed, ReportTimedOut };

struct SessionEvent {
    SessionEventKind kind = SessionEventKind::Tick;
    std::int64_t session_ts_ms = 0;
    int trial_index = 0;
    int tick_index = 0;
    std::int64_t interval_ms = 0;   // gap to the following tick (ticks only)
    std::int64_t remaining_ms = 0;  // time left in the trial (ticks only)
    CloseCause cause = CloseCause::Open;
};

inline std::string make_session_id(const std::string& participant_id) {
    static std::atomic<std::uint64_t> counter{0};
    static const std::uint64_t salt = std::random_device{}();
    std::ostringstream os;
    os << participant_id << '-' << std::hex << mix_seed(salt, counter.fetch_add(1));
    return os.str();
}

class Session {
public:
    Session(std::string session_id, std::string participant_id, TargetEmotion target, SessionConfig cfg,
            Context context = {})
        : id_(std::move(session_id)), participant_(std::move(participant_id)), target_(target), cfg_(std::move(cfg)),
          context_(std::move(context)), hub_(cfg_.hub) {
        if (!is_identifier(id_)) fail(ErrorCode::InvalidArgument, "session id must match [A-Za-z0-9_-]+");
        if (participant_.empty()) fail(ErrorCode::InvalidArgument, "participant id must be nonempty");
        cfg_.validate();
    }

    /// Creates a session and puts it in Running at session time 0.
    static Session start_session(const std::string& participant_id, TargetEmotion target, SessionConfig cfg,
                                 Context context = {}, std::optional<std::string> session_id = std::nullopt) {
        Session s(session_id ? *session_id : make_session_id(participant_id), participant_id, target, std::move(cfg),
                  std::move(context));
        s.start();
        return s;
    }

    void start() {
        require_state({SessionState::Created}, "start");
        state_ = SessionState::Running;
    }

    const std::string& id() const noexcept { return id_; }
    const std::string& participant_id() const noexcept { return participant_; }
    TargetEmotion target() const noexcept { return target_; }
    const SessionConfig& config() const noexcept { return cfg_; }
    const Context& context() const noexcept { return context_; }
    SessionState state() const noexcept { return state_; }
    const SkillEstimate& skill() const noexcept { return skill_; }
    const std::vector<TrialRecord>& records() const noexcept { return records_; }
    SensorHub& hub() noexcept { return hub_; }
    const SensorHub& hub() const noexcept { return hub_; }
    std::int64_t end_ts_ms() const noexcept { return end_ts_; }

    bool has_active_trial() const noexcept { return active_.has_value(); }
    int next_trial_index() const noexcept { return static_cast<int>(records_.size()); }

    const PuzzleTask& active_task() const {
        if (!active_) fail(ErrorCode::WrongState, "no active trial");
        return active_->record.task;
    }
    const HanoiState& live_state() const {
        if (!active_) fail(ErrorCode::WrongState, "no active trial");
        return active_->live;
    }
    int moves_remaining() const {
        if (!active_) fail(ErrorCode::WrongState, "no active trial");
        return active_->record.task.move_budget - active_->record.outcome.moves_used;
    }
    std::int64_t trial_start_ts() const {
        if (!active_) fail(ErrorCode::WrongState, "no active trial");
        return active_->record.start_ts_ms;
    }
    std::int64_t trial_deadline() const { return trial_start_ts() + active_task().time_budget_ms; }

    /// Trial awaiting its self-report, if any.
    const TrialRecord* pending_record() const { return pending_ ? &pending_->record : nullptr; }

    /// Changes the elicitation target; takes effect at the next trial.
    void set_target(TargetEmotion target) {
        require_state({SessionState::Created, SessionState::Running, SessionState::AwaitingReport}, "set_target");
        target_ = target;
    }

    /// Replaces the controller settings; takes effect at the next trial.
    void set_controller(const ControllerConfig& cfg) {
        require_state({SessionState::Created, SessionState::Running, SessionState::AwaitingReport}, "set_controller");
        cfg.validate();
        pending_controller_ = cfg;
        if (!active_ && !pending_) apply_pending_controller();
    }

    const PuzzleTask& next_trial(std::int64_t now_ms) {
        require_state({SessionState::Running}, "next_trial");
        if (active_) fail(ErrorCode::WrongState, "a trial is already active");
        apply_pending_controller();
        const int index = next_trial_index();
        ActiveTrial trial{};
        auto& rec = trial.record;
        rec.trial_index = index;
        rec.target = target_;
        rec.probe = index < static_cast<int>(cfg_.probe_challenges.size());
        rec.requested_challenge = rec.probe ? cfg_.probe_challenges[static_cast<std::size_t>(index)]
                                            : next_challenge(skill_, target_, cfg_.controller).value;
        rec.task = generate_task({rec.requested_challenge}, cfg_.disks, mix_seed(cfg_.seed, static_cast<std::uint64_t>(index)),
                                 cfg_.controller, cfg_.grid);
        rec.predicted_zone = classify_zone(skill_, ChallengeLevel{rec.task.challenge}, cfg_.controller);
        rec.skill_before = skill_;
        rec.start_ts_ms = now_ms;
        trial.live = rec.task.start;
        for (auto off : tick_schedule(rec.task.time_budget_ms, cfg_.ticks)) trial.ticks.push_back(now_ms + off);
        active_ = std::move(trial);
        return active_->record.task;
    }

    MoveResult submit_move(Move move, std::int64_t now_ms) {
        require_state({SessionState::Running}, "submit_move");
        if (!active_) fail(ErrorCode::WrongState, "no active trial");
        if (!move.is_valid()) fail(ErrorCode::BadMove, "move needs two distinct rods in 0..2");
        auto& rec = active_->record;
        if (now_ms < rec.start_ts_ms) fail(ErrorCode::StaleTimestamp, "move predates the trial start");

        MoveResult result;
        const auto deadline = trial_deadline();
        if (now_ms >= deadline) {
            result.state = active_->live;
            result.illegal_attempts = rec.outcome.illegal_attempts;
            result.moves_remaining = moves_remaining();
            result.reason = "time budget exhausted";
            close_trial(CloseCause::TimeBudgetExhausted, deadline);
            result.budget_exhausted = true;
            result.cause = CloseCause::TimeBudgetExhausted;
            return result;
        }
        auto& out = rec.outcome;
        if (!is_legal(active_->live, move)) {
            ++out.illegal_attempts;
            out.move_log.push_back({now_ms, move, false});
            result.state = active_->live;
            result.illegal_attempts = out.illegal_attempts;
            result.moves_remaining = moves_remaining();
            result.reason = active_->live.top(move.from_rod) ? "larger disk onto smaller" : "source rod is empty";
            return result;
        }
        active_->live.move_top_unchecked(move);
        ++out.moves_used;
        out.move_log.push_back({now_ms, move, true});
        result.accepted = true;
        result.state = active_->live;
        result.illegal_attempts = out.illegal_attempts;
        result.moves_remaining = moves_remaining();
        if (is_solved(active_->live, rec.task)) {
            result.solved = true;
            result.cause = CloseCause::Solved;
            close_trial(CloseCause::Solved, now_ms);
        } else if (result.moves_remaining == 0) {
            result.budget_exhausted = true;
            result.cause = CloseCause::MoveBudgetExhausted;
            close_trial(CloseCause::MoveBudgetExhausted, now_ms);
        }
        return result;
    }

    const TrialRecord& submit_self_report(SelfReport report, std::int64_t now_ms) {
        require_state({SessionState::AwaitingReport}, "submit_self_report");
        report.validate();
        report.report_latency_ms = std::max<std::int64_t>(0, now_ms - pending_->record.end_ts_ms);
        pending_->record.self_report = std::move(report);
        return finalize(now_ms);
    }

    /// Releases ticks and fires trial/report deadlines up to now.
    std::vector<SessionEvent> advance_to(std::int64_t now_ms) {
        std::vector<SessionEvent> events;
        if (state_ == SessionState::Running && active_) {
            const auto deadline = trial_deadline();
            auto& ticks = active_->ticks;
            while (active_->next_tick < ticks.size() && ticks[active_->next_tick] <= now_ms &&
                   ticks[active_->next_tick] < deadline) {
                const auto i = active_->next_tick++;
                SessionEvent ev;
                ev.kind = SessionEventKind::Tick;
                ev.session_ts_ms = ticks[i];
                ev.trial_index = active_->record.trial_index;
                ev.tick_index = static_cast<int>(i);
                ev.interval_ms = (i + 1 < ticks.size() ? ticks[i + 1] : deadline) - ticks[i];
                ev.remaining_ms = deadline - ticks[i];
                events.push_back(ev);
            }
            if (now_ms >= deadline) {
                const int index = active_->record.trial_index;
                close_trial(CloseCause::TimeBudgetExhausted, deadline);
                events.push_back({SessionEventKind::TrialClosed, deadline, index, 0, 0, 0, CloseCause::TimeBudgetExhausted});
            }
        }
        if (state_ == SessionState::AwaitingReport && pending_) {
            const auto due = pending_->record.end_ts_ms + cfg_.report_timeout_ms;
            if (now_ms >= due) {
                const int index = pending_->record.trial_index;
                pending_->record.report_missing = true;
                finalize(due);
                events.push_back({SessionEventKind::ReportTimedOut, due, index, 0, 0, 0, CloseCause::Open});
            }
        }
        return events;
    }

    /// Earliest session time at which advance_to() has something to do.
    std::optional<std::int64_t> next_deadline() const {
        if (state_ == SessionState::Running && active_) {
            const auto deadline = trial_deadline();
            if (active_->next_tick < active_->ticks.size() && active_->ticks[active_->next_tick] < deadline) {
                return active_->ticks[active_->next_tick];
            }
            return deadline;
        }
        if (state_ == SessionState::AwaitingReport && pending_) return pending_->record.end_ts_ms + cfg_.report_timeout_ms;
        return std::nullopt;
    }

    void abort(std::int64_t now_ms) {
        require_state({SessionState::Created, SessionState::Running, SessionState::AwaitingReport}, "abort");
        active_.reset();
        pending_.reset();
        state_ = SessionState::Aborted;
        end_ts_ = now_ms;
        hub_.flush();
    }

    /// Ingests a device sample while the session is live.
    SyncedSample ingest(const Sample& sample) {
        require_state({SessionState::Created, SessionState::Running, SessionState::AwaitingReport}, "ingest");
        return hub_.ingest(sample);
    }

private:
    struct ActiveTrial {
        TrialRecord record;
        HanoiState live = HanoiState::tower(1);
        std::vector<std::int64_t> ticks;  // absolute session times
        std::size_t next_tick = 0;
    };

    struct PendingReport {
        TrialRecord record;
    };

    void require_state(std::initializer_list<SessionState> allowed, const char* op) const {
        for (auto s : allowed) {
            if (s == state_) return;
        }
        fail(ErrorCode::WrongState, std::string(op) + " not allowed in state " + state_name(state_));
    }

    void close_trial(CloseCause cause, std::int64_t end_ms) {
        auto rec = std::move(active_->record);
        const auto ticks = std::move(active_->ticks);
        active_.reset();
        rec.outcome.cause = cause;
        rec.outcome.solved = cause == CloseCause::Solved;
        rec.end_ts_ms = end_ms;
        rec.outcome.time_used_ms = end_ms - rec.start_ts_ms;
        for (auto t : ticks) {
            if (t < end_ms) rec.tick_events.push_back(t);
        }
        pending_ = PendingReport{std::move(rec)};
        state_ = SessionState::AwaitingReport;
    }

    const TrialRecord& finalize(std::int64_t now_ms) {
        auto rec = std::move(pending_->record);
        pending_.reset();
        rec.finalized_ts_ms = now_ms;
        rec.score = score_trial(rec.outcome, rec.task, cfg_.controller);
        rec.skill_after = update_skill(rec.skill_before, rec.score, cfg_.controller);
        skill_ = rec.skill_after;
        records_.push_back(std::move(rec));
        if (static_cast<int>(records_.size()) >= cfg_.trials) {
            state_ = SessionState::Finished;
            end_ts_ = now_ms;
            hub_.flush();
        } else {
            state_ = SessionState::Running;
        }
        return records_.back();
    }

    void apply_pending_controller() {
        if (pending_controller_) {
            cfg_.controller = *pending_controller_;
            pending_controller_.reset();
        }
    }

    std::string id_;
    std::string participant_;
    TargetEmotion target_;
    SessionConfig cfg_;
    Context context_;
    SensorHub hub_;
    SessionState state_ = SessionState::Created;
    SkillEstimate skill_;
    std::optional<ActiveTrial> active_;
    std::optional<PendingReport> pending_;
    std::optional<ControllerConfig> pending_controller_;
    std::vector<TrialRecord> records_;
    std::int64_t end_ts_ = 0;
};

} // namespace xroom
