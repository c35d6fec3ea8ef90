/**
 * gateway.hpp: transport-independent message router
 *
 * The gateway owns one live session at a time plus the registry of device
 * streams. Transports hand it lines with receive(), and it answers through
 * per-connection sinks. Time comes from an injected clock that doubles as
 * the session timeline, so the same gateway runs under a socket server with
 * a steady clock or under a virtual clock in simulation.
 *
 * Every public call takes the gateway lock. Sinks are invoked with the lock
 * held and must not call back into the gateway.
 */

#pragma once

#include "xroom/dataset.hpp"
#include "xroom/error.hpp"
#include "xroom/json_io.hpp"
#include "xroom/protocol.hpp"
#include "xroom/session.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace xroom {

struct GatewayConfig {
    SessionConfig session;  // defaults for new sessions; session_start may patch them
    std::optional<std::filesystem::path> dataset_root;
};

inline GatewayConfig gateway_config_from_json(const json& j) {
    GatewayConfig cfg;
    if (!j.is_object()) fail(ErrorCode::InvalidConfig, "config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key == "session") {
            patch_session_config(value, cfg.session);
        } else if (key == "controller") {
            patch_controller(value, cfg.session.controller);
        } else if (key == "sensors") {
            patch_session_config(json{{"sensors", value}}, cfg.session);
        } else if (key == "dataset_root") {
            if (!value.is_string()) fail(ErrorCode::InvalidConfig, "dataset_root must be a string");
            cfg.dataset_root = value.get<std::string>();
        } else {
            fail(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
        }
    }
    cfg.session.validate();
    return cfg;
}

/// Channel names assumed when a device registers without listing them.
inline std::vector<std::string> default_channels(SensorKind kind) {
    switch (kind) {
    case SensorKind::PPG: return {"pulse"};
    case SensorKind::GSR: return {"conductance"};
    case SensorKind::EyeTracker: return {"x", "y"};
    case SensorKind::FaceTracker:
    case SensorKind::Custom: break;
    }
    return {};
}

using ConnectionId = std::uint64_t;
using Sink = std::function<void(const std::string&)>;
using ClockFn = std::function<std::int64_t()>;

class Gateway {
public:
    Gateway(GatewayConfig cfg, ClockFn clock) : cfg_(std::move(cfg)), clock_(std::move(clock)) { cfg_.session.validate(); }

    ConnectionId connect(Sink sink) {
        std::lock_guard lock(mu_);
        const auto id = next_conn_++;
        Connection conn;
        conn.sink = std::move(sink);
        conns_.emplace(id, std::move(conn));
        return id;
    }

    void disconnect(ConnectionId id) {
        std::lock_guard lock(mu_);
        auto it = conns_.find(id);
        if (it == conns_.end()) return;
        for (const auto& stream : it->second.streams) {
            auto& dev = devices_.at(stream);
            dev.connected = false;
            dev.pending_t1.reset();
            dev.batch.clear();
            if (session_live() && session_->hub().has_stream(stream) && session_->hub().stream(stream).active) {
                session_->hub().disconnect(stream);
            }
        }
        conns_.erase(it);
    }

    /// Handles one inbound line. Any failure produces exactly one `error` reply.
    void receive(ConnectionId id, std::string_view line) {
        std::lock_guard lock(mu_);
        auto it = conns_.find(id);
        if (it == conns_.end()) return;
        const auto now = clock_();
        std::optional<std::int64_t> seq;
        try {
            const auto env = parse_envelope(line, seq);
            auto& conn = it->second;
            if (conn.last_seq && env.seq <= *conn.last_seq) {
                fail(ErrorCode::OutOfOrder, "seq " + std::to_string(env.seq) + " does not exceed " +
                                                std::to_string(*conn.last_seq));
            }
            conn.last_seq = env.seq;
            pump(now);
            dispatch(id, env, now);
        } catch (const Error& e) {
            send(id, "error", error_payload(error_code_name(e.code()), e.what(), seq));
        } catch (const json::exception& e) {
            send(id, "error", error_payload(error_code_name(ErrorCode::Malformed), e.what(), seq));
        } catch (const std::exception& e) {
            send(id, "error", error_payload("internal", e.what(), seq));
        }
    }

    /// Releases ticks, deadlines and scheduled re-syncs up to the clock's now.
    void poll() {
        std::lock_guard lock(mu_);
        pump(clock_());
    }

    /// Earliest clock time at which poll() has work.
    std::optional<std::int64_t> next_deadline() const {
        std::lock_guard lock(mu_);
        std::optional<std::int64_t> best;
        auto consider = [&](std::int64_t t) {
            if (!best || t < *best) best = t;
        };
        if (session_live()) {
            if (auto d = session_->next_deadline()) consider(*d);
        }
        for (const auto& [id, dev] : devices_) {
            if (dev.connected && dev.synced && !dev.pending_t1) consider(dev.next_resync);
        }
        return best;
    }

    /// Current or most recent session.
    const Session* session() const {
        std::lock_guard lock(mu_);
        return session_ ? &*session_ : nullptr;
    }

    std::optional<std::filesystem::path> last_export() const {
        std::lock_guard lock(mu_);
        return last_export_;
    }

    SessionDataset export_session(const std::filesystem::path& dir) const {
        std::lock_guard lock(mu_);
        if (!session_) fail(ErrorCode::NoSession, "no session to export");
        return export_dataset(*session_, dir);
    }

    const GatewayConfig& config() const noexcept { return cfg_; }

    std::int64_t now() const { return clock_(); }

private:
    struct Connection {
        Sink sink;
        Role role = Role::Unknown;
        std::optional<std::int64_t> last_seq;
        std::int64_t out_seq = 0;
        std::set<std::string> streams;
    };

    struct DeviceStream {
        ConnectionId owner = 0;
        StreamSpec spec;
        bool connected = true;
        bool synced = false;
        std::vector<SyncExchange> batch;         // exchanges of the round in progress
        std::vector<SyncExchange> last_exchanges;  // exchanges behind the current clock map
        std::optional<std::int64_t> pending_t1;
        int round = 0;
        std::int64_t next_resync = 0;
    };

    bool session_live() const {
        return session_ && (session_->state() == SessionState::Running || session_->state() == SessionState::AwaitingReport ||
                            session_->state() == SessionState::Created);
    }

    Session& live_session() {
        if (!session_live()) fail(ErrorCode::NoSession, "no live session");
        return *session_;
    }

    void send(ConnectionId id, std::string_view type, json payload) {
        auto it = conns_.find(id);
        if (it == conns_.end()) return;
        std::optional<std::int64_t> ts;
        if (session_live()) ts = clock_();
        it->second.sink(make_message(type, ++it->second.out_seq, std::move(payload), ts));
    }

    void send_at(ConnectionId id, std::string_view type, json payload, std::int64_t ts) {
        auto it = conns_.find(id);
        if (it == conns_.end()) return;
        it->second.sink(make_message(type, ++it->second.out_seq, std::move(payload), ts));
    }

    /// To every participant and operator connection.
    void broadcast(std::string_view type, const json& payload, std::int64_t ts) {
        for (auto& [id, conn] : conns_) {
            if (conn.role != Role::Device) send_at(id, type, payload, ts);
        }
    }

    void require_role(ConnectionId id, std::initializer_list<Role> allowed, const char* what) {
        const auto role = conns_.at(id).role;
        for (auto r : allowed) {
            if (r == role) return;
        }
        fail(ErrorCode::Forbidden, std::string(what) + " is not allowed for role " + role_name(role));
    }

    void dispatch(ConnectionId id, const Envelope& env, std::int64_t now) {
        const auto& p = env.payload;
        const auto& t = env.type;
        if (t == "hello") return on_hello(id, p);
        if (t == "register_stream") return on_register(id, p, now);
        if (t == "clock_sync_resp") return on_sync_resp(id, p, now);
        if (t == "clock_sync") return on_sync_script(id, p, now);
        if (t == "sample") return on_sample(id, p);
        if (t == "session_start") return on_session_start(id, p, now);
        if (t == "task_state") return on_task_state(id, now);
        if (t == "move") return on_move(id, p, now);
        if (t == "self_report") return on_self_report(id, p, now);
        if (t == "operator_override") return on_override(id, p);
        if (t == "session_end") return on_session_end(id, now);
        fail(ErrorCode::UnknownType, "unknown message type '" + t + "'");
    }

    // ── handshake and devices ─────────────────────────────────────────────

    void on_hello(ConnectionId id, const json& p) {
        const auto role = parse_role(get_enum_text(p, "role"));
        if (!role) fail(ErrorCode::InvalidArgument, "role must be participant, operator or device");
        if (auto v = p.find("protocol"); v != p.end()) {
            if (!v->is_string() || v->get<std::string>() != kProtocolVersion) {
                fail(ErrorCode::UnsupportedProtocol, "this engine speaks protocol \"1\"");
            }
        }
        auto& conn = conns_.at(id);
        if (conn.role != Role::Unknown && conn.role != *role) fail(ErrorCode::WrongState, "role already declared");
        conn.role = *role;
        send(id, "hello", json{{"protocol", kProtocolVersion}, {"role", role_name(*role)}, {"server", "xroom"},
                               {"connection_id", id}});
    }

    void on_register(ConnectionId id, const json& p, std::int64_t now) {
        require_role(id, {Role::Device}, "register_stream");
        const auto kind = parse_kind(get_enum_text(p, "kind"));
        if (!kind) fail(ErrorCode::InvalidArgument, "unknown sensor kind");
        StreamSpec spec;
        spec.kind = *kind;
        if (p.contains("name")) spec.name = get_field<std::string>(p, "name");
        if (p.contains("channels")) {
            const auto& ch = p.at("channels");
            if (!ch.is_array()) fail(ErrorCode::SchemaViolation, "channels must be an array of strings");
            for (const auto& c : ch) {
                if (!c.is_string()) fail(ErrorCode::SchemaViolation, "channels must be an array of strings");
                spec.channels.push_back(c.get<std::string>());
            }
        } else {
            spec.channels = default_channels(spec.kind);
        }
        spec.nominal_rate_hz = p.contains("rate_hz") ? get_field<double>(p, "rate_hz") : default_rate_hz(spec.kind);

        const auto stream_id = stream_id_for(spec);
        if (auto it = devices_.find(stream_id); it != devices_.end() && it->second.connected) {
            fail(ErrorCode::DuplicateStream, "stream '" + stream_id + "' is already registered");
        }
        if (session_live()) {
            session_->hub().register_stream(spec);
        } else {
            SensorHub scratch;  // same validation without touching any session
            scratch.register_stream(spec);
        }
        DeviceStream dev;
        dev.owner = id;
        dev.spec = spec;
        if (!devices_.count(stream_id)) device_order_.push_back(stream_id);
        devices_[stream_id] = dev;
        conns_.at(id).streams.insert(stream_id);
        send(id, "stream_registered",
             json{{"stream_id", stream_id}, {"channels", spec.channels}, {"rate_hz", spec.nominal_rate_hz}});
        start_sync(stream_id, now);
    }

    DeviceStream& owned_stream(ConnectionId id, const json& p) {
        const auto stream_id = get_field<std::string>(p, "stream_id");
        auto it = devices_.find(stream_id);
        if (it == devices_.end() || !it->second.connected) fail(ErrorCode::UnknownStream, "no stream '" + stream_id + "'");
        if (it->second.owner != id) fail(ErrorCode::Forbidden, "stream '" + stream_id + "' belongs to another connection");
        return it->second;
    }

    void start_sync(const std::string& stream_id, std::int64_t now) {
        auto& dev = devices_.at(stream_id);
        dev.batch.clear();
        dev.round = 1;
        dev.pending_t1 = now;
        send(dev.owner, "clock_sync_req", json{{"stream_id", stream_id}, {"round", 1}, {"t1", now}});
    }

    void on_sync_resp(ConnectionId id, const json& p, std::int64_t now) {
        auto& dev = owned_stream(id, p);
        const SyncExchange x{get_field<std::int64_t>(p, "t1"), get_field<std::int64_t>(p, "t2"),
                             get_field<std::int64_t>(p, "t3"), now};
        if (!dev.pending_t1 || x.t1 != *dev.pending_t1) fail(ErrorCode::InvalidArgument, "no outstanding request with that t1");
        dev.batch.push_back(x);
        const auto stream_id = stream_id_for(dev.spec);
        const int rounds = session_live() ? session_->config().hub.sync_rounds : cfg_.session.hub.sync_rounds;
        if (static_cast<int>(dev.batch.size()) < rounds) {
            dev.pending_t1 = now;
            ++dev.round;
            send(id, "clock_sync_req", json{{"stream_id", stream_id}, {"round", dev.round}, {"t1", now}});
            return;
        }
        dev.pending_t1.reset();
        auto batch = std::move(dev.batch);
        dev.batch.clear();
        finish_sync(stream_id, batch, now);
    }

    void on_sync_script(ConnectionId id, const json& p, std::int64_t now) {
        auto& dev = owned_stream(id, p);
        const auto& xs = p.at("exchanges");
        if (!xs.is_array()) fail(ErrorCode::SchemaViolation, "exchanges must be an array");
        std::vector<SyncExchange> batch;
        for (const auto& x : xs) {
            if (!x.is_object()) fail(ErrorCode::SchemaViolation, "each exchange must be an object");
            batch.push_back({get_field<std::int64_t>(x, "t1"), get_field<std::int64_t>(x, "t2"),
                             get_field<std::int64_t>(x, "t3"), get_field<std::int64_t>(x, "t4")});
        }
        estimate_offset(batch);  // reject before touching any state
        dev.pending_t1.reset();
        dev.batch.clear();
        finish_sync(stream_id_for(dev.spec), batch, now);
    }

    void finish_sync(const std::string& stream_id, const std::vector<SyncExchange>& batch, std::int64_t now) {
        auto& dev = devices_.at(stream_id);
        const auto interval = session_live() ? session_->config().hub.resync_interval_ms : cfg_.session.hub.resync_interval_ms;
        dev.next_resync = now + interval;
        const auto est = estimate_offset(batch);
        dev.synced = true;
        dev.last_exchanges = batch;
        if (session_live()) session_->hub().update_clock(stream_id, batch);
        send(dev.owner, "clock_synced",
             json{{"stream_id", stream_id}, {"offset_ms", est.offset_ms}, {"rtt_ms", est.rtt_ms}, {"rounds", est.rounds}});
    }

    void on_sample(ConnectionId id, const json& p) {
        auto& dev = owned_stream(id, p);
        Sample s;
        s.stream_id = stream_id_for(dev.spec);
        s.device_ts_ms = get_field<std::int64_t>(p, "ts");
        const auto& vals = p.at("values");
        if (!vals.is_array()) fail(ErrorCode::SchemaViolation, "values must be an array of numbers");
        for (const auto& v : vals) {
            if (!v.is_number()) fail(ErrorCode::SchemaViolation, "values must be an array of numbers");
            s.values.push_back(v.get<double>());
        }
        live_session().ingest(s);
    }

    // ── session control ───────────────────────────────────────────────────

    void on_session_start(ConnectionId id, const json& p, std::int64_t now) {
        require_role(id, {Role::Participant, Role::Operator, Role::Unknown}, "session_start");
        if (session_live()) fail(ErrorCode::WrongState, "a session is already running");
        const auto participant = get_field<std::string>(p, "participant_id");
        const auto target = zone_from_json(p, "target_emotion");
        auto cfg = cfg_.session;
        if (auto c = p.find("config"); c != p.end()) patch_session_config(*c, cfg);
        Context context;
        if (auto c = p.find("context"); c != p.end()) {
            if (!c->is_object()) fail(ErrorCode::SchemaViolation, "context must be an object of strings");
            for (const auto& [k, v] : c->items()) {
                if (!v.is_string()) fail(ErrorCode::SchemaViolation, "context values must be strings");
                context[k] = v.get<std::string>();
            }
        }
        const auto session_id = p.contains("session_id") ? get_field<std::string>(p, "session_id") : make_session_id(participant);
        Session s(session_id, participant, target, cfg, context);
        s.start();
        session_.emplace(std::move(s));
        last_export_.reset();
        override_base_.reset();
        for (const auto& stream_id : device_order_) {
            const auto& dev = devices_.at(stream_id);
            if (!dev.connected) continue;
            session_->hub().register_stream(dev.spec);
            if (dev.synced) session_->hub().update_clock(stream_id, dev.last_exchanges);
        }
        broadcast("session_started",
                  json{{"session_id", session_id},
                       {"participant_id", participant},
                       {"target_emotion", zone_name(target)},
                       {"trials", cfg.trials},
                       {"scale_version", kScaleVersion},
                       {"report_timeout_ms", cfg.report_timeout_ms}},
                  now);
        begin_trial(now);
    }

    json task_state_payload() const {
        const auto& s = *session_;
        if (!s.has_active_trial()) {
            return json{{"active", false}, {"session_state", state_name(s.state())}, {"trial_index", s.next_trial_index()}};
        }
        const auto& task = s.active_task();
        const auto now = clock_();
        return json{{"active", true},
                    {"session_state", state_name(s.state())},
                    {"trial_index", s.next_trial_index()},
                    {"target_emotion", zone_name(s.target())},
                    {"start", task.start},
                    {"target", task.target},
                    {"state", s.live_state()},
                    {"move_budget", task.move_budget},
                    {"moves_remaining", s.moves_remaining()},
                    {"min_moves", task.min_moves},
                    {"time_budget_ms", task.time_budget_ms},
                    {"remaining_ms", std::max<std::int64_t>(0, s.trial_deadline() - now)},
                    {"challenge", task.challenge},
                    {"skill", s.skill().value}};
    }

    void begin_trial(std::int64_t now) {
        session_->next_trial(now);
        broadcast("task_state", task_state_payload(), now);
    }

    void on_task_state(ConnectionId id, std::int64_t now) {
        require_role(id, {Role::Participant, Role::Operator, Role::Unknown}, "task_state");
        live_session();
        send_at(id, "task_state", task_state_payload(), now);
    }

    void on_move(ConnectionId id, const json& p, std::int64_t now) {
        require_role(id, {Role::Participant, Role::Unknown}, "move");
        auto& s = live_session();
        const Move m{get_field<int>(p, "from"), get_field<int>(p, "to")};
        const int index = s.next_trial_index();
        const auto r = s.submit_move(m, now);
        json payload{{"trial_index", index},
                     {"accepted", r.accepted},
                     {"state", r.state},
                     {"solved", r.solved},
                     {"moves_remaining", r.moves_remaining},
                     {"illegal_attempts", r.illegal_attempts},
                     {"cause", cause_name(r.cause)}};
        if (!r.reason.empty()) payload["reason"] = r.reason;
        broadcast("move_result", payload, now);
        if (r.cause != CloseCause::Open) request_report(now, index, r.cause);
    }

    // A batch from advance_to() may already hold the report timeout, so the
    // pending record can be gone by the time the closure is announced.
    void request_report(std::int64_t ts, int trial_index, CloseCause cause) {
        broadcast("report_request",
                  json{{"trial_index", trial_index},
                       {"cause", cause_name(cause)},
                       {"scale_version", kScaleVersion},
                       {"timeout_ms", session_->config().report_timeout_ms}},
                  ts);
    }

    void on_self_report(ConnectionId id, const json& p, std::int64_t now) {
        require_role(id, {Role::Participant, Role::Unknown}, "self_report");
        auto& s = live_session();
        auto report = report_from_json(p);
        report.report_latency_ms = 0;
        const auto& rec = s.submit_self_report(report, now);
        after_finalize(rec, now);
    }

    void after_finalize(const TrialRecord& rec, std::int64_t now) {
        broadcast("report_ack",
                  json{{"trial_index", rec.trial_index},
                       {"report_missing", rec.report_missing},
                       {"score", rec.score},
                       {"skill", rec.skill_after.value}},
                  now);
        if (session_->state() == SessionState::Running) {
            begin_trial(now);
        } else {
            finish_session(now);
        }
    }

    void on_override(ConnectionId id, const json& p) {
        require_role(id, {Role::Operator}, "operator_override");
        auto& s = live_session();
        if (!p.contains("target_emotion") && !p.contains("controller")) {
            fail(ErrorCode::InvalidArgument, "override needs target_emotion and/or controller");
        }
        std::optional<FlowZone> target;
        if (p.contains("target_emotion")) target = zone_from_json(p, "target_emotion");
        std::optional<ControllerConfig> controller;
        if (auto c = p.find("controller"); c != p.end()) {
            auto patched = override_base_ ? *override_base_ : s.config().controller;
            patch_controller(*c, patched);
            patched.validate();
            controller = patched;
        }
        const bool queued = s.has_active_trial() || s.pending_record() != nullptr;
        if (target) s.set_target(*target);
        if (controller) {
            s.set_controller(*controller);
            override_base_ = *controller;
        }
        broadcast("override_ack",
                  json{{"target_emotion", zone_name(s.target())},
                       {"controller", controller ? *controller : s.config().controller},
                       {"queued", queued},
                       {"applies_from_trial", s.next_trial_index() + (queued ? 1 : 0)}},
                  clock_());
    }

    void on_session_end(ConnectionId id, std::int64_t now) {
        require_role(id, {Role::Participant, Role::Operator, Role::Unknown}, "session_end");
        live_session().abort(now);
        finish_session(now);
    }

    void finish_session(std::int64_t now) {
        json payload{{"session_id", session_->id()},
                     {"state", state_name(session_->state())},
                     {"trials", session_->records().size()},
                     {"skill", session_->skill().value},
                     {"dataset", nullptr}};
        if (cfg_.dataset_root) {
            const auto dir = *cfg_.dataset_root / session_->id();
            try {
                export_dataset(*session_, dir);
                last_export_ = dir;
                payload["dataset"] = dir.string();
            } catch (const Error& e) {
                payload["export_error"] = e.what();
            }
        }
        broadcast("session_end", payload, now);
    }

    void pump(std::int64_t now) {
        while (session_live()) {
            const auto events = session_->advance_to(now);
            if (events.empty()) break;
            for (const auto& ev : events) {
                switch (ev.kind) {
                case SessionEventKind::Tick:
                    broadcast("tick",
                              json{{"trial_index", ev.trial_index},
                                   {"tick_index", ev.tick_index},
                                   {"interval_ms", ev.interval_ms},
                                   {"remaining_ms", ev.remaining_ms}},
                              ev.session_ts_ms);
                    break;
                case SessionEventKind::TrialClosed: request_report(ev.session_ts_ms, ev.trial_index, ev.cause); break;
                case SessionEventKind::ReportTimedOut: after_finalize(session_->records().back(), now); break;
                }
            }
        }
        for (auto& [stream_id, dev] : devices_) {
            if (dev.connected && dev.synced && !dev.pending_t1 && dev.next_resync <= now) start_sync(stream_id, now);
        }
    }

    GatewayConfig cfg_;
    ClockFn clock_;
    mutable std::mutex mu_;
    std::map<ConnectionId, Connection> conns_;
    ConnectionId next_conn_ = 1;
    std::map<std::string, DeviceStream> devices_;
    std::vector<std::string> device_order_;  // first registration order, kept across reconnects
    std::optional<Session> session_;
    std::optional<ControllerConfig> override_base_;
    std::optional<std::filesystem::path> last_export_;
};

} // namespace xroom
