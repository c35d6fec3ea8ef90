/**
 * simulation.hpp: headless closed-loop session over the wire protocol
 *
 * A virtual clock drives one Gateway. A scripted participant client plays
 * the puzzle and answers self-reports, an operator client can switch the
 * target mid-session, and three device clients (PPG, GSR, eye) run the
 * clock handshake with planted offsets and stream synthetic signals. All
 * traffic is real protocol text, so the engine sees exactly what it would
 * see from hardware and a browser.
 *
 * Events are processed in (time, insertion) order and every random draw is
 * seeded, so a run is a pure function of its options.
 */

#pragma once

#include "xroom/dataset.hpp"
#include "xroom/gateway.hpp"
#include "xroom/participant_sim.hpp"
#include "xroom/protocol.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

namespace xroom {

struct SimDevice {
    SensorKind kind = SensorKind::PPG;
    std::int64_t clock_offset_ms = 0;  // device clock minus engine clock
    std::int64_t one_way_delay_ms = 2;
};

struct SimulationOptions {
    double skill = 0.5;
    TargetEmotion target = FlowZone::Flow;
    int trials = 20;
    std::uint64_t seed = 42;
    int disks = kDefaultDisks;
    SessionConfig session;  // trials, disks and seed above override these fields
    std::vector<SimDevice> devices{{SensorKind::PPG, 12345, 2}, {SensorKind::GSR, -5000, 3}, {SensorKind::EyeTracker, 0, 4}};
    std::optional<std::string> disconnect_stream;  // dropped when this trial starts
    int disconnect_at_trial = 0;
    std::map<int, FlowZone> target_switches;  // operator override sent when the trial starts
    std::optional<std::filesystem::path> out;

    void validate() const {
        if (!(skill >= 0.0 && skill <= 1.0)) fail(ErrorCode::InvalidArgument, "skill must lie in [0,1]");
        if (trials < 1) fail(ErrorCode::InvalidArgument, "trials must be at least 1");
        if (disks < 1 || disks > kMaxDisks) fail(ErrorCode::BoundExceeded, "disks must lie in 1..7");
    }
};

struct SimulationResult {
    std::vector<TrialRecord> records;
    SessionDataset dataset;
    std::map<std::string, std::size_t> samples_sent;      // per stream, accepted by the engine
    std::map<std::string, std::size_t> samples_rejected;  // per stream, answered with an error
    std::size_t ticks_seen = 0;
    std::size_t errors_seen = 0;
    std::int64_t end_ts_ms = 0;
};

/// Fraction of the last `window` trials whose predicted zone matched the trial's target.
inline double steady_state_hit_rate(const std::vector<TrialRecord>& records, std::size_t window = 10) {
    if (records.empty()) return 0.0;
    const auto n = std::min(window, records.size());
    std::size_t hits = 0;
    for (auto i = records.size() - n; i < records.size(); ++i) hits += records[i].predicted_zone == records[i].target;
    return static_cast<double>(hits) / static_cast<double>(n);
}

class Simulation {
public:
    explicit Simulation(SimulationOptions opts) : opts_(std::move(opts)) {
        opts_.validate();
        auto cfg = opts_.session;
        cfg.trials = opts_.trials;
        cfg.disks = opts_.disks;
        cfg.seed = opts_.seed;
        cfg.validate();
        session_cfg_ = cfg;
        profile_.true_skill = opts_.skill;
        profile_.rng_seed = opts_.seed;
        participant_ = std::make_unique<SimParticipant>(SimProfile{profile_.true_skill, profile_.temperature, profile_.base_hr_bpm,
                                                                   profile_.hr_anxiety_gain_bpm, profile_.gsr_base,
                                                                   mix_seed(opts_.seed, 1)});
        report_rng_.seed(mix_seed(opts_.seed, 2));
    }

    SimulationResult run() {
        GatewayConfig gcfg;
        gcfg.session = session_cfg_;
        gateway_ = std::make_unique<Gateway>(gcfg, [this] { return now_; });

        for (const auto& d : opts_.devices) add_device(d);
        ui_ = gateway_->connect([this](const std::string& line) { deliver(0, [this, line] { on_ui(line); }); });
        op_ = gateway_->connect([this](const std::string& line) { deliver(0, [this, line] { on_operator(line); }); });
        ui_send("hello", {{"role", "participant"}, {"protocol", kProtocolVersion}});
        op_send("hello", {{"role", "operator"}, {"protocol", kProtocolVersion}});
        for (auto& dev : devices_) {
            dev_send(dev, "hello", {{"role", "device"}, {"protocol", kProtocolVersion}});
            dev_send(dev, "register_stream", {{"kind", kind_name(dev.spec.kind)}});
        }
        // Start once every handshake has had time to finish.
        at(kSessionStartMs, [this] {
            ui_send("session_start", {{"participant_id", "sim"},
                                      {"session_id", "sim-" + std::to_string(opts_.seed)},
                                      {"target_emotion", zone_name(opts_.target)},
                                      {"context", {{"mode", "simulation"}}}});
        });

        while (!finished_) {
            const auto gw = gateway_->next_deadline();
            if (queue_.empty() && !gw) fail(ErrorCode::InvalidState, "simulation stalled before the session ended");
            if (gw && (queue_.empty() || *gw <= queue_.top().time)) {
                now_ = std::max(now_, *gw);
                gateway_->poll();
                continue;
            }
            auto ev = queue_.top();
            queue_.pop();
            now_ = std::max(now_, ev.time);
            ev.fn();
        }

        SimulationResult r;
        const Session* s = gateway_->session();
        r.records = s->records();
        r.end_ts_ms = s->end_ts_ms();
        r.dataset = make_dataset(*s);
        if (opts_.out) write_dataset(r.dataset, *opts_.out);
        for (const auto& dev : devices_) {
            r.samples_sent[dev.stream_id] = dev.sent - dev.rejected;
            r.samples_rejected[dev.stream_id] = dev.rejected;
        }
        r.ticks_seen = ticks_seen_;
        r.errors_seen = errors_seen_;
        return r;
    }

private:
    static constexpr std::int64_t kSessionStartMs = 1000;

    struct Event {
        std::int64_t time;
        std::uint64_t order;
        std::function<void()> fn;
    };
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            return a.time != b.time ? a.time > b.time : a.order > b.order;
        }
    };

    struct Device {
        StreamSpec spec;
        std::string stream_id;
        std::int64_t offset = 0;
        std::int64_t delay = 0;
        ConnectionId conn = 0;
        std::int64_t seq = 0;
        bool connected = true;
        bool synced = false;
        bool streaming = false;
        std::set<std::int64_t> sample_seqs;
        std::size_t sent = 0;
        std::size_t rejected = 0;
        std::unique_ptr<PpgSynth> ppg;
        std::unique_ptr<GsrSynth> gsr;
        std::unique_ptr<GazeSynth> gaze;

        std::int64_t next_ts() const {
            if (ppg) return ppg->next_ts();
            if (gsr) return gsr->next_ts();
            return gaze->next_ts();
        }
        Sample take(FlowZone z) {
            if (ppg) return ppg->take(z);
            if (gsr) return gsr->take(z);
            return gaze->take(z);
        }
    };

    void at(std::int64_t t, std::function<void()> fn) { queue_.push({t, order_++, std::move(fn)}); }
    void deliver(std::int64_t delay, std::function<void()> fn) { at(now_ + delay, std::move(fn)); }

    void ui_send(const char* type, json payload) { gateway_->receive(ui_, make_message(type, ++ui_seq_, std::move(payload))); }
    void op_send(const char* type, json payload) { gateway_->receive(op_, make_message(type, ++op_seq_, std::move(payload))); }
    std::int64_t dev_send(Device& dev, const char* type, json payload) {
        const auto seq = ++dev.seq;
        gateway_->receive(dev.conn, make_message(type, seq, std::move(payload)));
        return seq;
    }

    void add_device(const SimDevice& d) {
        auto dev = std::make_unique<Device>();
        dev->spec.kind = d.kind;
        dev->spec.channels = default_channels(d.kind);
        dev->stream_id = stream_id_for(dev->spec);
        dev->offset = d.clock_offset_ms;
        dev->delay = d.one_way_delay_ms;
        const auto index = devices_.size();
        dev->conn = gateway_->connect([this, index](const std::string& line) {
            deliver(devices_[index].delay, [this, index, line] { on_device(devices_[index], line); });
        });
        devices_.push_back(std::move(*dev));
    }

    // ── device client ─────────────────────────────────────────────────────

    void on_device(Device& dev, const std::string& line) {
        if (!dev.connected) return;
        const auto msg = json::parse(line);
        const auto type = msg.at("type").get<std::string>();
        const auto& p = msg.at("payload");
        if (type == "clock_sync_req") {
            // Request reached the device after one delay; the reply takes another.
            const auto t1 = p.at("t1").get<std::int64_t>();
            const auto t2 = now_ + dev.offset;
            const auto index = static_cast<std::size_t>(&dev - devices_.data());
            at(now_ + dev.delay, [this, index, t1, t2] {
                auto& d = devices_[index];
                if (d.connected) dev_send(d, "clock_sync_resp", {{"stream_id", d.stream_id}, {"t1", t1}, {"t2", t2}, {"t3", t2}});
            });
        } else if (type == "clock_synced") {
            dev.synced = true;
        } else if (type == "error") {
            const auto& seq = p.at("seq");
            if (seq.is_number_integer() && dev.sample_seqs.count(seq.get<std::int64_t>())) {
                ++dev.rejected;
            } else {
                ++errors_seen_;
            }
        }
    }

    void start_streaming(Device& dev) {
        if (!dev.connected || dev.streaming) return;
        dev.streaming = true;
        const auto rate = default_rate_hz(dev.spec.kind);
        switch (dev.spec.kind) {
        case SensorKind::PPG: dev.ppg = std::make_unique<PpgSynth>(profile_, now_, rate, dev.stream_id); break;
        case SensorKind::GSR: dev.gsr = std::make_unique<GsrSynth>(profile_, now_, rate, dev.stream_id); break;
        default: dev.gaze = std::make_unique<GazeSynth>(opts_.seed, now_, rate, dev.stream_id); break;
        }
        schedule_sample(static_cast<std::size_t>(&dev - devices_.data()));
    }

    void schedule_sample(std::size_t index) {
        auto& dev = devices_[index];
        at(dev.next_ts() + dev.delay, [this, index] {
            auto& d = devices_[index];
            if (!d.streaming) return;
            const auto s = d.take(experienced_zone_);
            const auto seq = dev_send(d, "sample", {{"stream_id", d.stream_id}, {"ts", s.device_ts_ms + d.offset}, {"values", s.values}});
            d.sample_seqs.insert(seq);
            ++d.sent;
            schedule_sample(index);
        });
    }

    void drop_device(const std::string& stream_id) {
        for (auto& dev : devices_) {
            if (dev.stream_id == stream_id && dev.connected) {
                dev.connected = false;
                dev.streaming = false;
                gateway_->disconnect(dev.conn);
            }
        }
    }

    // ── participant client ────────────────────────────────────────────────

    void on_ui(const std::string& line) {
        const auto msg = json::parse(line);
        const auto type = msg.at("type").get<std::string>();
        const auto& p = msg.at("payload");
        if (type == "session_started") {
            for (auto& dev : devices_) start_streaming(dev);
        } else if (type == "task_state") {
            if (!p.at("active").get<bool>()) return;
            const int index = p.at("trial_index").get<int>();
            if (index == open_trial_) return;  // refresh of a trial already being played
            open_trial_ = index;
            on_trial_start(index, p);
        } else if (type == "move_result") {
            if (p.at("cause").get<std::string>() != "open") open_trial_ = -1;
        } else if (type == "report_request") {
            open_trial_ = -1;
            const int index = p.at("trial_index").get<int>();
            const auto latency = 800 + static_cast<std::int64_t>(unit_uniform(report_rng_) * 1700.0);
            at(now_ + latency, [this, index] { send_report(index); });
        } else if (type == "tick") {
            ++ticks_seen_;
        } else if (type == "error") {
            ++errors_seen_;
        } else if (type == "session_end") {
            finished_ = true;
            for (auto& dev : devices_) dev.streaming = false;
        }
    }

    void on_trial_start(int index, const json& p) {
        PuzzleTask task;
        task.start = state_from_json(p.at("start"));
        task.target = state_from_json(p.at("target"));
        task.move_budget = p.at("move_budget").get<int>();
        task.min_moves = p.at("min_moves").get<int>();
        task.slack = task.move_budget - task.min_moves;
        task.time_budget_ms = p.at("time_budget_ms").get<std::int64_t>();
        task.challenge = p.at("challenge").get<double>();
        experienced_zone_ = classify_zone(opts_.skill, ChallengeLevel{task.challenge}, session_cfg_.controller);
        report_zone_[index] = experienced_zone_;

        if (opts_.disconnect_stream && index == opts_.disconnect_at_trial) drop_device(*opts_.disconnect_stream);
        if (auto it = opts_.target_switches.find(index); it != opts_.target_switches.end()) {
            op_send("operator_override", {{"target_emotion", zone_name(it->second)}});
        }

        const auto plan = participant_->plan_attempt(task);
        const auto start = now_;
        for (const auto& tm : plan.moves) {
            const Move m = tm.move;
            at(start + tm.offset_ms, [this, index, m] {
                if (open_trial_ == index) ui_send("move", {{"from", m.from_rod}, {"to", m.to_rod}});
            });
        }
    }

    void send_report(int index) {
        // Reports follow the zone the participant actually experienced, with a point of jitter.
        const auto zone = report_zone_.at(index);
        int valence = 5, arousal = 5;
        switch (zone) {
        case FlowZone::Anxiety: valence = 3; arousal = 8; break;
        case FlowZone::Flow: valence = 7; arousal = 6; break;
        case FlowZone::Boredom: valence = 4; arousal = 2; break;
        }
        auto jitter = [this] { return static_cast<int>(report_rng_() % 3) - 1; };
        valence = std::clamp(valence + jitter(), 1, 9);
        arousal = std::clamp(arousal + jitter(), 1, 9);
        ui_send("self_report", {{"valence", valence}, {"arousal", arousal}, {"label", zone_name(zone)}});
    }

    void on_operator(const std::string& line) {
        const auto msg = json::parse(line);
        if (msg.at("type").get<std::string>() == "error") ++errors_seen_;
    }

    SimulationOptions opts_;
    SessionConfig session_cfg_;
    SimProfile profile_;
    std::unique_ptr<SimParticipant> participant_;
    std::mt19937_64 report_rng_;
    std::unique_ptr<Gateway> gateway_;
    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    std::uint64_t order_ = 0;
    std::int64_t now_ = 0;
    bool finished_ = false;

    ConnectionId ui_ = 0, op_ = 0;
    std::int64_t ui_seq_ = 0, op_seq_ = 0;
    std::vector<Device> devices_;
    int open_trial_ = -1;
    FlowZone experienced_zone_ = FlowZone::Flow;
    std::map<int, FlowZone> report_zone_;
    std::size_t ticks_seen_ = 0;
    std::size_t errors_seen_ = 0;
};

inline SimulationResult run_simulation(SimulationOptions opts) { return Simulation(std::move(opts)).run(); }

} // namespace xroom
