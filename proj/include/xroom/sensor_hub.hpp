/**
 * sensor_hub.hpp: sensor stream registry, clock mapping and reordering
 *
 * Every device keeps its own millisecond clock. A four-timestamp exchange
 * (engine send t1, device receive t2, device reply t3, engine receive t4)
 * yields offset = ((t2-t1)+(t3-t4))/2 and rtt = (t4-t1)-(t3-t2); the
 * minimum-RTT exchange wins. The offset is how far the device clock runs
 * ahead, so device samples are shifted back by it onto the session clock and released per stream in timestamp order through a
 * fixed reorder buffer. Samples that arrive after their slot has already
 * been released are kept and flagged late.
 *
 * Streams are independent: registering, dropping or re-registering one
 * never touches the state of another.
 */

#pragma once

#include "xroom/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace xroom {

enum class SensorKind { GSR, PPG, EyeTracker, FaceTracker, Custom };

inline const char* kind_name(SensorKind k) {
    switch (k) {
    case SensorKind::GSR: return "gsr";
    case SensorKind::PPG: return "ppg";
    case SensorKind::EyeTracker: return "eye";
    case SensorKind::FaceTracker: return "face";
    case SensorKind::Custom: return "custom";
    }
    return "custom";
}

inline std::optional<SensorKind> parse_kind(std::string_view s) {
    for (auto k : {SensorKind::GSR, SensorKind::PPG, SensorKind::EyeTracker, SensorKind::FaceTracker, SensorKind::Custom}) {
        if (s == kind_name(k)) return k;
    }
    return std::nullopt;
}

/// Nominal sampling rates used when a device does not announce one.
inline double default_rate_hz(SensorKind k) {
    switch (k) {
    case SensorKind::PPG: return 64.0;
    case SensorKind::GSR: return 16.0;
    case SensorKind::EyeTracker: return 60.0;
    case SensorKind::FaceTracker: return 30.0;
    case SensorKind::Custom: break;
    }
    return 32.0;
}

struct StreamSpec {
    SensorKind kind = SensorKind::Custom;
    std::string name;  // optional instance name; required for Custom
    std::vector<std::string> channels;
    double nominal_rate_hz = 0.0;

    friend bool operator==(const StreamSpec&, const StreamSpec&) = default;
};

inline bool is_identifier(std::string_view s) {
    return !s.empty() && s.size() <= 64 && std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_' || c == '-';
    });
}

/// Stream ids double as file names, so they are restricted to [A-Za-z0-9_-].
inline std::string stream_id_for(const StreamSpec& spec) {
    if (spec.kind == SensorKind::Custom) {
        if (spec.name.empty()) fail(ErrorCode::InvalidArgument, "custom streams need a name");
        if (!is_identifier(spec.name)) fail(ErrorCode::InvalidArgument, "stream name must match [A-Za-z0-9_-]+");
        return spec.name;
    }
    if (spec.name.empty()) return kind_name(spec.kind);
    if (!is_identifier(spec.name)) fail(ErrorCode::InvalidArgument, "stream name must match [A-Za-z0-9_-]+");
    return std::string(kind_name(spec.kind)) + "-" + spec.name;
}

struct SyncExchange {
    std::int64_t t1 = 0;  // engine send
    std::int64_t t2 = 0;  // device receive
    std::int64_t t3 = 0;  // device reply
    std::int64_t t4 = 0;  // engine receive

    double offset_ms() const { return ((t2 - t1) + (t3 - t4)) / 2.0; }
    double rtt_ms() const { return static_cast<double>((t4 - t1) - (t3 - t2)); }

    friend bool operator==(const SyncExchange&, const SyncExchange&) = default;
};

struct OffsetEstimate {
    double offset_ms = 0.0;
    double rtt_ms = 0.0;
    int rounds = 0;  // exchanges that survived the RTT check
};

inline OffsetEstimate estimate_offset(std::span<const SyncExchange> exchanges) {
    if (exchanges.empty()) fail(ErrorCode::NoExchanges, "no clock exchanges supplied");
    std::optional<OffsetEstimate> best;
    int accepted = 0;
    for (const auto& x : exchanges) {
        const double rtt = x.rtt_ms();
        if (rtt < 0) continue;
        ++accepted;
        if (!best || rtt < best->rtt_ms) best = OffsetEstimate{x.offset_ms(), rtt, 0};
    }
    if (!best) fail(ErrorCode::NegativeRtt, "every exchange had a negative round trip");
    best->rounds = accepted;
    return *best;
}

struct ClockMap {
    std::string stream_id;
    double offset_ms = 0.0;  // device clock minus session clock: session_ts = device_ts - offset
    double rtt_ms = 0.0;
    int rounds = 1;

    friend bool operator==(const ClockMap&, const ClockMap&) = default;
};

struct Sample {
    std::string stream_id;
    std::int64_t device_ts_ms = 0;
    std::vector<double> values;  // one per registered channel, in registration order
};

struct SyncedSample {
    std::string stream_id;
    std::int64_t session_ts_ms = 0;
    std::vector<double> values;
    bool late = false;

    friend bool operator==(const SyncedSample&, const SyncedSample&) = default;
};

/// Millisecond rounding, halves rounded up.
inline std::int64_t round_half_up(double ms) { return static_cast<std::int64_t>(std::floor(ms + 0.5)); }

inline SyncedSample align(const Sample& sample, const ClockMap& map) {
    if (sample.stream_id != map.stream_id) {
        fail(ErrorCode::UnknownStream, "clock map for '" + map.stream_id + "' applied to '" + sample.stream_id + "'");
    }
    return {sample.stream_id, round_half_up(static_cast<double>(sample.device_ts_ms) - map.offset_ms), sample.values, false};
}

struct HubConfig {
    std::int64_t reorder_buffer_ms = 500;
    int sync_rounds = 5;
    std::int64_t resync_interval_ms = 60000;

    friend bool operator==(const HubConfig&, const HubConfig&) = default;
};

struct StreamState {
    std::string id;
    StreamSpec spec;
    bool active = true;
    std::optional<ClockMap> clock;
    std::vector<ClockMap> clock_history;
    std::vector<SyncedSample> record;  // release order; late samples appended when seen
    std::size_t accepted = 0;
    std::size_t late = 0;

    // reorder buffer, keyed by (session_ts, arrival)
    std::multimap<std::int64_t, SyncedSample> pending;
    std::int64_t max_seen_ts = INT64_MIN;
    std::optional<std::int64_t> last_released_ts;
};

class SensorHub {
public:
    explicit SensorHub(HubConfig cfg = {}) : cfg_(cfg) {}

    const HubConfig& config() const noexcept { return cfg_; }

    /// Registers (or re-registers after a drop) a stream; returns its id.
    std::string register_stream(const StreamSpec& spec) {
        if (spec.channels.empty()) fail(ErrorCode::InvalidArgument, "a stream needs at least one channel");
        for (const auto& c : spec.channels) {
            if (c.empty() || c.find(',') != std::string::npos || c.find('"') != std::string::npos ||
                c.find('\n') != std::string::npos) {
                fail(ErrorCode::InvalidArgument, "channel names must be nonempty and free of commas, quotes and newlines");
            }
        }
        if (!(spec.nominal_rate_hz > 0.0)) fail(ErrorCode::InvalidArgument, "nominal rate must be positive");
        const auto id = stream_id_for(spec);
        auto it = streams_.find(id);
        if (it != streams_.end()) {
            auto& s = it->second;
            if (s.active) fail(ErrorCode::DuplicateStream, "stream '" + id + "' is already registered");
            if (s.spec.channels != spec.channels) {
                fail(ErrorCode::InvalidArgument, "stream '" + id + "' re-registered with different channels");
            }
            s.active = true;
            s.clock.reset();
            return id;
        }
        StreamState s;
        s.id = id;
        s.spec = spec;
        streams_.emplace(id, std::move(s));
        order_.push_back(id);
        return id;
    }

    /// Drops a stream; its buffered samples are released and its record kept.
    void disconnect(const std::string& id) {
        auto& s = state(id);
        release(s, INT64_MAX);
        s.active = false;
        s.clock.reset();
    }

    const ClockMap& update_clock(const std::string& id, std::span<const SyncExchange> exchanges) {
        auto& s = state(id);
        const auto est = estimate_offset(exchanges);
        s.clock = ClockMap{id, est.offset_ms, est.rtt_ms, est.rounds};
        s.clock_history.push_back(*s.clock);
        return *s.clock;
    }

    /// Aligns and buffers one sample; returns the aligned sample as recorded.
    SyncedSample ingest(const Sample& sample) {
        auto& s = state(sample.stream_id);
        if (!s.active) fail(ErrorCode::UnknownStream, "stream '" + s.id + "' is disconnected");
        if (!s.clock) fail(ErrorCode::NotSynced, "stream '" + s.id + "' has no clock map yet");
        if (sample.values.size() != s.spec.channels.size()) {
            fail(ErrorCode::InvalidArgument, "expected " + std::to_string(s.spec.channels.size()) + " channel values");
        }
        for (double v : sample.values) {
            if (!std::isfinite(v)) fail(ErrorCode::InvalidArgument, "channel values must be finite");
        }
        auto synced = align(sample, *s.clock);
        ++s.accepted;
        if (s.last_released_ts && synced.session_ts_ms < *s.last_released_ts) {
            synced.late = true;
            ++s.late;
            s.record.push_back(synced);
            return synced;
        }
        s.max_seen_ts = std::max(s.max_seen_ts, synced.session_ts_ms);
        s.pending.emplace(synced.session_ts_ms, synced);
        release(s, s.max_seen_ts - cfg_.reorder_buffer_ms);
        return synced;
    }

    /// Releases every buffered sample of every stream.
    void flush() {
        for (auto& [id, s] : streams_) release(s, INT64_MAX);
    }

    bool has_stream(const std::string& id) const { return streams_.count(id) != 0; }

    const StreamState& stream(const std::string& id) const {
        auto it = streams_.find(id);
        if (it == streams_.end()) fail(ErrorCode::UnknownStream, "no stream '" + id + "'");
        return it->second;
    }

    /// Stream ids in registration order.
    const std::vector<std::string>& stream_ids() const noexcept { return order_; }

private:
    StreamState& state(const std::string& id) {
        auto it = streams_.find(id);
        if (it == streams_.end()) fail(ErrorCode::UnknownStream, "no stream '" + id + "'");
        return it->second;
    }

    static void release(StreamState& s, std::int64_t horizon) {
        while (!s.pending.empty() && s.pending.begin()->first <= horizon) {
            auto node = s.pending.extract(s.pending.begin());
            s.last_released_ts = node.key();
            s.record.push_back(std::move(node.mapped()));
        }
    }

    HubConfig cfg_;
    std::map<std::string, StreamState> streams_;
    std::vector<std::string> order_;
};

} // namespace xroom
