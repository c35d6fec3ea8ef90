/**
 * protocol.hpp: line-delimited JSON wire protocol, version "1"
 *
 * Every message is one JSON object on one line:
 *
 *   {"type": "move", "seq": 7, "payload": {"from": 0, "to": 2}}
 *
 * `seq` is a non-negative integer that must strictly increase per sender.
 * `payload` may be omitted when a message has no body. Engine messages also
 * carry `session_ts_ms` while a session is live. Unknown fields are ignored;
 * unknown types are rejected with an `error` reply naming the offending seq.
 *
 * Client to engine
 *   hello              {role: participant|operator|device, protocol: "1"}
 *   register_stream    {kind, name?, channels?, rate_hz?}
 *   clock_sync_resp    {stream_id, t1, t2, t3}          reply to clock_sync_req
 *   clock_sync         {stream_id, exchanges: [{t1,t2,t3,t4}...]}  scripted exchanges
 *   sample             {stream_id, ts, values: [...]}
 *   session_start      {participant_id, target_emotion, session_id?, context?, config?}
 *   task_state         {}                                 full-state refresh request
 *   move               {from, to}
 *   self_report        {valence, arousal, label, label_text?}
 *   operator_override  {target_emotion?, controller?}     operator role only
 *   session_end        {}                                 abort and export
 *
 * Engine to client
 *   hello, stream_registered, clock_sync_req {stream_id, round, t1},
 *   clock_synced, session_started, task_state, move_result, tick,
 *   report_request, report_ack, override_ack, session_end,
 *   error {code, message, seq}
 */

#pragma once

#include "xroom/error.hpp"
#include "xroom/json_io.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace xroom {

inline constexpr const char* kProtocolVersion = "1";

enum class Role { Unknown, Participant, Operator, Device };

inline const char* role_name(Role r) {
    switch (r) {
    case Role::Participant: return "participant";
    case Role::Operator: return "operator";
    case Role::Device: return "device";
    case Role::Unknown: break;
    }
    return "unknown";
}

inline std::optional<Role> parse_role(std::string_view s) {
    for (auto r : {Role::Participant, Role::Operator, Role::Device}) {
        if (s == role_name(r)) return r;
    }
    return std::nullopt;
}

struct Envelope {
    std::string type;
    std::int64_t seq = 0;
    json payload = json::object();
};

/// Parses one line. On failure the exception is an Error; `seq_out` keeps
/// whatever seq could be recovered so the error reply can name it.
inline Envelope parse_envelope(std::string_view line, std::optional<std::int64_t>& seq_out) {
    seq_out.reset();
    json doc;
    try {
        doc = json::parse(line.begin(), line.end());
    } catch (const json::exception& e) {
        fail(ErrorCode::Malformed, std::string("not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) fail(ErrorCode::Malformed, "message must be a JSON object");
    if (auto it = doc.find("seq"); it != doc.end() && it->is_number_integer() &&
                                   !(it->is_number_unsigned() && it->get<std::uint64_t>() > INT64_MAX)) {
        seq_out = it->get<std::int64_t>();
    }
    const auto type = doc.find("type");
    if (type == doc.end() || !type->is_string()) fail(ErrorCode::Malformed, "missing string field 'type'");
    if (!seq_out) fail(ErrorCode::Malformed, "missing integer field 'seq'");
    if (*seq_out < 0) fail(ErrorCode::Malformed, "seq must be non-negative");
    Envelope env;
    env.type = type->get<std::string>();
    env.seq = *seq_out;
    if (auto p = doc.find("payload"); p != doc.end()) {
        if (!p->is_object()) fail(ErrorCode::Malformed, "payload must be an object");
        env.payload = *p;
    }
    return env;
}

inline std::string make_message(std::string_view type, std::int64_t seq, json payload,
                                std::optional<std::int64_t> session_ts_ms = std::nullopt) {
    json j{{"type", type}, {"seq", seq}};
    if (session_ts_ms) j["session_ts_ms"] = *session_ts_ms;
    j["payload"] = std::move(payload);
    // error text can quote raw input bytes; never let them abort the reply
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

inline json error_payload(std::string_view code, std::string_view message, std::optional<std::int64_t> seq) {
    return json{{"code", code}, {"message", message}, {"seq", seq ? json(*seq) : json(nullptr)}};
}

} // namespace xroom
