/**
 * error.hpp: error type shared by every xroom module
 *
 * All recoverable failures (rejected participant actions, bad input,
 * wrong session state) are thrown as xroom::Error carrying a stable code.
 * The gateway maps codes onto the `error` wire message.
 */

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xroom {

enum class ErrorCode {
    InvalidState,
    InvalidArgument,
    IllegalMove,
    BadMove,
    DiskCountMismatch,
    BoundExceeded,
    Unattainable,
    InconsistentOutcome,
    InvalidConfig,
    NoExchanges,
    NegativeRtt,
    NotSynced,
    DuplicateStream,
    UnknownStream,
    InsufficientData,
    InsufficientBeats,
    EmptyWindow,
    WrongState,
    StaleTimestamp,
    InvalidScale,
    IoFailure,
    UnfinishedSession,
    SchemaViolation,
    Malformed,
    UnknownType,
    OutOfOrder,
    UnsupportedProtocol,
    NoSession,
    Forbidden,
    BindFailure,
};

inline const char* error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidState: return "invalid_state";
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::IllegalMove: return "illegal_move";
    case ErrorCode::BadMove: return "bad_move";
    case ErrorCode::DiskCountMismatch: return "disk_count_mismatch";
    case ErrorCode::BoundExceeded: return "bound_exceeded";
    case ErrorCode::Unattainable: return "unattainable";
    case ErrorCode::InconsistentOutcome: return "inconsistent_outcome";
    case ErrorCode::InvalidConfig: return "invalid_config";
    case ErrorCode::NoExchanges: return "no_exchanges";
    case ErrorCode::NegativeRtt: return "negative_rtt";
    case ErrorCode::NotSynced: return "not_synced";
    case ErrorCode::DuplicateStream: return "duplicate_stream";
    case ErrorCode::UnknownStream: return "unknown_stream";
    case ErrorCode::InsufficientData: return "insufficient_data";
    case ErrorCode::InsufficientBeats: return "insufficient_beats";
    case ErrorCode::EmptyWindow: return "empty_window";
    case ErrorCode::WrongState: return "wrong_state";
    case ErrorCode::StaleTimestamp: return "stale_timestamp";
    case ErrorCode::InvalidScale: return "invalid_scale";
    case ErrorCode::IoFailure: return "io_failure";
    case ErrorCode::UnfinishedSession: return "unfinished_session";
    case ErrorCode::SchemaViolation: return "schema_violation";
    case ErrorCode::Malformed: return "malformed";
    case ErrorCode::UnknownType: return "unknown_type";
    case ErrorCode::OutOfOrder: return "out_of_order";
    case ErrorCode::UnsupportedProtocol: return "unsupported_protocol";
    case ErrorCode::NoSession: return "no_session";
    case ErrorCode::Forbidden: return "forbidden";
    case ErrorCode::BindFailure: return "bind_failure";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace xroom
