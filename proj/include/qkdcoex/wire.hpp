#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "qkdcoex/error.hpp"

namespace qkdcoex::wire {

class WireError : public DataError {
public:
    using DataError::DataError;
};

class MissingFieldError : public WireError {
public:
    using WireError::WireError;
};

class UnknownFieldError : public WireError {
public:
    using WireError::WireError;
};

class OutOfRangeError : public WireError {
public:
    using WireError::WireError;
};

class MalformedNumberError : public WireError {
public:
    using WireError::WireError;
};

// Log damage that cannot be explained by an interrupted final write.
class CorruptLogError : public WireError {
public:
    using WireError::WireError;
};

// Switch-configuration message. Wavelength and width are held in fixed point
// (picometres, tenths of a GHz) so the text encoding is exact.
struct SssConfigMessage {
    std::uint64_t id = 0;
    std::int64_t timestamp_ms = 0;
    std::string in_port;
    std::string out_port;
    std::int64_t wavelength_pm = 0;
    std::int64_t filter_width_dghz = 0;

    static SssConfigMessage make(std::uint64_t id, std::int64_t timestamp_ms, std::string in_port,
                                 std::string out_port, double wavelength_nm,
                                 double filter_width_ghz);

    double wavelength_nm() const { return static_cast<double>(wavelength_pm) / 1000.0; }
    double filter_width_ghz() const { return static_cast<double>(filter_width_dghz) / 10.0; }

    // Throws OutOfRangeError (wavelength outside C-band, width <= 0) or
    // WireError (empty or non-token port labels).
    void validate() const;

    bool operator==(const SssConfigMessage&) const = default;
};

// One line, fixed field order, no trailing newline:
//   SSS-CONFIG v1 id=7 ts=1000 in=A out=4 wl_nm=1554.134 width_ghz=38.0
std::string encode(const SssConfigMessage& msg);
// Accepts exactly the canonical form produced by encode().
SssConfigMessage decode(std::string_view line);

enum class RecordKind { Snapshot, Prediction, Action, Message };

std::string_view to_string(RecordKind kind);
RecordKind parse_record_kind(std::string_view name);

struct Record {
    std::uint64_t seq = 0;
    RecordKind kind = RecordKind::Snapshot;
    nlohmann::json payload;

    bool operator==(const Record&) const = default;
};

struct ReplayResult {
    std::vector<Record> records;
    std::vector<std::string> warnings;
};

// Reads a log written by RecordLog. A missing or empty file yields no records.
// A damaged final line (no newline, bad checksum or unparsable) is dropped
// with a warning; damage anywhere else, or a sequence gap, throws
// CorruptLogError.
ReplayResult replay(const std::filesystem::path& path);

// Append-only record log, one record per line:
//   <seq> TAB <kind> TAB <crc32 hex> TAB <payload json>
// The checksum covers "<seq> TAB <kind> TAB <payload json>".
class RecordLog {
public:
    // Opens or creates the log. An interrupted final line left by an earlier
    // writer is cut off so new records start on a clean line.
    explicit RecordLog(std::filesystem::path path);

    // Thread-safe; returns the assigned sequence number (starting at 1).
    std::uint64_t append(RecordKind kind, nlohmann::json payload);

    const std::filesystem::path& path() const { return path_; }
    std::uint64_t last_seq() const;
    const std::vector<std::string>& open_warnings() const { return open_warnings_; }

private:
    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::ofstream out_;
    std::uint64_t next_seq_ = 1;
    std::vector<std::string> open_warnings_;
};

}  // namespace qkdcoex::wire
