#include "qkdcoex/wire.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <zlib.h>

#include "qkdcoex/grid.hpp"

namespace qkdcoex::wire {

namespace {

constexpr std::string_view kHeader = "SSS-CONFIG";
constexpr std::string_view kVersion = "v1";
constexpr std::array<std::string_view, 6> kFields = {"id", "ts", "in", "out", "wl_nm", "width_ghz"};

bool is_token(std::string_view s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
               c == '-' || c == '_' || c == '.' || c == ':' || c == '/';
    });
}

std::int64_t to_fixed(double value, double scale, std::string_view what) {
    if (!std::isfinite(value)) throw OutOfRangeError(std::string(what) + " is not finite");
    return static_cast<std::int64_t>(std::llround(value * scale));
}

// Integer part and exactly `decimals` fractional digits.
std::string format_fixed(std::int64_t value, int decimals) {
    std::int64_t div = 1;
    for (int i = 0; i < decimals; ++i) div *= 10;
    const bool neg = value < 0;
    const std::uint64_t mag = neg ? static_cast<std::uint64_t>(-value) : static_cast<std::uint64_t>(value);
    std::string frac = std::to_string(mag % static_cast<std::uint64_t>(div));
    frac.insert(0, static_cast<std::size_t>(decimals) - frac.size(), '0');
    return (neg ? "-" : "") + std::to_string(mag / static_cast<std::uint64_t>(div)) + "." + frac;
}

std::int64_t parse_fixed(std::string_view field, std::string_view s, int decimals) {
    const auto dot = s.find('.');
    const auto malformed = [&] {
        return MalformedNumberError("field '" + std::string(field) + "': expected a number with " +
                                    std::to_string(decimals) + " decimals, got '" + std::string(s) +
                                    "'");
    };
    if (dot == std::string_view::npos || dot == 0 ||
        s.size() - dot - 1 != static_cast<std::size_t>(decimals)) {
        throw malformed();
    }
    const std::string_view whole = s.substr(0, dot);
    const std::string_view frac = s.substr(dot + 1);
    auto digits = [](std::string_view d) {
        return !d.empty() && std::all_of(d.begin(), d.end(), [](char c) { return c >= '0' && c <= '9'; });
    };
    if (!digits(whole) || !digits(frac) || (whole.size() > 1 && whole[0] == '0')) throw malformed();
    std::int64_t w = 0, f = 0;
    if (std::from_chars(whole.data(), whole.data() + whole.size(), w).ec != std::errc() ||
        std::from_chars(frac.data(), frac.data() + frac.size(), f).ec != std::errc() ||
        w > 1'000'000'000) {
        throw malformed();
    }
    std::int64_t scale = 1;
    for (int i = 0; i < decimals; ++i) scale *= 10;
    return w * scale + f;
}

template <typename Int>
Int parse_int(std::string_view field, std::string_view s) {
    Int v{};
    const bool leading_zero = s.size() > 1 && (s[0] == '0' || (s[0] == '-' && s[1] == '0'));
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || leading_zero || s[0] == '+' || ec != std::errc() || ptr != s.data() + s.size()) {
        throw MalformedNumberError("field '" + std::string(field) + "': malformed integer '" +
                                   std::string(s) + "'");
    }
    return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace

SssConfigMessage SssConfigMessage::make(std::uint64_t id, std::int64_t timestamp_ms,
                                        std::string in_port, std::string out_port,
                                        double wavelength_nm, double filter_width_ghz) {
    SssConfigMessage m;
    m.id = id;
    m.timestamp_ms = timestamp_ms;
    m.in_port = std::move(in_port);
    m.out_port = std::move(out_port);
    m.wavelength_pm = to_fixed(wavelength_nm, 1000.0, "wavelength");
    m.filter_width_dghz = to_fixed(filter_width_ghz, 10.0, "filter width");
    m.validate();
    return m;
}

void SssConfigMessage::validate() const {
    if (!is_token(in_port) || !is_token(out_port)) {
        throw WireError("port labels must be non-empty tokens of [A-Za-z0-9-_.:/]");
    }
    if (!in_c_band(Nm{wavelength_nm()})) {
        throw OutOfRangeError("wavelength " + format_fixed(wavelength_pm, 3) +
                              " nm is outside the C-band");
    }
    if (filter_width_dghz <= 0) throw OutOfRangeError("filter width must be > 0 GHz");
}

std::string encode(const SssConfigMessage& msg) {
    msg.validate();
    std::string out;
    out.reserve(96);
    out += kHeader;
    out += ' ';
    out += kVersion;
    out += " id=" + std::to_string(msg.id);
    out += " ts=" + std::to_string(msg.timestamp_ms);
    out += " in=" + msg.in_port;
    out += " out=" + msg.out_port;
    out += " wl_nm=" + format_fixed(msg.wavelength_pm, 3);
    out += " width_ghz=" + format_fixed(msg.filter_width_dghz, 1);
    return out;
}

SssConfigMessage decode(std::string_view line) {
    const auto tokens = split(line, ' ');
    if (tokens.size() < 2 || tokens[0] != kHeader) throw WireError("not an SSS-CONFIG message");
    if (tokens[1] != kVersion) throw WireError("unsupported message version '" + std::string(tokens[1]) + "'");

    std::array<std::string_view, kFields.size()> values{};
    std::array<bool, kFields.size()> seen{};
    std::size_t expected = 0;
    for (std::size_t t = 2; t < tokens.size(); ++t) {
        const auto eq = tokens[t].find('=');
        if (eq == std::string_view::npos) throw WireError("malformed token '" + std::string(tokens[t]) + "'");
        const std::string_view key = tokens[t].substr(0, eq);
        const auto it = std::find(kFields.begin(), kFields.end(), key);
        if (it == kFields.end()) throw UnknownFieldError("unknown field '" + std::string(key) + "'");
        const auto idx = static_cast<std::size_t>(it - kFields.begin());
        if (seen[idx]) throw WireError("duplicate field '" + std::string(key) + "'");
        if (idx < expected) throw WireError("field '" + std::string(key) + "' out of canonical order");
        if (idx > expected) {
            throw MissingFieldError("missing field '" + std::string(kFields[expected]) + "'");
        }
        seen[idx] = true;
        values[idx] = tokens[t].substr(eq + 1);
        expected = idx + 1;
    }
    for (std::size_t i = 0; i < kFields.size(); ++i) {
        if (!seen[i]) throw MissingFieldError("missing field '" + std::string(kFields[i]) + "'");
    }

    SssConfigMessage m;
    m.id = parse_int<std::uint64_t>("id", values[0]);
    m.timestamp_ms = parse_int<std::int64_t>("ts", values[1]);
    m.in_port = std::string(values[2]);
    m.out_port = std::string(values[3]);
    m.wavelength_pm = parse_fixed("wl_nm", values[4], 3);
    m.filter_width_dghz = parse_fixed("width_ghz", values[5], 1);
    m.validate();
    return m;
}

std::string_view to_string(RecordKind kind) {
    switch (kind) {
        case RecordKind::Snapshot: return "snapshot";
        case RecordKind::Prediction: return "prediction";
        case RecordKind::Action: return "action";
        case RecordKind::Message: return "message";
    }
    return "?";
}

RecordKind parse_record_kind(std::string_view name) {
    for (RecordKind k : {RecordKind::Snapshot, RecordKind::Prediction, RecordKind::Action,
                         RecordKind::Message}) {
        if (to_string(k) == name) return k;
    }
    throw WireError("unknown record kind '" + std::string(name) + "'");
}

namespace {

std::string checksum(std::string_view body) {
    const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()),
                           static_cast<uInt>(body.size()));
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
    return buf;
}

// Returns false when the line is not a well-formed record.
bool parse_record_line(std::string_view line, Record& out, std::string& why) {
    const auto fields = [&] {
        std::vector<std::string_view> f;
        std::size_t start = 0;
        for (int i = 0; i < 3; ++i) {
            const auto tab = line.find('\t', start);
            if (tab == std::string_view::npos) return f;
            f.push_back(line.substr(start, tab - start));
            start = tab + 1;
        }
        f.push_back(line.substr(start));
        return f;
    }();
    if (fields.size() != 4) {
        why = "expected 4 tab-separated fields";
        return false;
    }
    std::uint64_t seq = 0;
    auto [ptr, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), seq);
    if (ec != std::errc() || ptr != fields[0].data() + fields[0].size()) {
        why = "bad sequence number";
        return false;
    }
    std::string body;
    body.append(fields[0]).append("\t").append(fields[1]).append("\t").append(fields[3]);
    if (checksum(body) != fields[2]) {
        why = "checksum mismatch";
        return false;
    }
    try {
        out.seq = seq;
        out.kind = parse_record_kind(fields[1]);
        out.payload = nlohmann::json::parse(fields[3]);
    } catch (const std::exception& e) {
        why = e.what();
        return false;
    }
    return true;
}

struct Scan {
    ReplayResult result;
    std::uintmax_t valid_bytes = 0;
};

Scan scan(const std::filesystem::path& path) {
    Scan s;
    std::ifstream in(path, std::ios::binary);
    if (!in) return s;
    const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < data.size()) {
        ++line_no;
        const auto nl = data.find('\n', pos);
        const bool last = nl == std::string::npos || nl + 1 == data.size();
        const std::string_view line(data.data() + pos, (nl == std::string::npos ? data.size() : nl) - pos);

        Record rec;
        std::string why;
        const bool ok = nl != std::string::npos && parse_record_line(line, rec, why);
        if (!ok) {
            if (nl == std::string::npos) why = "missing newline";
            if (last) {
                s.result.warnings.push_back("line " + std::to_string(line_no) +
                                            ": incomplete final record dropped (" + why + ")");
                break;
            }
            throw CorruptLogError(path.string() + ": line " + std::to_string(line_no) + ": " + why);
        }
        const std::uint64_t expected = s.result.records.empty() ? 1 : s.result.records.back().seq + 1;
        if (rec.seq != expected) {
            throw CorruptLogError(path.string() + ": line " + std::to_string(line_no) +
                                  ": sequence gap (expected " + std::to_string(expected) + ", got " +
                                  std::to_string(rec.seq) + ")");
        }
        s.result.records.push_back(std::move(rec));
        pos = nl + 1;
        s.valid_bytes = pos;
    }
    return s;
}

}  // namespace

ReplayResult replay(const std::filesystem::path& path) { return scan(path).result; }

RecordLog::RecordLog(std::filesystem::path path) : path_(std::move(path)) {
    Scan s = scan(path_);
    open_warnings_ = std::move(s.result.warnings);
    if (!s.result.records.empty()) next_seq_ = s.result.records.back().seq + 1;
    std::error_code ec;
    if (std::filesystem::exists(path_, ec) && std::filesystem::file_size(path_) != s.valid_bytes) {
        std::filesystem::resize_file(path_, s.valid_bytes);
    }
    out_.open(path_, std::ios::binary | std::ios::app);
    if (!out_) throw DataError("cannot open record log " + path_.string());
}

std::uint64_t RecordLog::append(RecordKind kind, nlohmann::json payload) {
    std::lock_guard lock(mutex_);
    const std::uint64_t seq = next_seq_;
    const std::string text = payload.dump();
    std::string body = std::to_string(seq);
    body.append("\t").append(to_string(kind)).append("\t").append(text);
    std::string line = std::to_string(seq);
    line.append("\t").append(to_string(kind)).append("\t").append(checksum(body));
    line.append("\t").append(text).append("\n");
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    out_.flush();
    if (!out_) throw DataError("write failed: " + path_.string());
    ++next_seq_;
    return seq;
}

std::uint64_t RecordLog::last_seq() const {
    std::lock_guard lock(mutex_);
    return next_seq_ - 1;
}

}  // namespace qkdcoex::wire
