#include <sstream>

#include "json.hpp"
#include "stegolock/errors.hpp"
#include "stegolock/lockproto.hpp"

namespace stegolock::lock {

using nlohmann::json;

std::string_view to_string(AuditKind k) {
    switch (k) {
        case AuditKind::UnlockGranted: return "unlock-granted";
        case AuditKind::UnlockDenied: return "unlock-denied";
        case AuditKind::AuthFailure: return "auth-failure";
        case AuditKind::Replay: return "replay";
        case AuditKind::Malformed: return "malformed";
        case AuditKind::Relock: return "relock";
        case AuditKind::NotEnrolled: return "not-enrolled";
    }
    return "unknown";
}

std::optional<AuditKind> parse_audit_kind(std::string_view s) {
    for (auto k : {AuditKind::UnlockGranted, AuditKind::UnlockDenied, AuditKind::AuthFailure, AuditKind::Replay,
                   AuditKind::Malformed, AuditKind::Relock, AuditKind::NotEnrolled})
        if (s == to_string(k)) return k;
    return std::nullopt;
}

std::string to_json_line(const AuditEntry& e) {
    // ordered_json keeps field order stable in the file.
    nlohmann::ordered_json j;
    j["timestamp"] = e.timestamp;
    j["kind"] = std::string(to_string(e.kind));
    j["counter"] = e.counter;
    j["mode"] = std::string(to_string(e.mode));
    j["source"] = e.source;
    return j.dump();
}

AuditEntry audit_entry_from_json(std::string_view line) {
    try {
        const json j = json::parse(line);
        AuditEntry e;
        e.timestamp = j.at("timestamp").get<double>();
        const auto kind = parse_audit_kind(j.at("kind").get<std::string>());
        const auto mode = parse_mode(j.at("mode").get<std::string>());
        if (!kind || !mode) throw InvalidInput("audit entry has unknown kind or mode");
        e.kind = *kind;
        e.mode = *mode;
        e.counter = j.at("counter").get<std::uint64_t>();
        e.source = j.at("source").get<std::string>();
        return e;
    } catch (const json::exception& ex) {
        throw InvalidInput(std::string("bad audit line: ") + ex.what());
    }
}

AuditLog::AuditLog(const std::filesystem::path& sink) {
    sink_.emplace(sink, std::ios::app);
    if (!*sink_) throw IoError("cannot open audit log " + sink.string());
}

void AuditLog::append(AuditEntry e) {
    if (!entries_.empty() && e.timestamp < entries_.back().timestamp)
        throw InvalidInput("audit timestamps must not decrease");
    if (sink_) {
        *sink_ << to_json_line(e) << '\n';
        sink_->flush();
    }
    entries_.push_back(std::move(e));
}

std::size_t AuditLog::count(AuditKind k) const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.kind == k;
    return n;
}

std::string AuditLog::to_jsonl() const {
    std::string out;
    for (const auto& e : entries_) {
        out += to_json_line(e);
        out += '\n';
    }
    return out;
}

std::vector<AuditEntry> AuditLog::read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open audit log " + path.string());
    std::vector<AuditEntry> out;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(audit_entry_from_json(line));
    return out;
}

}  // namespace stegolock::lock
