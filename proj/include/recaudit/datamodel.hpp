#pragma once
// Trajectory-log data model: account profiles, exposure/click records,
// issue vocabulary, ingestion and validation, window slicing, and
// issue-vector construction. Everything downstream consumes these types.
//
// Log schema (JSON Lines, one record per line; CSV uses the same column
// names with empty fields for null):
//   account_id  string
//   group       "male" | "female"
//   step        int >= 1
//   kind        "exposure" | "click"
//   video_id    string
//   category    string (platform category, e.g. "News & Politics")
//   is_political bool
//   issue       one of the 21 topic labels, "Other", or null
//   issue/ideology may be present only on political records

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "recaudit/csv.hpp"

namespace recaudit {

// ---------------------------------------------------------------------------
// Vocabularies
// ---------------------------------------------------------------------------

// Canonical topic order. Vector indices, serialized tables, and docs all
// use this exact sequence; do not reorder.
inline constexpr std::size_t kNumIssues = 21;
inline const std::array<std::string, kNumIssues>& issue_names() {
    static const std::array<std::string, kNumIssues> names = {
        "Macroeconomics", "Civil Rights", "Health", "Agriculture", "Labor",
        "Education", "Environment", "Energy", "Immigration", "Transportation",
        "Law and Crime", "Social Welfare", "Housing", "Domestic Commerce",
        "Defense", "Technology", "Foreign Trade", "International Affairs",
        "Government Operations", "Public Lands", "Culture"};
    return names;
}

inline const std::string kIssueOther = "Other";
inline const std::string kNewsPolitics = "News & Politics";

enum class Group : std::uint8_t { Male, Female };
enum class EventKind : std::uint8_t { Exposure, Click };
enum class Ideology : std::uint8_t { Left, Neutral, Right };

// Issue is an index into issue_names(), or kOtherIssue.
using IssueId = std::uint8_t;
inline constexpr IssueId kOtherIssue = static_cast<IssueId>(kNumIssues);

inline std::string group_to_string(Group g) { return g == Group::Male ? "male" : "female"; }
inline std::string kind_to_string(EventKind k) { return k == EventKind::Exposure ? "exposure" : "click"; }
inline std::string ideology_to_string(Ideology i) {
    switch (i) {
        case Ideology::Left: return "left";
        case Ideology::Right: return "right";
        default: return "neutral";
    }
}
inline std::string issue_to_string(IssueId id) {
    return id == kOtherIssue ? kIssueOther : issue_names()[id];
}

inline std::optional<Group> group_from_string(const std::string& s) {
    if (s == "male") return Group::Male;
    if (s == "female") return Group::Female;
    return std::nullopt;
}
inline std::optional<EventKind> kind_from_string(const std::string& s) {
    if (s == "exposure") return EventKind::Exposure;
    if (s == "click") return EventKind::Click;
    return std::nullopt;
}
inline std::optional<Ideology> ideology_from_string(const std::string& s) {
    if (s == "left") return Ideology::Left;
    if (s == "neutral") return Ideology::Neutral;
    if (s == "right") return Ideology::Right;
    return std::nullopt;
}
inline std::optional<IssueId> issue_from_string(const std::string& s) {
    if (s == kIssueOther) return kOtherIssue;
    const auto& names = issue_names();
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == s) return static_cast<IssueId>(i);
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Core types
// ---------------------------------------------------------------------------

struct AccountProfile {
    std::string account_id;
    Group group = Group::Male;

    friend bool operator==(const AccountProfile&, const AccountProfile&) = default;
};

struct ExposureRecord {
    std::string account_id;
    int step = 1;
    EventKind kind = EventKind::Exposure;
    std::string video_id;
    std::string category;
    bool is_political = false;
    std::optional<IssueId> issue;
    std::optional<Ideology> ideology;

    friend bool operator==(const ExposureRecord&, const ExposureRecord&) = default;
};

struct Dataset {
    std::vector<AccountProfile> profiles;
    std::vector<ExposureRecord> records;

    int max_step() const {
        int t = 0;
        for (const auto& r : records) t = std::max(t, r.step);
        return t;
    }

    std::map<std::string, Group> group_map() const {
        std::map<std::string, Group> m;
        for (const auto& p : profiles) m[p.account_id] = p.group;
        return m;
    }
};

// 21-dimensional nonnegative issue distribution; either all-zero (no
// evidence) or L1-normalized.
struct IssueVector {
    std::array<double, kNumIssues> weights{};

    double sum() const {
        double s = 0.0;
        for (double w : weights) s += w;
        return s;
    }
    bool is_zero() const {
        for (double w : weights)
            if (w != 0.0) return false;
        return true;
    }
    double& operator[](std::size_t i) { return weights[i]; }
    double operator[](std::size_t i) const { return weights[i]; }

    friend bool operator==(const IssueVector&, const IssueVector&) = default;
};

struct AnalysisWindow {
    enum class Kind { LastK, FirstK, StepRange };
    Kind kind = Kind::LastK;
    int a = 0;  // k for LastK/FirstK, lower bound for StepRange
    int b = 0;  // upper bound for StepRange

    static AnalysisWindow last(int k) { return {Kind::LastK, k, 0}; }
    static AnalysisWindow first(int k) { return {Kind::FirstK, k, 0}; }
    static AnalysisWindow range(int lo, int hi) { return {Kind::StepRange, lo, hi}; }

    // Inclusive step range [lo, hi]; throws when not resolvable.
    std::pair<int, int> resolve(int t_max) const {
        if (t_max < 1) throw std::invalid_argument("window: t_max must be >= 1");
        int lo = 0, hi = 0;
        switch (kind) {
            case Kind::LastK: lo = t_max - a + 1; hi = t_max; break;
            case Kind::FirstK: lo = 1; hi = a; break;
            case Kind::StepRange: lo = a; hi = b; break;
        }
        if (lo < 1 || hi > t_max || lo > hi)
            throw std::invalid_argument("window out of range for t_max=" + std::to_string(t_max));
        return {lo, hi};
    }

    std::string label() const {
        switch (kind) {
            case Kind::LastK: return "last" + std::to_string(a);
            case Kind::FirstK: return "first" + std::to_string(a);
            default: return std::to_string(a) + "-" + std::to_string(b);
        }
    }

    // Accepts "lastK", "firstK", "A-B", or "all".
    static AnalysisWindow parse(const std::string& text, int t_max) {
        if (text == "all") return first(t_max);
        if (text.rfind("last", 0) == 0) return last(std::stoi(text.substr(4)));
        if (text.rfind("first", 0) == 0) return first(std::stoi(text.substr(5)));
        auto dash = text.find('-');
        if (dash != std::string::npos)
            return range(std::stoi(text.substr(0, dash)), std::stoi(text.substr(dash + 1)));
        throw std::invalid_argument("cannot parse window spec: " + text);
    }
};

enum class LogFormat { JsonLines, Csv };

// Validation failures carry the 1-based line number of the offending row.
class ValidationError : public std::runtime_error {
public:
    ValidationError(std::size_t line, const std::string& reason)
        : std::runtime_error("line " + std::to_string(line) + ": " + reason), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_ = 0;
};

// ---------------------------------------------------------------------------
// Parsing / export
// ---------------------------------------------------------------------------

namespace detail {

inline const std::vector<std::string>& log_columns() {
    static const std::vector<std::string> cols = {
        "account_id", "group", "step",  "kind",  "video_id",
        "category",   "is_political",   "issue", "ideology"};
    return cols;
}

struct RawRecord {
    std::string account_id, group, kind, video_id, category, issue, ideology;
    bool has_issue = false, has_ideology = false;
    long long step = 0;
    bool is_political = false;
};

inline std::pair<AccountProfile, ExposureRecord> validate_raw(const RawRecord& raw, std::size_t line) {
    if (raw.account_id.empty()) throw ValidationError(line, "empty account_id");
    auto grp = group_from_string(raw.group);
    if (!grp) throw ValidationError(line, "unknown group '" + raw.group + "'");
    if (raw.step < 1) throw ValidationError(line, "step must be >= 1, got " + std::to_string(raw.step));
    auto kind = kind_from_string(raw.kind);
    if (!kind) throw ValidationError(line, "unknown kind '" + raw.kind + "'");
    if (raw.video_id.empty()) throw ValidationError(line, "empty video_id");

    ExposureRecord rec;
    rec.account_id = raw.account_id;
    rec.step = static_cast<int>(raw.step);
    rec.kind = *kind;
    rec.video_id = raw.video_id;
    rec.category = raw.category;
    rec.is_political = raw.is_political;
    if (raw.has_issue) {
        if (!raw.is_political) throw ValidationError(line, "issue present on non-political record");
        auto iss = issue_from_string(raw.issue);
        if (!iss) throw ValidationError(line, "'" + raw.issue + "' is not a valid issue");
        rec.issue = iss;
    }
    if (raw.has_ideology) {
        if (!raw.is_political) throw ValidationError(line, "ideology present on non-political record");
        auto ideo = ideology_from_string(raw.ideology);
        if (!ideo) throw ValidationError(line, "'" + raw.ideology + "' is not a valid ideology");
        rec.ideology = ideo;
    }
    return {AccountProfile{raw.account_id, *grp}, rec};
}

inline RawRecord raw_from_json(const nlohmann::json& j, std::size_t line) {
    RawRecord raw;
    try {
        raw.account_id = j.at("account_id").get<std::string>();
        raw.group = j.at("group").get<std::string>();
        raw.step = j.at("step").get<long long>();
        raw.kind = j.at("kind").get<std::string>();
        raw.video_id = j.at("video_id").get<std::string>();
        raw.category = j.at("category").get<std::string>();
        raw.is_political = j.at("is_political").get<bool>();
        if (j.contains("issue") && !j.at("issue").is_null()) {
            raw.issue = j.at("issue").get<std::string>();
            raw.has_issue = true;
        }
        if (j.contains("ideology") && !j.at("ideology").is_null()) {
            raw.ideology = j.at("ideology").get<std::string>();
            raw.has_ideology = true;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(line, std::string("bad record: ") + e.what());
    }
    return raw;
}

}  // namespace detail

// Parse and validate a trajectory log. Profiles are deduplicated; records
// come back sorted by (account_id, step, kind, video_id) so downstream
// output is reproducible regardless of on-disk order.
inline Dataset parse_log(const std::string& path, LogFormat format) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open log file: " + path);

    Dataset ds;
    std::map<std::string, Group> groups_seen;
    std::set<std::tuple<std::string, int, std::string, EventKind>> keys;

    std::string lineText;
    std::size_t lineno = 0;
    while (std::getline(f, lineText)) {
        ++lineno;
        if (!lineText.empty() && lineText.back() == '\r') lineText.pop_back();
        if (lineText.empty()) continue;

        detail::RawRecord raw;
        if (format == LogFormat::JsonLines) {
            nlohmann::json j = nlohmann::json::parse(lineText, nullptr, false);
            if (j.is_discarded()) throw ValidationError(lineno, "malformed JSON");
            raw = detail::raw_from_json(j, lineno);
        } else {
            auto cells = io::csv_split(lineText);
            if (lineno == 1) {
                if (cells != detail::log_columns())
                    throw ValidationError(lineno, "unexpected CSV header");
                continue;
            }
            if (cells.size() != detail::log_columns().size())
                throw ValidationError(lineno, "expected " + std::to_string(detail::log_columns().size()) +
                                                  " fields, got " + std::to_string(cells.size()));
            raw.account_id = cells[0];
            raw.group = cells[1];
            try {
                raw.step = std::stoll(cells[2]);
            } catch (const std::exception&) {
                throw ValidationError(lineno, "bad step '" + cells[2] + "'");
            }
            raw.kind = cells[3];
            raw.video_id = cells[4];
            raw.category = cells[5];
            if (cells[6] == "true") raw.is_political = true;
            else if (cells[6] == "false") raw.is_political = false;
            else throw ValidationError(lineno, "bad is_political '" + cells[6] + "'");
            if (!cells[7].empty()) { raw.issue = cells[7]; raw.has_issue = true; }
            if (!cells[8].empty()) { raw.ideology = cells[8]; raw.has_ideology = true; }
        }

        auto [profile, rec] = detail::validate_raw(raw, lineno);
        auto it = groups_seen.find(profile.account_id);
        if (it == groups_seen.end()) {
            groups_seen.emplace(profile.account_id, profile.group);
        } else if (it->second != profile.group) {
            throw ValidationError(lineno, "account '" + profile.account_id + "' has conflicting groups");
        }
        auto key = std::make_tuple(rec.account_id, rec.step, rec.video_id, rec.kind);
        if (!keys.insert(key).second)
            throw ValidationError(lineno, "duplicate record (account=" + rec.account_id +
                                              ", step=" + std::to_string(rec.step) +
                                              ", video=" + rec.video_id + ", kind=" + raw.kind + ")");
        ds.records.push_back(std::move(rec));
    }
    if (format == LogFormat::Csv && lineno == 0)
        throw std::runtime_error("empty CSV log (missing header): " + path);

    for (const auto& [id, g] : groups_seen) ds.profiles.push_back({id, g});
    std::sort(ds.records.begin(), ds.records.end(), [](const ExposureRecord& x, const ExposureRecord& y) {
        return std::tie(x.account_id, x.step, x.kind, x.video_id) <
               std::tie(y.account_id, y.step, y.kind, y.video_id);
    });
    return ds;
}

// Serialize a dataset in the canonical sorted order. parse_log(write_log(ds))
// reproduces ds field-by-field.
inline void write_log(const Dataset& ds, const std::string& path, LogFormat format) {
    auto groups = ds.group_map();
    std::vector<const ExposureRecord*> sorted;
    sorted.reserve(ds.records.size());
    for (const auto& r : ds.records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](const ExposureRecord* x, const ExposureRecord* y) {
        return std::tie(x->account_id, x->step, x->kind, x->video_id) <
               std::tie(y->account_id, y->step, y->kind, y->video_id);
    });

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);

    auto group_of = [&](const std::string& id) -> Group {
        auto it = groups.find(id);
        if (it == groups.end()) throw std::runtime_error("record for unknown account: " + id);
        return it->second;
    };

    if (format == LogFormat::JsonLines) {
        for (const ExposureRecord* r : sorted) {
            nlohmann::ordered_json j;
            j["account_id"] = r->account_id;
            j["group"] = group_to_string(group_of(r->account_id));
            j["step"] = r->step;
            j["kind"] = kind_to_string(r->kind);
            j["video_id"] = r->video_id;
            j["category"] = r->category;
            j["is_political"] = r->is_political;
            j["issue"] = r->issue ? nlohmann::ordered_json(issue_to_string(*r->issue))
                                  : nlohmann::ordered_json(nullptr);
            j["ideology"] = r->ideology ? nlohmann::ordered_json(ideology_to_string(*r->ideology))
                                        : nlohmann::ordered_json(nullptr);
            f << j.dump() << '\n';
        }
    } else {
        io::CsvWriter w(detail::log_columns());
        for (const ExposureRecord* r : sorted) {
            w.row({r->account_id, group_to_string(group_of(r->account_id)), std::to_string(r->step),
                   kind_to_string(r->kind), r->video_id, r->category,
                   r->is_political ? "true" : "false",
                   r->issue ? issue_to_string(*r->issue) : std::string(),
                   r->ideology ? ideology_to_string(*r->ideology) : std::string()});
        }
        f << w.str();
    }
}

// ---------------------------------------------------------------------------
// Windowing and vector construction
// ---------------------------------------------------------------------------

// Records whose step lies in the resolved window range, input order kept.
inline std::vector<ExposureRecord> slice_window(const std::vector<ExposureRecord>& records,
                                                const AnalysisWindow& window, int t_max) {
    auto [lo, hi] = window.resolve(t_max);
    std::vector<ExposureRecord> out;
    for (const auto& r : records)
        if (r.step >= lo && r.step <= hi) out.push_back(r);
    return out;
}

// Issue distribution over one account's records of the given kind. Counts
// political records carrying one of the 21 core topics; "Other" and
// unlabeled records do not contribute. No qualifying records -> all-zero.
inline IssueVector build_issue_vector(const std::vector<ExposureRecord>& records, EventKind kind_filter) {
    IssueVector v;
    double total = 0.0;
    for (const auto& r : records) {
        if (r.kind != kind_filter || !r.is_political || !r.issue || *r.issue == kOtherIssue) continue;
        v.weights[*r.issue] += 1.0;
        total += 1.0;
    }
    if (total > 0.0)
        for (double& w : v.weights) w /= total;
    return v;
}

// Shares over the three aggregate classes (Interest, News & Politics,
// Others). News & Politics takes precedence when it also appears in the
// interest set.
inline std::array<double, 3> regroup_structural(const std::vector<ExposureRecord>& records,
                                                const std::set<std::string>& interest_categories) {
    if (interest_categories.empty())
        throw std::invalid_argument("regroup_structural: interest_categories must be non-empty");
    if (records.empty())
        throw std::invalid_argument("regroup_structural: no records to classify");
    std::array<double, 3> counts{};
    for (const auto& r : records) {
        if (r.category == kNewsPolitics) counts[1] += 1.0;
        else if (interest_categories.count(r.category)) counts[0] += 1.0;
        else counts[2] += 1.0;
    }
    const double total = counts[0] + counts[1] + counts[2];
    for (double& c : counts) c /= total;
    return counts;
}

// Per-account record grouping, keyed and ordered by account id.
inline std::map<std::string, std::vector<ExposureRecord>> records_by_account(
    const std::vector<ExposureRecord>& records) {
    std::map<std::string, std::vector<ExposureRecord>> out;
    for (const auto& r : records) out[r.account_id].push_back(r);
    return out;
}

}  // namespace recaudit
