#pragma once
// Locale-independent text output helpers. All numeric output in the
// project funnels through format_double so CSV/JSON artifacts always use
// '.' as the decimal separator and round-trip exactly.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace recaudit::io {

inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
    return std::string(buf, ptr);
}

inline std::string csv_escape(const std::string& s) {
    bool needs_quotes = false;
    for (char c : s)
        if (c == ',' || c == '"' || c == '\n' || c == '\r') { needs_quotes = true; break; }
    if (!needs_quotes) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

// Minimal CSV writer: header row fixed at construction, one row() call
// per record, cells already stringified by the caller.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {
        append_row(header_);
    }

    void row(const std::vector<std::string>& cells) {
        if (cells.size() != header_.size())
            throw std::invalid_argument("CsvWriter: cell count does not match header");
        append_row(cells);
    }

    const std::string& str() const { return out_; }

    void write_file(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open for writing: " + path);
        f << out_;
    }

private:
    void append_row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ += ',';
            out_ += csv_escape(cells[i]);
        }
        out_ += '\n';
    }

    std::vector<std::string> header_;
    std::string out_;
};

// Split one CSV line honoring double-quote escaping.
inline std::vector<std::string> csv_split(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') { cur += '"'; ++i; }
                else in_quotes = false;
            } else cur += c;
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    cells.push_back(cur);
    return cells;
}

// FNV-1a over file bytes; used for input digests in run manifests.
inline std::string fnv1a_digest(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for digest: " + path);
    std::uint64_t h = 1469598103934665603ULL;
    char buf[8192];
    while (f.read(buf, sizeof(buf)) || f.gcount() > 0) {
        for (std::streamsize i = 0; i < f.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

}  // namespace recaudit::io
