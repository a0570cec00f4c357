#pragma once
// Run manifests: every output directory gets a manifest.json recording the
// tool version, subcommand, fully resolved configuration, master seed, and
// content digests of the inputs. Two runs with equal manifests (timestamp
// aside) produce byte-identical outputs.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "recaudit/csv.hpp"

namespace recaudit {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunManifest {
    std::string tool_version = kToolVersion;
    std::string subcommand;
    std::map<std::string, std::string> resolved_config;
    std::uint64_t master_seed = 0;
    std::map<std::string, std::string> input_digests;
    std::string timestamp;  // UTC, ISO-8601

    static std::string now_utc() {
        const auto now = std::chrono::system_clock::now();
        const std::time_t t = std::chrono::system_clock::to_time_t(now);
        char buf[32];
        std::tm tm{};
        gmtime_r(&t, &tm);
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
        return buf;
    }

    void add_input(const std::string& path) { input_digests[path] = io::fnv1a_digest(path); }

    std::string to_json() const {
        nlohmann::ordered_json j;
        j["tool_version"] = tool_version;
        j["subcommand"] = subcommand;
        j["resolved_config"] = resolved_config;
        j["master_seed"] = master_seed;
        j["input_digests"] = input_digests;
        j["timestamp"] = timestamp;
        return j.dump(2) + "\n";
    }

    void write(const std::filesystem::path& out_dir) const {
        std::ofstream f(out_dir / "manifest.json", std::ios::binary);
        if (!f) throw std::runtime_error("cannot write manifest in " + out_dir.string());
        f << to_json();
    }
};

}  // namespace recaudit
