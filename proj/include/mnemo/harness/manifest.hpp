#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mnemo/core/binary_io.hpp"
#include "mnemo/core/error.hpp"

#ifndef MNEMO_CODE_VERSION
#define MNEMO_CODE_VERSION "0.1.0"
#endif

namespace mnemo::harness {

using json = nlohmann::ordered_json;

inline constexpr const char* kManifestName = "manifest.json";

struct RunEntry {
    std::string command;
    json config = json::object();  // resolved config snapshot; reusable as --config
    json seeds = json::object();
    std::vector<std::string> files;  // relative to the manifest's directory
    double wall_time = 0.0;
    json metrics = json::object();
};

struct RunManifest {
    std::string code_version = MNEMO_CODE_VERSION;
    std::vector<RunEntry> runs;
};

inline json to_json(const RunManifest& m) {
    json runs = json::array();
    for (const auto& r : m.runs) {
        runs.push_back({{"command", r.command},
                        {"config", r.config},
                        {"seeds", r.seeds},
                        {"files", r.files},
                        {"wall_time_seconds", r.wall_time},
                        {"metrics", r.metrics}});
    }
    return {{"code_version", m.code_version}, {"runs", std::move(runs)}};
}

inline RunManifest manifest_from_json(const json& j, const std::string& source) {
    auto bad = [&](const std::string& msg) { return ParseError(source + ": " + msg); };
    if (!j.is_object() || !j.contains("runs") || !j.at("runs").is_array()) {
        throw bad("manifest needs a 'runs' array");
    }
    RunManifest m;
    if (j.contains("code_version") && j.at("code_version").is_string()) {
        m.code_version = j.at("code_version").get<std::string>();
    }
    for (const auto& r : j.at("runs")) {
        if (!r.is_object() || !r.contains("command") || !r.at("command").is_string()) {
            throw bad("every run needs a 'command' string");
        }
        RunEntry e;
        e.command = r.at("command").get<std::string>();
        e.config = r.value("config", json::object());
        e.seeds = r.value("seeds", json::object());
        e.metrics = r.value("metrics", json::object());
        e.wall_time = r.value("wall_time_seconds", 0.0);
        if (r.contains("files")) {
            if (!r.at("files").is_array()) {
                throw bad("'files' must be an array");
            }
            for (const auto& f : r.at("files")) {
                if (!f.is_string()) {
                    throw bad("file entries must be strings");
                }
                e.files.push_back(f.get<std::string>());
            }
        }
        m.runs.push_back(std::move(e));
    }
    return m;
}

inline RunManifest load_manifest(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw ValidationError("manifest not found: " + path.string());
    }
    const auto bytes = io::read_file(path);
    const json j = json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (j.is_discarded()) {
        throw ParseError("manifest is not valid JSON: " + path.string());
    }
    return manifest_from_json(j, path.string());
}

/// Files produced by one command, held in memory until commit() so that a
/// failing command leaves nothing behind.
class OutputSet {
public:
    explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}

    void add(const std::string& name, std::vector<std::uint8_t> bytes) {
        require(std::none_of(files_.begin(), files_.end(), [&](const auto& f) { return f.first == name; }),
                "output produced twice: " + name);
        require(name != kManifestName, "output name is reserved: " + name);
        files_.emplace_back(name, std::move(bytes));
    }
    void add_text(const std::string& name, const std::string& text) {
        add(name, std::vector<std::uint8_t>(text.begin(), text.end()));
    }
    void add_json(const std::string& name, const json& j) { add_text(name, j.dump(2) + "\n"); }

    [[nodiscard]] const std::filesystem::path& dir() const noexcept { return dir_; }

    /// Writes every file, then appends `run` to <dir>/manifest.json.
    void commit(RunEntry run) {
        std::filesystem::create_directories(dir_);
        const auto manifest_path = dir_ / kManifestName;
        RunManifest manifest = std::filesystem::exists(manifest_path) ? load_manifest(manifest_path) : RunManifest{};
        run.files.clear();
        for (const auto& [name, bytes] : files_) {
            io::write_file_atomic(dir_ / name, bytes);
            run.files.push_back(name);
        }
        manifest.code_version = MNEMO_CODE_VERSION;
        manifest.runs.push_back(std::move(run));
        io::write_text_atomic(manifest_path, to_json(manifest).dump(2) + "\n");
    }

private:
    std::filesystem::path dir_;
    std::vector<std::pair<std::string, std::vector<std::uint8_t>>> files_;
};

}  // namespace mnemo::harness
