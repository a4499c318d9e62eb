#pragma once

// Run manifest: reproducibility envelope written next to every CLI output.
// Input hashes are FNV-1a of the raw file bytes, so rerunning a command on
// identical inputs reports identical hashes; stage times are informational
// and naturally vary.

#include <chrono>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "windsim/common.hpp"

namespace windsim {

inline constexpr const char* kToolVersion = "windsim 0.1.0";

struct RunManifest {
    std::string command;
    std::map<std::string, std::string> input_hashes; // path -> fnv1a64 hex
    nlohmann::json config_echo;
    std::map<std::string, double> stage_seconds;
    std::vector<std::string> outputs;

    void add_input(const std::filesystem::path& path)
    {
        input_hashes[path.string()] = hex_u64(hash_file(path));
    }

    nlohmann::json to_json() const
    {
        nlohmann::json j;
        j["tool_version"] = kToolVersion;
        j["command"] = command;
        j["inputs"] = input_hashes;
        j["config"] = config_echo;
        j["stage_seconds"] = stage_seconds;
        j["outputs"] = outputs;
        return j;
    }

    void write(const std::filesystem::path& path) const
    {
        std::ofstream out(path);
        if (!out)
            throw IoError("cannot write manifest: " + path.string());
        out << to_json().dump(2) << '\n';
    }
};

class StageTimer {
public:
    explicit StageTimer(RunManifest& manifest, std::string stage)
        : manifest_(manifest), stage_(std::move(stage)),
          start_(std::chrono::steady_clock::now())
    {
    }
    ~StageTimer()
    {
        manifest_.stage_seconds[stage_] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }
    StageTimer(const StageTimer&) = delete;
    StageTimer& operator=(const StageTimer&) = delete;

private:
    RunManifest& manifest_;
    std::string stage_;
    std::chrono::steady_clock::time_point start_;
};

} // namespace windsim
