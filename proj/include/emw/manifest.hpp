#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace emw {

// Hex-encoded SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);

// Record of one CLI run: the subcommand, its arguments, the seed in effect
// and a content hash for every artifact the run produced.
struct RunManifest {
    std::string command;
    std::vector<std::string> args;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> artifacts;  // path, sha256

    void add_artifact(const std::string& path);
};

void write_manifest(const std::string& path, const RunManifest& manifest);

}  // namespace emw
