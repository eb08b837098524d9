#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mfg {

inline constexpr const char* kVersion = "1.0.0";

/// Shortest text that parses back to the same double.
std::string format_double(double x);
double parse_double(std::string_view text);

/// FNV-1a, 64 bit.
std::uint64_t fnv1a(std::string_view data);
std::string hex64(std::uint64_t h);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

void write_csv(const std::filesystem::path& file, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& file);

/// One line of runs.jsonl.
struct RunManifest {
    std::string hash;
    std::string command;
    int sequence = 0;
    std::uint64_t seed = 0;
    int J = 0, P = 0, M = 0;
    double tol = 0.0;
    int max_iter = 0;
    double wall_seconds = 0.0;
    int exit_code = 0;
    std::vector<std::string> files;
};

inline constexpr const char* kManifestName = "runs.jsonl";

/// Next free sequence number for this hash in the directory's manifest.
int next_sequence(const std::filesystem::path& dir, const std::string& hash);

/// Appends one line; existing lines are never rewritten.
void append_manifest(const std::filesystem::path& dir, const RunManifest& m);
std::vector<RunManifest> read_manifests(const std::filesystem::path& dir);

}  // namespace mfg
