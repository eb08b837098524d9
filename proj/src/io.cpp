#include "mfg/io.hpp"

#include "mfg/types.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mfg {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string format_double(double x)
{
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

double parse_double(std::string_view text)
{
    double x = 0.0;
    const auto r = std::from_chars(text.data(), text.data() + text.size(), x);
    if (r.ec != std::errc() || r.ptr != text.data() + text.size())
        throw ConfigError("not a number: '" + std::string(text) + "'");
    return x;
}

std::uint64_t fnv1a(std::string_view data)
{
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(std::uint64_t h)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_csv(const fs::path& file, const CsvTable& table)
{
    std::ofstream out(file, std::ios::binary);
    if (!out) throw Error("cannot write " + file.string());
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < cells.size(); ++c) out << (c ? "," : "") << cells[c];
        out << '\n';
    };
    line(table.header);
    for (const auto& r : table.rows) line(r);
    if (!out) throw Error("write failed: " + file.string());
}

CsvTable read_csv(const fs::path& file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error("cannot read " + file.string());
    CsvTable t;
    std::string text;
    bool first = true;
    while (std::getline(in, text)) {
        std::vector<std::string> cells;
        std::stringstream ss(text);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (first)
            t.header = cells;
        else
            t.rows.push_back(cells);
        first = false;
    }
    return t;
}

namespace {

json to_json(const RunManifest& m)
{
    return {{"hash", m.hash},
            {"command", m.command},
            {"sequence", m.sequence},
            {"seed", m.seed},
            {"solver", {{"J", m.J}, {"P", m.P}, {"M", m.M}, {"tol", m.tol}, {"max_iter", m.max_iter}}},
            {"versions",
             {{"model", kVersion},
              {"convex", kVersion},
              {"paths", kVersion},
              {"solver", kVersion},
              {"wellposed", kVersion},
              {"nashlab", kVersion},
              {"cli", kVersion}}},
            {"wall_seconds", m.wall_seconds},
            {"exit_code", m.exit_code},
            {"files", m.files}};
}

}  // namespace

std::vector<RunManifest> read_manifests(const fs::path& dir)
{
    std::vector<RunManifest> out;
    std::ifstream in(dir / kManifestName);
    if (!in) return out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            RunManifest m;
            m.hash = j.at("hash").get<std::string>();
            m.command = j.at("command").get<std::string>();
            m.sequence = j.at("sequence").get<int>();
            m.seed = j.at("seed").get<std::uint64_t>();
            const json& s = j.at("solver");
            m.J = s.at("J").get<int>();
            m.P = s.at("P").get<int>();
            m.M = s.at("M").get<int>();
            m.tol = s.at("tol").get<double>();
            m.max_iter = s.at("max_iter").get<int>();
            m.wall_seconds = j.at("wall_seconds").get<double>();
            m.exit_code = j.at("exit_code").get<int>();
            m.files = j.at("files").get<std::vector<std::string>>();
            out.push_back(std::move(m));
        } catch (const json::exception& e) {
            throw ConfigError((dir / kManifestName).string() + ": line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

int next_sequence(const fs::path& dir, const std::string& hash)
{
    int seq = 0;
    for (const auto& m : read_manifests(dir))
        if (m.hash == hash) seq = std::max(seq, m.sequence + 1);
    return seq;
}

void append_manifest(const fs::path& dir, const RunManifest& m)
{
    std::ofstream out(dir / kManifestName, std::ios::app | std::ios::binary);
    if (!out) throw Error("cannot append to " + (dir / kManifestName).string());
    out << to_json(m).dump() << '\n';
}

}  // namespace mfg
