#pragma once

#include <openssl/evp.h>

#include <charconv>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "alqed/errors.hpp"

namespace alqed {

using Json = nlohmann::ordered_json;

inline std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1)
        throw Error("sha256: digest computation failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * length);
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path.string() + "'");
    std::ostringstream os;
    os << in.rdbuf();
    if (in.bad()) throw IoError("read error on '" + path.string() + "'");
    return os.str();
}

inline Json read_json_file(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    try {
        return Json::parse(text);
    } catch (const Json::exception& e) {
        throw IoError("corrupt JSON in '" + path.string() + "': " + e.what());
    }
}

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buffer[32];
    std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buffer;
}

struct ManifestEntry {
    std::string path;  // relative to the run directory
    std::string sha256;
    std::uintmax_t bytes = 0;
};

/// Provenance record of one command run. Timestamps live only here and the
/// manifest file itself is never checksummed.
struct RunManifest {
    std::string command;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string toolkit_version;
    std::string started_utc;
    std::string finished_utc;
    bool complete = false;
    std::map<std::string, ManifestEntry> files;

    Json to_json(int schema_version) const {
        Json j;
        j["schema_version"] = schema_version;
        j["command"] = command;
        j["config_hash"] = config_hash;
        j["seed"] = seed;
        j["toolkit_version"] = toolkit_version;
        j["started_utc"] = started_utc;
        j["finished_utc"] = finished_utc;
        j["complete"] = complete;
        Json list = Json::array();
        for (const auto& [path, e] : files) list.push_back({{"path", e.path}, {"sha256", e.sha256}, {"bytes", e.bytes}});
        j["files"] = std::move(list);
        return j;
    }

    static RunManifest from_json(const Json& j, const std::string& origin) {
        try {
            RunManifest m;
            m.command = j.at("command").get<std::string>();
            m.config_hash = j.at("config_hash").get<std::string>();
            m.seed = j.at("seed").get<std::uint64_t>();
            m.toolkit_version = j.at("toolkit_version").get<std::string>();
            m.started_utc = j.value("started_utc", "");
            m.finished_utc = j.value("finished_utc", "");
            m.complete = j.at("complete").get<bool>();
            for (const auto& f : j.at("files")) {
                ManifestEntry e{f.at("path").get<std::string>(), f.at("sha256").get<std::string>(),
                                f.at("bytes").get<std::uintmax_t>()};
                m.files[e.path] = e;
            }
            return m;
        } catch (const Json::exception& e) {
            throw IoError("malformed manifest '" + origin + "': " + e.what());
        }
    }
};

/// Output directory of one command. Every payload goes through write(),
/// which records its checksum; the manifest is rewritten after each file so
/// an interrupted run can be resumed.
class RunDirectory {
public:
    RunDirectory(std::filesystem::path root, RunManifest manifest, int schema_version)
        : root_(std::move(root)), manifest_(std::move(manifest)), schema_version_(schema_version) {
        std::error_code ec;
        std::filesystem::create_directories(root_, ec);
        if (ec) throw IoError("cannot create output directory '" + root_.string() + "': " + ec.message());
        manifest_.started_utc = utc_timestamp();
    }

    const std::filesystem::path& root() const { return root_; }
    const RunManifest& manifest() const { return manifest_; }

    /// Previously completed files whose content still matches, reused on resume.
    void adopt_previous(const RunManifest& previous) {
        if (previous.config_hash != manifest_.config_hash || previous.seed != manifest_.seed) return;
        std::lock_guard lock(mutex_);
        for (const auto& [path, entry] : previous.files) reusable_[path] = entry;
    }

    bool reusable(const std::string& relative) const {
        std::lock_guard lock(mutex_);
        const auto it = reusable_.find(relative);
        if (it == reusable_.end()) return false;
        std::error_code ec;
        const auto full = root_ / relative;
        if (!std::filesystem::exists(full, ec)) return false;
        try {
            return sha256_hex(read_file(full)) == it->second.sha256;
        } catch (const IoError&) {
            return false;
        }
    }

    /// Records a reused file without rewriting it.
    void keep(const std::string& relative) {
        std::lock_guard lock(mutex_);
        manifest_.files[relative] = reusable_.at(relative);
        flush_locked();
    }

    void write(const std::string& relative, const std::string& content) {
        const auto full = root_ / relative;
        std::error_code ec;
        std::filesystem::create_directories(full.parent_path(), ec);
        if (ec) throw IoError("cannot create directory '" + full.parent_path().string() + "': " + ec.message());
        const auto temporary = full.string() + ".partial";
        {
            std::ofstream out(temporary, std::ios::binary | std::ios::trunc);
            if (!out) throw IoError("cannot write '" + full.string() + "'");
            out << content;
            out.flush();
            if (!out) throw IoError("write error on '" + full.string() + "'");
        }
        std::filesystem::rename(temporary, full, ec);
        if (ec) throw IoError("cannot finalize '" + full.string() + "': " + ec.message());
        std::lock_guard lock(mutex_);
        manifest_.files[relative] = {relative, sha256_hex(content), content.size()};
        flush_locked();
    }

    void write_json(const std::string& relative, Json j) { write(relative, j.dump(2) + "\n"); }

    void finish() {
        std::lock_guard lock(mutex_);
        manifest_.complete = true;
        manifest_.finished_utc = utc_timestamp();
        flush_locked();
    }

private:
    void flush_locked() {
        const auto path = root_ / "manifest.json";
        const auto temporary = path.string() + ".partial";
        {
            std::ofstream out(temporary, std::ios::binary | std::ios::trunc);
            if (!out) throw IoError("cannot write '" + path.string() + "'");
            out << manifest_.to_json(schema_version_).dump(2) << "\n";
            if (!out) throw IoError("write error on '" + path.string() + "'");
        }
        std::error_code ec;
        std::filesystem::rename(temporary, path, ec);
        if (ec) throw IoError("cannot finalize '" + path.string() + "': " + ec.message());
    }

    std::filesystem::path root_;
    RunManifest manifest_;
    int schema_version_;
    std::map<std::string, ManifestEntry> reusable_;
    mutable std::mutex mutex_;
};

/// Checks every manifest entry against the file on disk; returns the paths
/// that are missing or differ.
inline std::vector<std::string> verify_manifest(const std::filesystem::path& directory) {
    const auto manifest = RunManifest::from_json(read_json_file(directory / "manifest.json"),
                                                 (directory / "manifest.json").string());
    std::vector<std::string> bad;
    for (const auto& [path, entry] : manifest.files) {
        std::error_code ec;
        if (!std::filesystem::exists(directory / path, ec) || sha256_hex(read_file(directory / path)) != entry.sha256)
            bad.push_back(path);
    }
    return bad;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name, const std::string& origin) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw IoError("'" + origin + "': missing column '" + name + "'");
    }
};

/// Numeric CSV with one header line; lines starting with '#' are skipped.
inline CsvTable read_numeric_csv(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    std::istringstream in(text);
    CsvTable table;
    std::string line;
    std::size_t line_number = 0;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::string cell;
        std::istringstream ss(s);
        while (std::getline(ss, cell, ',')) out.push_back(cell);
        if (!s.empty() && s.back() == ',') out.emplace_back();
        return out;
    };
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (table.header.empty()) {
            table.header = split(line);
            continue;
        }
        const auto cells = split(line);
        if (cells.size() != table.header.size())
            throw IoError("corrupt CSV '" + path.string() + "' line " + std::to_string(line_number) + ": expected " +
                          std::to_string(table.header.size()) + " fields, found " + std::to_string(cells.size()));
        std::vector<double> row(cells.size());
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const auto& c = cells[i];
            auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), row[i]);
            if (ec != std::errc{} || ptr != c.data() + c.size() || c.empty())
                throw IoError("corrupt CSV '" + path.string() + "' line " + std::to_string(line_number) +
                              ": non-numeric field '" + c + "'");
        }
        table.rows.push_back(std::move(row));
    }
    if (table.header.empty()) throw IoError("corrupt CSV '" + path.string() + "': no header line");
    return table;
}

}  // namespace alqed
