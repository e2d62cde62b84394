#include "radisynth/workspace.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "radisynth/errors.hpp"

namespace fs = std::filesystem;

namespace radisynth {

using nlohmann::json;

std::uint64_t hash_bytes(const void* data, std::size_t n, std::uint64_t seed) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot open for hashing: " + path);
    char buf[1 << 16];
    std::uint64_t h = 0xcbf29ce484222325ULL;
    while (in) {
        in.read(buf, sizeof(buf));
        h = hash_bytes(buf, static_cast<std::size_t>(in.gcount()), h);
    }
    return h;
}

std::string utc_timestamp() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace {

json entry_to_json(const ManifestEntry& e) {
    json j;
    j["id"] = e.id;
    j["kind"] = e.kind;
    j["paths"] = e.paths;
    j["parents"] = e.parents;
    j["config"] = json::parse(e.config_json);
    j["config_hash"] = e.config_hash;
    j["file_hashes"] = e.file_hashes;
    j["created"] = e.created;
    return j;
}

ManifestEntry entry_from_json(const json& j) {
    ManifestEntry e;
    e.id = j.at("id");
    e.kind = j.at("kind");
    e.paths = j.at("paths").get<std::vector<std::string>>();
    e.parents = j.at("parents").get<std::vector<std::string>>();
    e.config_json = j.at("config").dump();
    e.config_hash = j.at("config_hash");
    e.file_hashes = j.at("file_hashes").get<std::vector<std::uint64_t>>();
    e.created = j.at("created");
    return e;
}

} // namespace

Workspace Workspace::open(const std::string& root) {
    Workspace ws;
    ws.root_ = root;
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw ValidationError("cannot create workspace root: " + root);
    ws.load();
    return ws;
}

std::string Workspace::abs_path(const std::string& rel) const {
    return (fs::path(root_) / rel).string();
}

void Workspace::load() {
    entries_.clear();
    std::string path = abs_path("manifest.json");
    std::ifstream in(path);
    if (!in) return; // fresh workspace
    json j;
    try {
        in >> j;
        if (j.at("schema_version") != 1)
            throw ParseError("unsupported manifest schema version");
        for (const auto& je : j.at("entries")) entries_.push_back(entry_from_json(je));
    } catch (const json::exception& e) {
        throw ParseError(std::string("manifest.json: ") + e.what());
    }
}

void Workspace::commit() const {
    json j;
    j["schema_version"] = 1;
    j["entries"] = json::array();
    for (const auto& e : entries_) j["entries"].push_back(entry_to_json(e));
    std::string tmp = abs_path("manifest.json.tmp");
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << j.dump(2) << '\n';
        if (!out) throw std::runtime_error("cannot write manifest: " + tmp);
    }
    fs::rename(tmp, abs_path("manifest.json"));
}

const ManifestEntry* Workspace::find(const std::string& id) const {
    for (const auto& e : entries_)
        if (e.id == id) return &e;
    return nullptr;
}

const ManifestEntry& Workspace::get(const std::string& id, const std::string& kind) const {
    const ManifestEntry* e = find(id);
    if (!e) throw NotFoundError("no manifest entry with id '" + id + "'");
    if (!kind.empty() && e->kind != kind)
        throw ValidationError("entry '" + id + "' has kind '" + e->kind + "', expected '" +
                              kind + "'");
    return *e;
}

const ManifestEntry* Workspace::find_by_config(const std::string& kind,
                                               std::uint64_t config_hash) const {
    for (const auto& e : entries_)
        if (e.kind == kind && e.config_hash == config_hash) return &e;
    return nullptr;
}

std::string Workspace::entry_dir(const std::string& id) const {
    std::string dir = abs_path(id);
    fs::create_directories(dir);
    return dir;
}

void Workspace::add_entry(ManifestEntry entry) {
    entry.file_hashes.clear();
    for (const auto& rel : entry.paths) entry.file_hashes.push_back(hash_file(abs_path(rel)));
    if (entry.created.empty()) entry.created = utc_timestamp();
    for (auto& e : entries_)
        if (e.id == entry.id) {
            e = std::move(entry);
            commit();
            return;
        }
    entries_.push_back(std::move(entry));
    commit();
}

std::vector<VerifyProblem> Workspace::verify() const {
    std::vector<VerifyProblem> problems;
    for (const auto& e : entries_) {
        for (std::size_t i = 0; i < e.paths.size(); ++i) {
            std::string p = abs_path(e.paths[i]);
            if (!fs::exists(p)) {
                problems.push_back({e.id, "missing file: " + e.paths[i]});
                continue;
            }
            if (i < e.file_hashes.size() && hash_file(p) != e.file_hashes[i])
                problems.push_back({e.id, "hash mismatch: " + e.paths[i]});
        }
        for (const auto& parent : e.parents)
            if (!find(parent)) problems.push_back({e.id, "missing parent entry: " + parent});
    }
    // provenance completeness: every report chains back to at least one spec
    for (const auto& e : entries_) {
        if (e.kind != "report") continue;
        bool found_spec = false;
        std::vector<std::string> stack = e.parents;
        std::vector<std::string> seen;
        while (!stack.empty() && !found_spec) {
            std::string id = stack.back();
            stack.pop_back();
            if (std::find(seen.begin(), seen.end(), id) != seen.end()) continue;
            seen.push_back(id);
            const ManifestEntry* pe = find(id);
            if (!pe) continue; // already reported above
            if (pe->kind == "spec") found_spec = true;
            for (const auto& parent : pe->parents) stack.push_back(parent);
        }
        if (!found_spec)
            problems.push_back({e.id, "provenance chain does not reach a specimen spec"});
    }
    return problems;
}

} // namespace radisynth
