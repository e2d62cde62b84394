#pragma once
#include <cstdint>
#include <string>
#include <vector>

namespace radisynth {

// One catalog record. `paths` are workspace-relative; `parents` are entry ids
// this artifact was derived from. config_json is the full parameter record
// (RunConfig) of the command that produced it.
struct ManifestEntry {
    std::string id;
    std::string kind; // spec | image-set | sinogram | volume | model | feature-map | report | segments | run
    std::vector<std::string> paths;
    std::vector<std::string> parents;
    std::string config_json = "{}";
    std::uint64_t config_hash = 0;
    std::vector<std::uint64_t> file_hashes; // parallel to paths
    std::string created; // ISO 8601 UTC
};

struct VerifyProblem {
    std::string entry_id;
    std::string message;
};

// Directory-tree workspace with a single JSON manifest. Artifact files are
// written first; the manifest is then rewritten atomically (tmp + rename), so
// a crash at any point never leaves the manifest referencing a missing file.
class Workspace {
public:
    static Workspace open(const std::string& root); // creates if missing

    const std::string& root() const { return root_; }
    std::string abs_path(const std::string& rel) const;

    const std::vector<ManifestEntry>& entries() const { return entries_; }
    const ManifestEntry* find(const std::string& id) const;
    // throws NotFoundError with the id and expected kind
    const ManifestEntry& get(const std::string& id, const std::string& kind) const;
    // first entry of this kind with the given config hash (caching hook)
    const ManifestEntry* find_by_config(const std::string& kind,
                                        std::uint64_t config_hash) const;

    // Registers files already written under root. Fills file hashes and the
    // timestamp, then commits the manifest. Replaces an existing entry with
    // the same id.
    void add_entry(ManifestEntry entry);

    // creates the directory root/<id>/ and returns its absolute path
    std::string entry_dir(const std::string& id) const;

    std::vector<VerifyProblem> verify() const;

private:
    std::string root_;
    std::vector<ManifestEntry> entries_;

    void load();
    void commit() const;
};

std::uint64_t hash_bytes(const void* data, std::size_t n, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t hash_file(const std::string& path);
std::string utc_timestamp();

} // namespace radisynth
