#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "alive/core.hpp"

namespace alive {

/// Durable key/value store: one append-only log file per namespace under a
/// common directory, with per-record CRC framing. The full layout and
/// crash-recovery rules are documented in STORAGE.md.
///
/// Recovery: a record whose frame runs past end-of-file (a torn tail from a
/// crash mid-append) is discarded and the file truncated; a fully framed
/// record whose checksum fails is reported as corruption, never skipped.
class RecordStore {
public:
    struct Options {
        bool fsync_writes = false;  // fsync after every append (slow, safest)
    };

    explicit RecordStore(std::filesystem::path dir, Options options);
    explicit RecordStore(std::filesystem::path dir)
        : RecordStore(std::move(dir), Options{}) {}
    ~RecordStore();

    RecordStore(const RecordStore&) = delete;
    RecordStore& operator=(const RecordStore&) = delete;

    const std::filesystem::path& dir() const { return dir_; }

    /// Inserts or replaces. Durable once the call returns.
    void put_record(const std::string& ns, const std::string& key, const json& value);
    /// Throws ErrorCode::not_found_record when absent.
    json get_record(const std::string& ns, const std::string& key) const;
    std::optional<json> find_record(const std::string& ns, const std::string& key) const;
    bool erase_record(const std::string& ns, const std::string& key);
    /// Key-ordered view of a whole namespace.
    std::vector<std::pair<std::string, json>> list_records(const std::string& ns) const;
    /// Point-in-time copy for consistent multi-record reads.
    std::map<std::string, json> snapshot(const std::string& ns) const;
    std::vector<std::string> namespaces() const;

private:
    struct Namespace;
    Namespace& ns_slot(const std::string& ns);
    void load_namespace(Namespace& slot, const std::string& ns);
    void append(Namespace& slot, const std::string& ns, const json& rec);

    std::filesystem::path dir_;
    Options options_;
    mutable std::shared_mutex mu_;  // guards the namespace table
    std::map<std::string, std::unique_ptr<Namespace>> spaces_;
};

}  // namespace alive
