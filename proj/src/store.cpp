#include "alive/store.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>

#include <fcntl.h>
#include <unistd.h>

#include <zlib.h>

namespace alive {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kMagicPrefix = "#alive-store v1 ns=";

std::uint32_t crc_of(std::string_view bytes) {
    return static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()),
                static_cast<uInt>(bytes.size())));
}

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t read_u32(const char* p) {
    const auto b = reinterpret_cast<const unsigned char*>(p);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

bool valid_namespace(const std::string& ns) {
    if (ns.empty() || ns.size() > 64) return false;
    for (char c : ns) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
        if (!ok) return false;
    }
    return true;
}

}  // namespace

struct RecordStore::Namespace {
    mutable std::shared_mutex mu;  // guards map and file
    std::map<std::string, json> records;
    int fd = -1;
    bool loaded = false;

    ~Namespace() {
        if (fd >= 0) ::close(fd);
    }
};

RecordStore::RecordStore(fs::path dir, Options options)
    : dir_(std::move(dir)), options_(options) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec)
        throw Error(ErrorCode::storage_failure,
                    "cannot create store directory " + dir_.string() + ": " + ec.message());
}

RecordStore::~RecordStore() = default;

RecordStore::Namespace& RecordStore::ns_slot(const std::string& ns) {
    if (!valid_namespace(ns))
        throw Error(ErrorCode::invalid_argument, "bad namespace name: \"" + ns + "\"");
    {
        std::shared_lock lk(mu_);
        auto it = spaces_.find(ns);
        if (it != spaces_.end()) return *it->second;
    }
    std::unique_lock lk(mu_);
    auto& slot = spaces_[ns];
    if (!slot) slot = std::make_unique<Namespace>();
    if (!slot->loaded) load_namespace(*slot, ns);
    return *slot;
}

void RecordStore::load_namespace(Namespace& slot, const std::string& ns) {
    const fs::path path = dir_ / (ns + ".log");
    const std::string header = std::string(kMagicPrefix) + ns + "\n";

    std::string data;
    if (fs::exists(path)) {
        FILE* f = std::fopen(path.c_str(), "rb");
        if (!f)
            throw Error(ErrorCode::storage_failure, "cannot open " + path.string());
        char buf[1 << 16];
        size_t n;
        while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) data.append(buf, n);
        std::fclose(f);
    }

    size_t pos = 0;
    size_t committed = 0;
    if (!data.empty()) {
        if (data.size() < header.size() || data.compare(0, header.size(), header) != 0)
            throw Error(ErrorCode::corruption,
                        path.string() + ": missing or wrong store header");
        pos = committed = header.size();
    }

    // Replay: torn tail (frame runs past EOF) => truncate; a fully framed
    // record with a bad CRC or unparseable payload => corruption.
    bool torn = false;
    while (pos < data.size()) {
        if (pos + 8 > data.size()) {
            torn = true;
            break;
        }
        const std::uint32_t len = read_u32(data.data() + pos);
        const std::uint32_t crc = read_u32(data.data() + pos + 4);
        if (pos + 8 + len > data.size()) {
            torn = true;
            break;
        }
        const std::string_view payload(data.data() + pos + 8, len);
        if (crc_of(payload) != crc)
            throw Error(ErrorCode::corruption,
                        path.string() + ": checksum mismatch at offset " + std::to_string(pos));
        json rec = json::parse(payload, nullptr, false);
        if (rec.is_discarded() || !rec.is_object() || !rec.contains("k") || !rec.contains("op"))
            throw Error(ErrorCode::corruption,
                        path.string() + ": malformed record at offset " + std::to_string(pos));
        const std::string key = rec["k"].get<std::string>();
        const std::string op = rec["op"].get<std::string>();
        if (op == "put") {
            slot.records[key] = rec.value("v", json());
        } else if (op == "del") {
            slot.records.erase(key);
        } else {
            throw Error(ErrorCode::corruption,
                        path.string() + ": unknown record op \"" + op + "\"");
        }
        pos += 8 + len;
        committed = pos;
    }

    int flags = O_CREAT | O_WRONLY | O_APPEND;
    slot.fd = ::open(path.c_str(), flags, 0644);
    if (slot.fd < 0)
        throw Error(ErrorCode::storage_failure,
                    "cannot open " + path.string() + ": " + std::strerror(errno));
    if (data.empty()) {
        if (::write(slot.fd, header.data(), header.size()) !=
            static_cast<ssize_t>(header.size()))
            throw Error(ErrorCode::storage_failure, "cannot write header to " + path.string());
    } else if (torn) {
        // Drop the partial frame so the next append starts on a clean boundary.
        if (::ftruncate(slot.fd, static_cast<off_t>(committed)) != 0)
            throw Error(ErrorCode::storage_failure, "cannot truncate torn tail of " +
                                                        path.string());
    }
    slot.loaded = true;
}

void RecordStore::append(Namespace& slot, const std::string& ns, const json& rec) {
    const std::string payload = rec.dump();
    std::string frame;
    frame.reserve(payload.size() + 8);
    put_u32(frame, static_cast<std::uint32_t>(payload.size()));
    put_u32(frame, crc_of(payload));
    frame += payload;
    if (::write(slot.fd, frame.data(), frame.size()) != static_cast<ssize_t>(frame.size()))
        throw Error(ErrorCode::storage_failure,
                    "append to namespace \"" + ns + "\" failed: " + std::strerror(errno));
    if (options_.fsync_writes) ::fsync(slot.fd);
}

void RecordStore::put_record(const std::string& ns, const std::string& key, const json& value) {
    Namespace& slot = ns_slot(ns);
    std::unique_lock lk(slot.mu);
    append(slot, ns, json{{"k", key}, {"op", "put"}, {"v", value}});
    slot.records[key] = value;
}

std::optional<json> RecordStore::find_record(const std::string& ns,
                                             const std::string& key) const {
    auto& slot = const_cast<RecordStore*>(this)->ns_slot(ns);
    std::shared_lock lk(slot.mu);
    auto it = slot.records.find(key);
    if (it == slot.records.end()) return std::nullopt;
    return it->second;
}

json RecordStore::get_record(const std::string& ns, const std::string& key) const {
    auto v = find_record(ns, key);
    if (!v)
        throw Error(ErrorCode::not_found_record,
                    "no record \"" + key + "\" in namespace \"" + ns + "\"");
    return *v;
}

bool RecordStore::erase_record(const std::string& ns, const std::string& key) {
    Namespace& slot = ns_slot(ns);
    std::unique_lock lk(slot.mu);
    auto it = slot.records.find(key);
    if (it == slot.records.end()) return false;
    append(slot, ns, json{{"k", key}, {"op", "del"}});
    slot.records.erase(it);
    return true;
}

std::vector<std::pair<std::string, json>> RecordStore::list_records(
    const std::string& ns) const {
    auto& slot = const_cast<RecordStore*>(this)->ns_slot(ns);
    std::shared_lock lk(slot.mu);
    std::vector<std::pair<std::string, json>> out;
    out.reserve(slot.records.size());
    for (const auto& [k, v] : slot.records) out.emplace_back(k, v);
    return out;
}

std::map<std::string, json> RecordStore::snapshot(const std::string& ns) const {
    auto& slot = const_cast<RecordStore*>(this)->ns_slot(ns);
    std::shared_lock lk(slot.mu);
    return slot.records;
}

std::vector<std::string> RecordStore::namespaces() const {
    std::vector<std::string> out;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir_, ec)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (name.size() > 4 && name.ends_with(".log"))
            out.push_back(name.substr(0, name.size() - 4));
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace alive
