#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "fiberspec/spectral.hpp"
#include "fiberspec/util.hpp"

namespace fiberspec {

namespace detail {

inline void put_bytes(std::string& buf, const void* p, std::size_t n) {
    buf.append(static_cast<const char*>(p), n);
}

template <typename T>
void put_pod(std::string& buf, const T& v) {
    put_bytes(buf, &v, sizeof(T));
}

template <typename T>
bool get_pod(const std::string& buf, std::size_t& off, T& v) {
    if (off + sizeof(T) > buf.size()) return false;
    std::memcpy(&v, buf.data() + off, sizeof(T));
    off += sizeof(T);
    return true;
}

}  // namespace detail

inline std::string serialize_record(const GroundStateRecord& rec) {
    std::string buf;
    const std::uint32_t magic = 0x46534752;  // "FSGR"
    const std::uint32_t version = 1;
    detail::put_pod(buf, magic);
    detail::put_pod(buf, version);
    for (int i = 0; i < 3; ++i) detail::put_pod(buf, rec.xi[i]);
    detail::put_pod(buf, rec.energy);
    detail::put_pod(buf, rec.gap);
    detail::put_pod(buf, static_cast<std::int32_t>(rec.solver.iterations));
    detail::put_pod(buf, rec.solver.residual);
    detail::put_pod(buf, static_cast<std::uint32_t>(rec.solver.method.size()));
    detail::put_bytes(buf, rec.solver.method.data(), rec.solver.method.size());
    detail::put_pod(buf, static_cast<std::int64_t>(rec.psi.size()));
    detail::put_bytes(buf, rec.psi.data(), sizeof(cplx) * static_cast<std::size_t>(rec.psi.size()));
    detail::put_pod(buf, static_cast<std::uint32_t>(rec.cluster.size()));
    for (const Vec& u : rec.cluster) {
        detail::put_bytes(buf, u.data(), sizeof(cplx) * static_cast<std::size_t>(u.size()));
    }
    return buf;
}

inline std::optional<GroundStateRecord> deserialize_record(const std::string& buf) {
    std::size_t off = 0;
    std::uint32_t magic = 0, version = 0;
    if (!detail::get_pod(buf, off, magic) || magic != 0x46534752) return std::nullopt;
    if (!detail::get_pod(buf, off, version) || version != 1) return std::nullopt;
    GroundStateRecord rec;
    for (int i = 0; i < 3; ++i) {
        if (!detail::get_pod(buf, off, rec.xi[i])) return std::nullopt;
    }
    std::int32_t iters = 0;
    std::uint32_t method_len = 0;
    if (!detail::get_pod(buf, off, rec.energy)) return std::nullopt;
    if (!detail::get_pod(buf, off, rec.gap)) return std::nullopt;
    if (!detail::get_pod(buf, off, iters)) return std::nullopt;
    if (!detail::get_pod(buf, off, rec.solver.residual)) return std::nullopt;
    if (!detail::get_pod(buf, off, method_len)) return std::nullopt;
    if (off + method_len > buf.size()) return std::nullopt;
    rec.solver.method.assign(buf.data() + off, method_len);
    off += method_len;
    rec.solver.iterations = iters;
    std::int64_t dim = 0;
    if (!detail::get_pod(buf, off, dim) || dim < 0) return std::nullopt;
    const std::size_t vec_bytes = sizeof(cplx) * static_cast<std::size_t>(dim);
    if (off + vec_bytes > buf.size()) return std::nullopt;
    rec.psi.resize(dim);
    std::memcpy(rec.psi.data(), buf.data() + off, vec_bytes);
    off += vec_bytes;
    std::uint32_t cluster_count = 0;
    if (!detail::get_pod(buf, off, cluster_count)) return std::nullopt;
    for (std::uint32_t c = 0; c < cluster_count; ++c) {
        if (off + vec_bytes > buf.size()) return std::nullopt;
        Vec u(dim);
        std::memcpy(u.data(), buf.data() + off, vec_bytes);
        off += vec_bytes;
        rec.cluster.push_back(std::move(u));
    }
    return off == buf.size() ? std::optional<GroundStateRecord>(std::move(rec)) : std::nullopt;
}

// Directory cache keyed by the canonical config hash. Entries are
// checksummed ground-state payloads; corrupted entries are dropped and
// recomputed, never silently reused. Size-capped with least-recently-used
// eviction (a persisted logical clock orders accesses, so eviction does not
// depend on wall time).
class ResultCache {
public:
    ResultCache(std::filesystem::path root, const std::string& config_hash,
                std::uint64_t cap_bytes = 2ULL << 30)
        : dir_(std::move(root)), cap_bytes_(cap_bytes) {
        dir_ /= config_hash;
        std::filesystem::create_directories(dir_);
        manifest_path_ = dir_ / "manifest.json";
        load_manifest(config_hash);
    }

    // Resolves the cache root: FIBERSPEC_CACHE_DIR overrides the default
    // location under the output directory.
    static std::filesystem::path resolve_root(const std::string& output_directory) {
        if (const char* env = std::getenv("FIBERSPEC_CACHE_DIR"); env != nullptr && *env) {
            return std::filesystem::path(env);
        }
        return std::filesystem::path(output_directory) / "cache";
    }

    std::optional<GroundStateRecord> load(const std::string& key) {
        const std::string file_key = entry_file(key);
        if (!manifest_["entries"].contains(file_key)) return std::nullopt;
        auto& entry = manifest_["entries"][file_key];
        const std::filesystem::path path = dir_ / file_key;
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            drop(file_key);
            return std::nullopt;
        }
        std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        const std::uint64_t checksum = fnv1a64(buf);
        if (buf.size() != entry["bytes"].get<std::uint64_t>() ||
            hex16(checksum) != entry["checksum"].get<std::string>()) {
            drop(file_key);
            return std::nullopt;
        }
        auto rec = deserialize_record(buf);
        if (!rec) {
            drop(file_key);
            return std::nullopt;
        }
        entry["last_access"] = next_tick();
        save_manifest();
        ++hits_;
        return rec;
    }

    void store(const std::string& key, const GroundStateRecord& rec) {
        const std::string file_key = entry_file(key);
        const std::string buf = serialize_record(rec);
        const std::filesystem::path path = dir_ / file_key;
        const std::filesystem::path tmp = dir_ / (file_key + ".tmp");
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        }
        std::filesystem::rename(tmp, path);
        const std::uint64_t tick = next_tick();
        manifest_["entries"][file_key] = {{"bytes", buf.size()},
                                          {"checksum", hex16(fnv1a64(buf))},
                                          {"created", tick},
                                          {"last_access", tick}};
        evict_to_cap(file_key);
        save_manifest();
    }

    std::uint64_t hits() const { return hits_; }
    const std::filesystem::path& directory() const { return dir_; }

private:
    static std::string entry_file(const std::string& key) {
        return hex16(fnv1a64(key)) + ".bin";
    }

    std::uint64_t next_tick() {
        const std::uint64_t t = manifest_["clock"].get<std::uint64_t>() + 1;
        manifest_["clock"] = t;
        return t;
    }

    void drop(const std::string& file_key) {
        std::error_code ec;
        std::filesystem::remove(dir_ / file_key, ec);
        manifest_["entries"].erase(file_key);
        save_manifest();
    }

    void evict_to_cap(const std::string& keep) {
        while (true) {
            std::uint64_t total = 0;
            std::string oldest;
            std::uint64_t oldest_tick = ~0ULL;
            for (auto& [file_key, entry] : manifest_["entries"].items()) {
                total += entry["bytes"].get<std::uint64_t>();
                const auto tick = entry["last_access"].get<std::uint64_t>();
                if (file_key != keep && tick < oldest_tick) {
                    oldest_tick = tick;
                    oldest = file_key;
                }
            }
            if (total <= cap_bytes_ || oldest.empty()) return;
            std::error_code ec;
            std::filesystem::remove(dir_ / oldest, ec);
            manifest_["entries"].erase(oldest);
        }
    }

    void load_manifest(const std::string& config_hash) {
        manifest_ = nlohmann::json{{"config_hash", config_hash},
                                   {"version", 1},
                                   {"clock", 0},
                                   {"entries", nlohmann::json::object()}};
        std::ifstream in(manifest_path_);
        if (!in) return;
        nlohmann::json parsed = nlohmann::json::parse(in, nullptr, false);
        if (parsed.is_discarded() || !parsed.contains("entries") ||
            parsed.value("config_hash", "") != config_hash ||
            parsed.value("version", 0) != 1) {
            return;  // stale or foreign manifest: start fresh
        }
        manifest_ = std::move(parsed);
    }

    void save_manifest() {
        std::ofstream out(manifest_path_, std::ios::trunc);
        out << manifest_.dump(2) << '\n';
    }

    std::filesystem::path dir_;
    std::filesystem::path manifest_path_;
    std::uint64_t cap_bytes_;
    std::uint64_t hits_ = 0;
    nlohmann::json manifest_;
};

}  // namespace fiberspec
