#include "cusplab/eigen_cache.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

namespace cusplab {
namespace {

static_assert(std::endian::native == std::endian::little,
              "cache serialization assumes little-endian storage");

constexpr std::uint64_t kMagic = 0x314350455053554cull;  // "LUSPEPC1" little-endian tag
constexpr std::uint32_t kVersion = 1;

struct ByteSink {
    std::string bytes;
    template <class T>
    void put(const T& v) {
        static_assert(std::is_trivially_copyable_v<T>);
        const char* p = reinterpret_cast<const char*>(&v);
        bytes.append(p, sizeof v);
    }
};

struct ByteSource {
    const std::string& bytes;
    std::size_t pos = 0;
    template <class T>
    bool get(T& v) {
        static_assert(std::is_trivially_copyable_v<T>);
        if (pos + sizeof v > bytes.size()) return false;
        std::memcpy(&v, bytes.data() + pos, sizeof v);
        pos += sizeof v;
        return true;
    }
};

void put_form(ByteSink& s, const SparseSymmetricForm& M) {
    s.put(static_cast<std::uint64_t>(M.dimension()));
    s.put(static_cast<std::uint64_t>(M.entries().size()));
    for (const auto& e : M.entries()) {
        s.put(e.row);
        s.put(e.col);
        s.put(e.value);
    }
}

bool get_form(ByteSource& s, SparseSymmetricForm& M) {
    std::uint64_t dim = 0, nnz = 0;
    if (!s.get(dim) || !s.get(nnz)) return false;
    M = SparseSymmetricForm(dim);
    M.reserve(nnz);
    for (std::uint64_t k = 0; k < nnz; ++k) {
        std::uint32_t i = 0, j = 0;
        double v = 0.0;
        if (!s.get(i) || !s.get(j) || !s.get(v)) return false;
        if (i >= dim || j >= dim || i > j) return false;
        M.accumulate(i, j, v);
    }
    M.compress();
    return true;
}

struct Decoded {
    EigenPairSet pairs;
    SparseSymmetricForm A, B;
};

std::string encode(const EigenPairSet& p, const SparseSymmetricForm& A,
                   const SparseSymmetricForm& B) {
    ByteSink s;
    s.put(kMagic);
    s.put(kVersion);
    s.put(p.meta.k);
    s.put(static_cast<std::uint64_t>(p.dimension));
    s.put(p.meta.problem_hash);
    s.put(p.meta.grid_hash);
    s.put(p.meta.tol);
    for (std::uint32_t j = 0; j < p.meta.k; ++j) s.put(p.values[j]);
    for (std::uint32_t j = 0; j < p.meta.k; ++j) s.put(p.sup_norms[j]);
    for (std::uint32_t j = 0; j < p.meta.k; ++j)
        for (double v : p.vectors[j]) s.put(v);
    put_form(s, A);
    put_form(s, B);
    const std::uint64_t check = fnv1a(s.bytes.data(), s.bytes.size());
    s.put(check);
    return std::move(s.bytes);
}

bool decode(const std::string& raw, Decoded& out, std::string& why) {
    if (raw.size() < sizeof(std::uint64_t) * 2) {
        why = "truncated header";
        return false;
    }
    std::uint64_t stored_check = 0;
    std::memcpy(&stored_check, raw.data() + raw.size() - sizeof stored_check, sizeof stored_check);
    const std::uint64_t computed = fnv1a(raw.data(), raw.size() - sizeof stored_check);
    if (computed != stored_check) {
        why = "checksum mismatch";
        return false;
    }
    ByteSource s{raw};
    std::uint64_t magic = 0;
    std::uint32_t version = 0;
    if (!s.get(magic) || magic != kMagic) {
        why = "bad magic";
        return false;
    }
    if (!s.get(version) || version != kVersion) {
        why = "unsupported format version";
        return false;
    }
    EigenPairSet& p = out.pairs;
    std::uint64_t dim = 0;
    if (!s.get(p.meta.k) || !s.get(dim) || !s.get(p.meta.problem_hash) ||
        !s.get(p.meta.grid_hash) || !s.get(p.meta.tol)) {
        why = "truncated metadata";
        return false;
    }
    p.dimension = dim;
    p.values.resize(p.meta.k);
    p.sup_norms.resize(p.meta.k);
    p.vectors.assign(p.meta.k, std::vector<double>(dim));
    for (auto& v : p.values)
        if (!s.get(v)) { why = "truncated values"; return false; }
    for (auto& v : p.sup_norms)
        if (!s.get(v)) { why = "truncated sup norms"; return false; }
    for (auto& vec : p.vectors)
        for (auto& v : vec)
            if (!s.get(v)) { why = "truncated vectors"; return false; }
    if (!get_form(s, out.A) || !get_form(s, out.B)) {
        why = "truncated operator triplets";
        return false;
    }
    if (out.A.dimension() != dim || out.B.dimension() != dim) {
        why = "operator dimension disagrees with vectors";
        return false;
    }
    return true;
}

std::filesystem::path quarantine(const std::filesystem::path& file) {
    std::filesystem::path q = file;
    q += ".quarantined";
    std::error_code ec;
    std::filesystem::rename(file, q, ec);
    return q;
}

}  // namespace

std::filesystem::path cache_dir_default() {
    if (const char* env = std::getenv("CUSPLAB_CACHE_DIR"); env && *env)
        return std::filesystem::path(env);
    return std::filesystem::path(".cusplab-cache");
}

std::filesystem::path cache_path_for(const std::filesystem::path& dir, std::uint64_t problem_hash) {
    std::ostringstream name;
    name << "eps_" << std::hex << problem_hash << ".bin";
    return dir / name.str();
}

std::filesystem::path cache_store(const std::filesystem::path& dir, const EigenPairSet& pairs,
                                  const SparseSymmetricForm& A, const SparseSymmetricForm& B) {
    if (pairs.meta.k != pairs.values.size() || pairs.vectors.size() != pairs.values.size())
        throw Error("cache: inconsistent pair set");
    std::filesystem::create_directories(dir);
    const auto path = cache_path_for(dir, pairs.meta.problem_hash);
    auto tmp = path;
    tmp += ".tmp";
    const std::string blob = encode(pairs, A, B);
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw Error("cache: cannot open " + tmp.string());
        f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
        if (!f) throw Error("cache: short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
    return path;
}

CacheLoad cache_try_load(const std::filesystem::path& dir, const SolveMeta& expect) {
    CacheLoad out;
    const auto path = cache_path_for(dir, expect.problem_hash);
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        out.outcome = CacheOutcome::miss;
        return out;
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    const std::string raw = ss.str();
    Decoded dec;
    std::string why;
    if (!decode(raw, dec, why)) {
        f.close();
        const auto q = quarantine(path);
        out.outcome = CacheOutcome::quarantined;
        out.detail = why + "; moved to " + q.string();
        return out;
    }
    const SolveMeta& m = dec.pairs.meta;
    if (m.problem_hash != expect.problem_hash || m.grid_hash != expect.grid_hash ||
        m.tol != expect.tol || m.k != expect.k) {
        out.outcome = CacheOutcome::mismatch;
        out.detail = "metadata disagrees with request";
        return out;
    }
    out.outcome = CacheOutcome::hit;
    out.pairs = std::move(dec.pairs);
    return out;
}

std::vector<CacheEntryReport> cache_verify(const std::filesystem::path& dir) {
    std::vector<CacheEntryReport> reports;
    if (!std::filesystem::exists(dir)) return reports;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const auto& path = entry.path();
        if (path.extension() != ".bin") continue;
        CacheEntryReport rep;
        rep.file = path.filename().string();
        std::ifstream f(path, std::ios::binary);
        std::ostringstream ss;
        ss << f.rdbuf();
        const std::string raw = ss.str();
        Decoded dec;
        std::string why;
        if (!decode(raw, dec, why)) {
            f.close();
            quarantine(path);
            rep.ok = false;
            rep.message = why + "; quarantined";
            reports.push_back(std::move(rep));
            continue;
        }
        // Recompute the residual of the lowest stored pair against the
        // stored operators.
        const EigenPairSet& p = dec.pairs;
        if (p.meta.k == 0 || p.dimension == 0) {
            rep.ok = false;
            rep.message = "empty pair set";
            reports.push_back(std::move(rep));
            continue;
        }
        const std::vector<double>& v = p.vectors[0];
        std::vector<double> av(p.dimension), bv(p.dimension);
        dec.A.apply(v, av);
        dec.B.apply(v, bv);
        double r2 = 0.0, b2 = 0.0;
        for (std::size_t i = 0; i < p.dimension; ++i) {
            const double r = av[i] - p.values[0] * bv[i];
            r2 += r * r;
            b2 += bv[i] * bv[i];
        }
        rep.residual = std::sqrt(r2) / std::max(std::sqrt(b2), 1e-300);
        rep.ok = rep.residual <= 50.0 * std::max(p.meta.tol, 1e-14);
        rep.message = rep.ok ? "ok" : "stored pair fails residual recheck";
        reports.push_back(std::move(rep));
    }
    return reports;
}

CacheStatus cache_status(const std::filesystem::path& dir) {
    CacheStatus st;
    if (!std::filesystem::exists(dir)) return st;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const auto& path = entry.path();
        if (path.extension() == ".bin") {
            st.entries += 1;
            st.total_bytes += entry.file_size();
            st.files.push_back(path.filename().string());
        } else if (path.extension() == ".quarantined") {
            st.quarantined += 1;
            st.total_bytes += entry.file_size();
            st.files.push_back(path.filename().string());
        }
    }
    std::sort(st.files.begin(), st.files.end());
    return st;
}

std::size_t cache_clear(const std::filesystem::path& dir) {
    if (!std::filesystem::exists(dir)) return 0;
    std::size_t removed = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension();
        if (ext == ".bin" || ext == ".quarantined" || ext == ".tmp") {
            std::filesystem::remove(entry.path());
            removed += 1;
        }
    }
    return removed;
}

}  // namespace cusplab
