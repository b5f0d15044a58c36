#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cusplab/eigen_solver.hpp"

namespace cusplab {

// Binary on-disk cache for solved eigenpair sets, keyed by problem hash.
// Files carry a format version, the solve metadata, the operator triplets
// (so verification can recompute residuals without the original config),
// and a trailing checksum. A file that fails any structural check is
// renamed to *.quarantined rather than deleted.

enum class CacheOutcome {
    hit,          // loaded and metadata matched
    miss,         // no file for this key
    mismatch,     // file exists but metadata disagrees (left untouched)
    quarantined,  // file was structurally invalid and has been renamed
};

struct CacheLoad {
    CacheOutcome outcome = CacheOutcome::miss;
    std::optional<EigenPairSet> pairs;
    std::string detail;
};

struct CacheEntryReport {
    std::string file;
    bool ok = false;
    double residual = 0.0;  // relative residual of the recomputed check pair
    std::string message;
};

std::filesystem::path cache_dir_default();

std::filesystem::path cache_path_for(const std::filesystem::path& dir, std::uint64_t problem_hash);

// Writes atomically (temp file + rename). Returns the final path.
std::filesystem::path cache_store(const std::filesystem::path& dir, const EigenPairSet& pairs,
                                  const SparseSymmetricForm& A, const SparseSymmetricForm& B);

// Loads the entry for the metadata's problem hash, verifying checksum and
// that (grid_hash, tol, k) agree with `expect`.
CacheLoad cache_try_load(const std::filesystem::path& dir, const SolveMeta& expect);

// Recomputes one eigenpair residual per entry from the stored operators.
std::vector<CacheEntryReport> cache_verify(const std::filesystem::path& dir);

struct CacheStatus {
    std::size_t entries = 0;
    std::size_t quarantined = 0;
    std::uintmax_t total_bytes = 0;
    std::vector<std::string> files;
};

CacheStatus cache_status(const std::filesystem::path& dir);

// Removes cache entries (and quarantined files). Returns count removed.
std::size_t cache_clear(const std::filesystem::path& dir);

}  // namespace cusplab
