#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace cusplab {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Symmetric bilinear form stored as upper-triangle triplets (i <= j).
// Duplicate (i,j) entries are allowed during accumulation and are summed
// by compress(); quadratic/apply/hash require compressed storage.
class SparseSymmetricForm {
  public:
    struct Entry {
        std::uint32_t row = 0;
        std::uint32_t col = 0;
        double value = 0.0;
    };

    SparseSymmetricForm() = default;
    explicit SparseSymmetricForm(std::size_t dimension) : dim_(dimension) {}

    std::size_t dimension() const { return dim_; }
    const std::vector<Entry>& entries() const { return entries_; }
    bool compressed() const { return compressed_; }
    std::size_t nonzeros() const { return entries_.size(); }

    void reserve(std::size_t n) { entries_.reserve(n); }

    // Adds v to entry (i,j) of the symmetric matrix; stores upper triangle.
    void accumulate(std::size_t i, std::size_t j, double v);

    // Sorts entries lexicographically and sums duplicates. Idempotent.
    void compress();

    // x^T M x
    double quadratic(std::span<const double> x) const;

    // y = M x (both triangles applied)
    void apply(std::span<const double> x, std::span<double> y) const;

    // Frobenius norm of the full symmetric matrix.
    double norm() const;

    // Order-sensitive FNV-1a over dimension and compressed triplets.
    // Stable across platforms with IEEE-754 doubles.
    std::uint64_t hash() const;

    // M += s * other (dimensions must agree; both sides compressed)
    void add_scaled(const SparseSymmetricForm& other, double s);

  private:
    void require_compressed(const char* op) const;

    std::size_t dim_ = 0;
    std::vector<Entry> entries_;
    bool compressed_ = true;  // empty form counts as compressed
};

// FNV-1a helpers shared by hashing code elsewhere in the library.
std::uint64_t fnv1a(const void* data, std::size_t nbytes, std::uint64_t seed = 0xcbf29ce484222325ull);
std::uint64_t fnv1a_u64(std::uint64_t value, std::uint64_t seed);
std::uint64_t fnv1a_f64(double value, std::uint64_t seed);

}  // namespace cusplab
