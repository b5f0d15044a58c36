#include "cusplab/sparse_form.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

namespace cusplab {

std::uint64_t fnv1a(const void* data, std::size_t nbytes, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t k = 0; k < nbytes; ++k) {
        h ^= p[k];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t fnv1a_u64(std::uint64_t value, std::uint64_t seed) {
    return fnv1a(&value, sizeof value, seed);
}

std::uint64_t fnv1a_f64(double value, std::uint64_t seed) {
    // Normalize -0.0 so algebraically identical assemblies hash alike.
    if (value == 0.0) value = 0.0;
    return fnv1a_u64(std::bit_cast<std::uint64_t>(value), seed);
}

void SparseSymmetricForm::accumulate(std::size_t i, std::size_t j, double v) {
    if (i >= dim_ || j >= dim_) throw Error("sparse form: index out of range");
    if (i > j) std::swap(i, j);
    entries_.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), v});
    compressed_ = false;
}

void SparseSymmetricForm::compress() {
    if (compressed_) return;
    std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::size_t out = 0;
    for (std::size_t k = 0; k < entries_.size(); ++k) {
        if (out > 0 && entries_[out - 1].row == entries_[k].row &&
            entries_[out - 1].col == entries_[k].col) {
            entries_[out - 1].value += entries_[k].value;
        } else {
            entries_[out++] = entries_[k];
        }
    }
    entries_.resize(out);
    compressed_ = true;
}

void SparseSymmetricForm::require_compressed(const char* op) const {
    if (!compressed_) throw Error(std::string("sparse form: ") + op + " requires compress()");
}

double SparseSymmetricForm::quadratic(std::span<const double> x) const {
    require_compressed("quadratic");
    if (x.size() != dim_) throw Error("sparse form: quadratic size mismatch");
    double diag = 0.0, off = 0.0;
    for (const Entry& e : entries_) {
        if (e.row == e.col)
            diag += e.value * x[e.row] * x[e.row];
        else
            off += e.value * x[e.row] * x[e.col];
    }
    return diag + 2.0 * off;
}

void SparseSymmetricForm::apply(std::span<const double> x, std::span<double> y) const {
    require_compressed("apply");
    if (x.size() != dim_ || y.size() != dim_) throw Error("sparse form: apply size mismatch");
    std::fill(y.begin(), y.end(), 0.0);
    for (const Entry& e : entries_) {
        y[e.row] += e.value * x[e.col];
        if (e.row != e.col) y[e.col] += e.value * x[e.row];
    }
}

double SparseSymmetricForm::norm() const {
    require_compressed("norm");
    double s = 0.0;
    for (const Entry& e : entries_) {
        const double v2 = e.value * e.value;
        s += e.row == e.col ? v2 : 2.0 * v2;
    }
    return std::sqrt(s);
}

std::uint64_t SparseSymmetricForm::hash() const {
    require_compressed("hash");
    std::uint64_t h = fnv1a_u64(static_cast<std::uint64_t>(dim_), 0xcbf29ce484222325ull);
    for (const Entry& e : entries_) {
        if (e.value == 0.0) continue;  // explicit zeros do not change the form
        h = fnv1a_u64(e.row, h);
        h = fnv1a_u64(e.col, h);
        h = fnv1a_f64(e.value, h);
    }
    return h;
}

void SparseSymmetricForm::add_scaled(const SparseSymmetricForm& other, double s) {
    require_compressed("add_scaled");
    other.require_compressed("add_scaled");
    if (other.dim_ != dim_) throw Error("sparse form: add_scaled dimension mismatch");
    for (const Entry& e : other.entries_) entries_.push_back({e.row, e.col, s * e.value});
    compressed_ = false;
    compress();
}

}  // namespace cusplab
