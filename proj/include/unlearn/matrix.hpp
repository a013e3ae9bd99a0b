#pragma once

#include <cstdint>
#include <cstring>
#include <vector>

#include "unlearn/common.hpp"

namespace unlearn {

// Deterministic compute meter. Every matmul/spmm adds its FLOP count to a
// thread-local counter; time budgets and the reported wall_time_s column are
// derived from it (1e-9 s per FLOP, i.e. seconds on a 1 GFLOP/s reference
// machine) so repeated runs account identically regardless of machine load.
namespace cost {

inline thread_local std::uint64_t flops = 0;

inline void add(std::uint64_t f) { flops += f; }

constexpr double kSecondsPerFlop = 1e-9;

// Captures the meter delta over its lifetime.
class Scope {
public:
    Scope() : start_(flops) {}
    std::uint64_t elapsed() const { return flops - start_; }

private:
    std::uint64_t start_;
};

inline double to_seconds(std::uint64_t f) { return static_cast<double>(f) * kSecondsPerFlop; }

}  // namespace cost

// Dense row-major matrix of doubles. Sized for desk-scale graphs; all loops
// are single-threaded so results are bit-reproducible.
struct Matrix {
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(std::int64_t r, std::int64_t c) : rows(r), cols(c), a(static_cast<std::size_t>(r * c), 0.0) {}

    static Matrix zeros(std::int64_t r, std::int64_t c) { return Matrix(r, c); }

    double& at(std::int64_t i, std::int64_t j) { return a[static_cast<std::size_t>(i * cols + j)]; }
    double at(std::int64_t i, std::int64_t j) const { return a[static_cast<std::size_t>(i * cols + j)]; }

    double* row(std::int64_t i) { return a.data() + i * cols; }
    const double* row(std::int64_t i) const { return a.data() + i * cols; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    bool operator==(const Matrix& o) const { return rows == o.rows && cols == o.cols && a == o.a; }
};

inline Matrix matmul(const Matrix& A, const Matrix& B) {
    if (A.cols != B.rows) throw ConfigError("matmul: inner dimensions differ");
    Matrix C(A.rows, B.cols);
    for (std::int64_t i = 0; i < A.rows; ++i) {
        const double* ai = A.row(i);
        double* ci = C.row(i);
        for (std::int64_t k = 0; k < A.cols; ++k) {
            const double aik = ai[k];
            if (aik == 0.0) continue;
            const double* bk = B.row(k);
            for (std::int64_t j = 0; j < B.cols; ++j) ci[j] += aik * bk[j];
        }
    }
    cost::add(static_cast<std::uint64_t>(2 * A.rows * A.cols * B.cols));
    return C;
}

// A^T * B without materializing the transpose.
inline Matrix matmul_tn(const Matrix& A, const Matrix& B) {
    if (A.rows != B.rows) throw ConfigError("matmul_tn: row counts differ");
    Matrix C(A.cols, B.cols);
    for (std::int64_t k = 0; k < A.rows; ++k) {
        const double* ak = A.row(k);
        const double* bk = B.row(k);
        for (std::int64_t i = 0; i < A.cols; ++i) {
            const double aki = ak[i];
            if (aki == 0.0) continue;
            double* ci = C.row(i);
            for (std::int64_t j = 0; j < B.cols; ++j) ci[j] += aki * bk[j];
        }
    }
    cost::add(static_cast<std::uint64_t>(2 * A.rows * A.cols * B.cols));
    return C;
}

// A * B^T.
inline Matrix matmul_nt(const Matrix& A, const Matrix& B) {
    if (A.cols != B.cols) throw ConfigError("matmul_nt: col counts differ");
    Matrix C(A.rows, B.rows);
    for (std::int64_t i = 0; i < A.rows; ++i) {
        const double* ai = A.row(i);
        double* ci = C.row(i);
        for (std::int64_t j = 0; j < B.rows; ++j) {
            const double* bj = B.row(j);
            double s = 0.0;
            for (std::int64_t k = 0; k < A.cols; ++k) s += ai[k] * bj[k];
            ci[j] = s;
        }
    }
    cost::add(static_cast<std::uint64_t>(2 * A.rows * A.cols * B.rows));
    return C;
}

inline void add_inplace(Matrix& A, const Matrix& B, double scale = 1.0) {
    if (!A.same_shape(B)) throw ConfigError("add_inplace: shape mismatch");
    for (std::size_t i = 0; i < A.a.size(); ++i) A.a[i] += scale * B.a[i];
}

inline double max_abs(const Matrix& A) {
    double m = 0.0;
    for (double v : A.a) {
        const double av = v < 0 ? -v : v;
        if (av > m) m = av;
    }
    return m;
}

inline std::uint64_t fingerprint(const Matrix& A) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(&A.rows), sizeof(A.rows)), h);
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(&A.cols), sizeof(A.cols)), h);
    if (!A.a.empty()) {
        h = fnv1a64(std::string_view(reinterpret_cast<const char*>(A.a.data()), A.a.size() * sizeof(double)), h);
    }
    return h;
}

}  // namespace unlearn
