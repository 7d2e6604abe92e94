#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace retrocap {

using complexd = std::complex<double>;

// Dense complex matrix, row-major. Values are immutable in spirit: every
// operation returns a fresh matrix, nothing is cached or shared.
class ComplexMatrix {
public:
    ComplexMatrix() : rows_(0), cols_(0) {}
    ComplexMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, complexd(0.0, 0.0)) {}

    static ComplexMatrix identity(std::size_t n) {
        ComplexMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool is_square() const { return rows_ == cols_; }

    complexd& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const complexd& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    const std::vector<complexd>& data() const { return data_; }
    std::vector<complexd>& data() { return data_; }

    ComplexMatrix operator+(const ComplexMatrix& o) const {
        check_same_shape(o);
        ComplexMatrix r(rows_, cols_);
        for (std::size_t k = 0; k < data_.size(); ++k) r.data_[k] = data_[k] + o.data_[k];
        return r;
    }
    ComplexMatrix operator-(const ComplexMatrix& o) const {
        check_same_shape(o);
        ComplexMatrix r(rows_, cols_);
        for (std::size_t k = 0; k < data_.size(); ++k) r.data_[k] = data_[k] - o.data_[k];
        return r;
    }
    ComplexMatrix operator*(const ComplexMatrix& o) const {
        if (cols_ != o.rows_) throw std::invalid_argument("matmul: inner dimensions differ");
        ComplexMatrix r(rows_, o.cols_);
        for (std::size_t i = 0; i < rows_; ++i) {
            for (std::size_t k = 0; k < cols_; ++k) {
                const complexd a = data_[i * cols_ + k];
                if (a == complexd(0.0, 0.0)) continue;
                const complexd* brow = &o.data_[k * o.cols_];
                complexd* rrow = &r.data_[i * o.cols_];
                for (std::size_t j = 0; j < o.cols_; ++j) rrow[j] += a * brow[j];
            }
        }
        return r;
    }
    ComplexMatrix operator*(complexd s) const {
        ComplexMatrix r(rows_, cols_);
        for (std::size_t k = 0; k < data_.size(); ++k) r.data_[k] = data_[k] * s;
        return r;
    }
    friend ComplexMatrix operator*(complexd s, const ComplexMatrix& m) { return m * s; }

    ComplexMatrix adjoint() const {
        ComplexMatrix r(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) r(j, i) = std::conj((*this)(i, j));
        return r;
    }
    ComplexMatrix transpose() const {
        ComplexMatrix r(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) r(j, i) = (*this)(i, j);
        return r;
    }
    ComplexMatrix conjugate() const {
        ComplexMatrix r(rows_, cols_);
        for (std::size_t k = 0; k < data_.size(); ++k) r.data_[k] = std::conj(data_[k]);
        return r;
    }

    complexd trace() const {
        if (!is_square()) throw std::invalid_argument("trace: matrix not square");
        complexd t(0.0, 0.0);
        for (std::size_t i = 0; i < rows_; ++i) t += (*this)(i, i);
        return t;
    }

    double max_abs() const {
        double m = 0.0;
        for (const auto& v : data_) m = std::max(m, std::abs(v));
        return m;
    }
    double max_abs_diff(const ComplexMatrix& o) const {
        check_same_shape(o);
        double m = 0.0;
        for (std::size_t k = 0; k < data_.size(); ++k) m = std::max(m, std::abs(data_[k] - o.data_[k]));
        return m;
    }

    bool is_hermitian(double tol = 1e-10) const {
        if (!is_square()) return false;
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = i; j < cols_; ++j)
                if (std::abs((*this)(i, j) - std::conj((*this)(j, i))) > tol) return false;
        return true;
    }

    // Real inner product Tr[A^dag B] restricted to Hermitian use sites.
    double hs_inner(const ComplexMatrix& o) const {
        check_same_shape(o);
        complexd s(0.0, 0.0);
        for (std::size_t k = 0; k < data_.size(); ++k) s += std::conj(data_[k]) * o.data_[k];
        return s.real();
    }

private:
    void check_same_shape(const ComplexMatrix& o) const {
        if (rows_ != o.rows_ || cols_ != o.cols_)
            throw std::invalid_argument("matrix shape mismatch");
    }

    std::size_t rows_, cols_;
    std::vector<complexd> data_;
};

// Ordered subsystem dimensions indexing one side of a square matrix.
struct SystemDims {
    std::vector<int> dims;

    SystemDims() = default;
    SystemDims(std::initializer_list<int> d) : dims(d) { validate(); }
    explicit SystemDims(std::vector<int> d) : dims(std::move(d)) { validate(); }

    int total() const {
        int t = 1;
        for (int d : dims) t *= d;
        return t;
    }
    std::size_t count() const { return dims.size(); }
    int operator[](std::size_t k) const { return dims[k]; }

    void validate() const {
        for (int d : dims)
            if (d < 1) throw std::invalid_argument("SystemDims: dimensions must be >= 1");
    }
};

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
    ComplexMatrix r(a.rows() * b.rows(), a.cols() * b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const complexd av = a(i, j);
            if (av == complexd(0.0, 0.0)) continue;
            for (std::size_t k = 0; k < b.rows(); ++k)
                for (std::size_t l = 0; l < b.cols(); ++l)
                    r(i * b.rows() + k, j * b.cols() + l) = av * b(k, l);
        }
    return r;
}

namespace detail {

inline void decompose_index(int idx, const SystemDims& dims, std::vector<int>& digits) {
    digits.resize(dims.count());
    for (std::size_t k = dims.count(); k-- > 0;) {
        digits[k] = idx % dims[k];
        idx /= dims[k];
    }
}

inline int compose_index(const std::vector<int>& digits, const std::vector<int>& dims) {
    int idx = 0;
    for (std::size_t k = 0; k < dims.size(); ++k) idx = idx * dims[k] + digits[k];
    return idx;
}

}  // namespace detail

// Reorders tensor factors: perm[k] names the old factor placed at new slot k.
inline ComplexMatrix permute_subsystems(const ComplexMatrix& m, const SystemDims& dims,
                                        const std::vector<int>& perm) {
    const int n = dims.total();
    if (!m.is_square() || static_cast<int>(m.rows()) != n)
        throw std::invalid_argument("permute_subsystems: dims inconsistent with matrix");
    if (perm.size() != dims.count())
        throw std::invalid_argument("permute_subsystems: permutation length mismatch");
    std::vector<int> seen(perm.size(), 0);
    for (int p : perm) {
        if (p < 0 || p >= static_cast<int>(perm.size()) || seen[p]++)
            throw std::invalid_argument("permute_subsystems: invalid permutation");
    }

    std::vector<int> new_dims(perm.size());
    for (std::size_t k = 0; k < perm.size(); ++k) new_dims[k] = dims[perm[k]];

    // new_index[k] corresponds to old factor perm[k]
    std::vector<int> row_digits, col_digits, nrow(perm.size()), ncol(perm.size());
    ComplexMatrix r(m.rows(), m.cols());
    for (int i = 0; i < n; ++i) {
        detail::decompose_index(i, dims, row_digits);
        for (std::size_t k = 0; k < perm.size(); ++k) nrow[k] = row_digits[perm[k]];
        const int ni = detail::compose_index(nrow, new_dims);
        for (int j = 0; j < n; ++j) {
            detail::decompose_index(j, dims, col_digits);
            for (std::size_t k = 0; k < perm.size(); ++k) ncol[k] = col_digits[perm[k]];
            r(ni, detail::compose_index(ncol, new_dims)) = m(i, j);
        }
    }
    return r;
}

// Traces out the complement of `keep` (subsystem indices, any order).
inline ComplexMatrix partial_trace(const ComplexMatrix& m, const SystemDims& dims,
                                   const std::vector<int>& keep) {
    const int n = dims.total();
    if (!m.is_square() || static_cast<int>(m.rows()) != n)
        throw std::invalid_argument("partial_trace: dims inconsistent with matrix");
    std::vector<int> keep_sorted = keep;
    std::sort(keep_sorted.begin(), keep_sorted.end());
    for (int k : keep_sorted)
        if (k < 0 || k >= static_cast<int>(dims.count()))
            throw std::invalid_argument("partial_trace: keep index out of range");

    std::vector<int> kept_dims;
    std::vector<bool> is_kept(dims.count(), false);
    for (int k : keep_sorted) {
        is_kept[k] = true;
        kept_dims.push_back(dims[k]);
    }
    int out_n = 1;
    for (int d : kept_dims) out_n *= d;

    ComplexMatrix r(out_n, out_n);
    std::vector<int> row_digits, col_digits;
    std::vector<int> krow(kept_dims.size()), kcol(kept_dims.size());
    for (int i = 0; i < n; ++i) {
        detail::decompose_index(i, dims, row_digits);
        for (int j = 0; j < n; ++j) {
            detail::decompose_index(j, dims, col_digits);
            bool diag = true;
            for (std::size_t k = 0; k < dims.count(); ++k)
                if (!is_kept[k] && row_digits[k] != col_digits[k]) {
                    diag = false;
                    break;
                }
            if (!diag) continue;
            std::size_t t = 0;
            for (std::size_t k = 0; k < dims.count(); ++k)
                if (is_kept[k]) {
                    krow[t] = row_digits[k];
                    kcol[t] = col_digits[k];
                    ++t;
                }
            r(detail::compose_index(krow, kept_dims), detail::compose_index(kcol, kept_dims)) += m(i, j);
        }
    }
    return r;
}

struct EigResult {
    std::vector<double> values;  // descending
    ComplexMatrix vectors;       // columns are the matching eigenvectors
};

// Cyclic Jacobi for Hermitian matrices. Deterministic sweep order, accuracy
// well below the 1e-9 reconstruction contract for sides up to 128.
inline EigResult hermitian_eig(const ComplexMatrix& m, double herm_tol = 1e-10) {
    if (!m.is_square()) throw std::invalid_argument("hermitian_eig: matrix not square");
    if (!m.is_hermitian(std::max(herm_tol, 1e-10 * std::max(1.0, m.max_abs()))))
        throw std::invalid_argument("hermitian_eig: matrix not Hermitian within tolerance");

    const std::size_t n = m.rows();
    ComplexMatrix a = m;
    // Exact-Hermitian symmetrization so rotations stay unitary.
    for (std::size_t i = 0; i < n; ++i) {
        a(i, i) = complexd(a(i, i).real(), 0.0);
        for (std::size_t j = i + 1; j < n; ++j) {
            const complexd v = 0.5 * (a(i, j) + std::conj(a(j, i)));
            a(i, j) = v;
            a(j, i) = std::conj(v);
        }
    }
    ComplexMatrix v = ComplexMatrix::identity(n);

    const double scale = std::max(1.0, a.max_abs());
    const double stop = 1e-15 * scale;
    const int max_sweeps = 80;

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off = std::max(off, std::abs(a(p, q)));
        if (off <= stop) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const complexd apq = a(p, q);
                const double r = std::abs(apq);
                if (r <= stop * 1e-2) continue;
                const complexd phase = apq / r;  // e^{i phi}
                const double app = a(p, p).real();
                const double aqq = a(q, q).real();
                const double tau = (aqq - app) / (2.0 * r);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                // Two-sided rotation G with G(p,p)=c, G(p,q)=s*phase,
                // G(q,p)=-s*conj(phase), G(q,q)=c; a <- G^dag a G, v <- v G.
                const complexd gpq = s * phase;
                const complexd gqp = -s * std::conj(phase);
                for (std::size_t k = 0; k < n; ++k) {
                    const complexd akp = a(k, p), akq = a(k, q);
                    a(k, p) = akp * c + akq * gqp;
                    a(k, q) = akp * gpq + akq * c;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const complexd apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk + std::conj(gqp) * aqk;
                    a(q, k) = std::conj(gpq) * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const complexd vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = vkp * c + vkq * gqp;
                    v(k, q) = vkp * gpq + vkq * c;
                }
                a(p, q) = complexd(0.0, 0.0);
                a(q, p) = complexd(0.0, 0.0);
                a(p, p) = complexd(a(p, p).real(), 0.0);
                a(q, q) = complexd(a(q, q).real(), 0.0);
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a(x, x).real() > a(y, y).real(); });

    EigResult res;
    res.values.resize(n);
    res.vectors = ComplexMatrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        res.values[k] = a(order[k], order[k]).real();
        for (std::size_t i = 0; i < n; ++i) res.vectors(i, k) = v(i, order[k]);
    }
    return res;
}

inline double min_eigenvalue(const ComplexMatrix& m) {
    const auto eig = hermitian_eig(m);
    return eig.values.back();
}

// In-place attempt; true iff m (Hermitian) admits a Cholesky factor.
inline bool try_cholesky(const ComplexMatrix& m) {
    const std::size_t n = m.rows();
    ComplexMatrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = m(j, j).real();
        for (std::size_t k = 0; k < j; ++k) d -= std::norm(l(j, k));
        if (d <= 0.0 || !std::isfinite(d)) return false;
        const double dj = std::sqrt(d);
        l(j, j) = dj;
        for (std::size_t i = j + 1; i < n; ++i) {
            complexd s = m(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * std::conj(l(j, k));
            l(i, j) = s / dj;
        }
    }
    return true;
}

// f applied to the spectrum; zero_tol guards f at clipped eigenvalues.
template <typename F>
ComplexMatrix hermitian_function(const ComplexMatrix& m, F f) {
    const auto eig = hermitian_eig(m);
    const std::size_t n = m.rows();
    ComplexMatrix r(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const double fv = f(eig.values[k]);
        if (fv == 0.0) continue;
        for (std::size_t i = 0; i < n; ++i) {
            const complexd vik = eig.vectors(i, k);
            if (vik == complexd(0.0, 0.0)) continue;
            for (std::size_t j = 0; j < n; ++j)
                r(i, j) += fv * vik * std::conj(eig.vectors(j, k));
        }
    }
    return r;
}

inline ComplexMatrix psd_sqrt(const ComplexMatrix& m, double clip = 0.0) {
    return hermitian_function(m, [clip](double x) { return x > clip ? std::sqrt(x) : 0.0; });
}

inline ComplexMatrix pseudo_inverse_sqrt(const ComplexMatrix& m, double rel_tol = 1e-12) {
    const auto eig = hermitian_eig(m);
    const double cut = rel_tol * std::max(1.0, eig.values.empty() ? 0.0 : std::abs(eig.values.front()));
    return hermitian_function(m, [cut](double x) { return x > cut ? 1.0 / std::sqrt(x) : 0.0; });
}

enum class CanonicalKind { max_entangled, uniform, classical_corr, comparator };

// The workhorse states/operators on d (uniform) or d x d (the rest):
// max_entangled is the rank-one Bell projector, classical_corr its dephased
// unit-trace cousin, comparator the trace-d projector onto matched pairs.
inline ComplexMatrix canonical_operator(CanonicalKind kind, int d) {
    if (d < 1) throw std::invalid_argument("canonical_operator: dimension must be >= 1");
    switch (kind) {
        case CanonicalKind::uniform: {
            ComplexMatrix m = ComplexMatrix::identity(d);
            return m * complexd(1.0 / d, 0.0);
        }
        case CanonicalKind::max_entangled: {
            ComplexMatrix m(static_cast<std::size_t>(d) * d, static_cast<std::size_t>(d) * d);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) m(i * d + i, j * d + j) = complexd(1.0 / d, 0.0);
            return m;
        }
        case CanonicalKind::classical_corr: {
            ComplexMatrix m(static_cast<std::size_t>(d) * d, static_cast<std::size_t>(d) * d);
            for (int i = 0; i < d; ++i) m(i * d + i, i * d + i) = complexd(1.0 / d, 0.0);
            return m;
        }
        case CanonicalKind::comparator: {
            ComplexMatrix m(static_cast<std::size_t>(d) * d, static_cast<std::size_t>(d) * d);
            for (int i = 0; i < d; ++i) m(i * d + i, i * d + i) = complexd(1.0, 0.0);
            return m;
        }
    }
    throw std::invalid_argument("canonical_operator: unknown kind");
}

}  // namespace retrocap
