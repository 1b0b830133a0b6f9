#pragma once

// Complex dense linear-algebra kernel: Kronecker/Hadamard/vec algebra, PSD
// square roots, Hermitian solves, a Bartels-Stewart Sylvester solver, and a
// counter-based RNG for reproducible Monte Carlo. All functions are pure.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace ristrain {

using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using Complex = std::complex<double>;

inline constexpr Complex kI{0.0, 1.0};

// ---------------------------------------------------------------------------
// Structural helpers

inline CMat kron(const CMat& a, const CMat& b) {
    CMat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline CVec vec(const CMat& a) {
    return Eigen::Map<const CVec>(a.data(), a.size());
}

inline CMat unvec(const CVec& v, Eigen::Index rows, Eigen::Index cols) {
    if (v.size() != rows * cols) throw std::invalid_argument("unvec: size mismatch");
    return Eigen::Map<const CMat>(v.data(), rows, cols);
}

inline CVec diag_of(const CMat& x) {
    if (x.rows() != x.cols()) throw std::invalid_argument("diag_of: matrix not square");
    return x.diagonal();
}

inline CMat diag_make(const CVec& v) {
    CMat out = CMat::Zero(v.size(), v.size());
    out.diagonal() = v;
    return out;
}

// Diagonal matrix holding the diagonal of a square matrix.
inline CMat ddiag(const CMat& x) {
    return diag_make(diag_of(x));
}

inline CMat blkdiag(const std::vector<CMat>& blocks) {
    Eigen::Index r = 0, c = 0;
    for (const CMat& b : blocks) { r += b.rows(); c += b.cols(); }
    CMat out = CMat::Zero(r, c);
    r = c = 0;
    for (const CMat& b : blocks) {
        out.block(r, c, b.rows(), b.cols()) = b;
        r += b.rows();
        c += b.cols();
    }
    return out;
}

// Per-block diagonal sums: a is (m*block)x(m*block); entry i of the result is
// the trace of the i-th diagonal block of size `block`.
inline CVec partial_diag_sum(const CMat& a, Eigen::Index block) {
    if (a.rows() != a.cols() || block < 1 || a.rows() % block != 0)
        throw std::invalid_argument("partial_diag_sum: bad block size");
    const Eigen::Index m = a.rows() / block;
    CVec s(m);
    for (Eigen::Index i = 0; i < m; ++i)
        s(i) = a.block(i * block, i * block, block, block).trace();
    return s;
}

// Block-trace compression: a is (r*block)x(c*block); result(i,j) is the trace
// of block (i,j). Collapses traces against M (x) I_block factors.
inline CMat block_trace(const CMat& a, Eigen::Index block) {
    if (block < 1 || a.rows() % block != 0 || a.cols() % block != 0)
        throw std::invalid_argument("block_trace: bad block size");
    const Eigen::Index r = a.rows() / block, c = a.cols() / block;
    CMat out(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j)
            out(i, j) = a.block(i * block, j * block, block, block).trace();
    return out;
}

// diag(v) (x) 1_times as a vector: each entry repeated `times` consecutively.
inline CVec repeat_each(const CVec& v, Eigen::Index times) {
    CVec out(v.size() * times);
    for (Eigen::Index i = 0; i < v.size(); ++i)
        out.segment(i * times, times).setConstant(v(i));
    return out;
}

// ---------------------------------------------------------------------------
// Hermitian utilities

inline bool is_hermitian(const CMat& a, double tol_scale = 1e-10) {
    if (a.rows() != a.cols()) return false;
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol_scale * scale;
}

inline CMat hermitize(const CMat& a) {
    return 0.5 * (a + a.adjoint());
}

// Hermitian PSD square root via eigendecomposition. Eigenvalues in
// [-1e-10*scale, 0) are clamped to zero; below -1e-8*||r||_2 is an error.
inline CMat matrix_sqrt_psd(const CMat& r) {
    if (!is_hermitian(r))
        throw std::invalid_argument("matrix_sqrt_psd: input not Hermitian within tolerance");
    const CMat h = hermitize(r);
    Eigen::SelfAdjointEigenSolver<CMat> es(h);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("matrix_sqrt_psd: eigendecomposition failed");
    RVec lam = es.eigenvalues();
    const double two_norm = lam.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
        if (lam(i) < -1e-8 * two_norm) {
            std::ostringstream os;
            os << "matrix_sqrt_psd: significantly negative eigenvalue " << lam(i);
            throw std::runtime_error(os.str());
        }
        lam(i) = lam(i) > 0.0 ? std::sqrt(lam(i)) : 0.0;
    }
    return es.eigenvectors() * lam.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
}

// Solves A X = B for Hermitian positive-definite A (Cholesky), with a
// relative-residual guarantee of 1e-10.
inline CMat solve_hpd(const CMat& a, const CMat& b) {
    if (!is_hermitian(a))
        throw std::invalid_argument("solve_hpd: matrix not Hermitian within tolerance");
    if (a.rows() != b.rows()) throw std::invalid_argument("solve_hpd: dimension mismatch");
    Eigen::LLT<CMat> llt(hermitize(a));
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("solve_hpd: matrix not positive definite");
    CMat x = llt.solve(b);
    const double bn = b.norm();
    const double res = (a * x - b).norm();
    if (bn > 0.0 && res > 1e-10 * bn) {
        std::ostringstream os;
        os << "solve_hpd: relative residual " << res / bn << " exceeds 1e-10";
        throw std::runtime_error(os.str());
    }
    return x;
}

// ---------------------------------------------------------------------------
// Sylvester equation A X + X B = C (Bartels-Stewart)
//
// Complex Schur forms A = Qa Ta Qa^H and B^H = Qb Tb^H Qb^H reduce the
// equation to a triangular system solved column by column; the solution is
// accepted only if the relative residual is within 1e-8.

inline CMat solve_sylvester(const CMat& a, const CMat& b, const CMat& c) {
    if (a.rows() != a.cols() || b.rows() != b.cols())
        throw std::invalid_argument("solve_sylvester: A and B must be square");
    if (c.rows() != a.rows() || c.cols() != b.rows())
        throw std::invalid_argument("solve_sylvester: C dimension mismatch");

    Eigen::ComplexSchur<CMat> sa(a, /*computeU=*/true);
    Eigen::ComplexSchur<CMat> sb(b, /*computeU=*/true);
    if (sa.info() != Eigen::Success || sb.info() != Eigen::Success)
        throw std::runtime_error("solve_sylvester: Schur decomposition failed");

    const CMat& ta = sa.matrixT();           // upper triangular
    const CMat& tb = sb.matrixT();           // upper triangular
    CMat f = sa.matrixU().adjoint() * c * sb.matrixU();

    // Ta Y + Y Tb = F, column sweep: (Ta + tb(j,j) I) y_j = f_j - Y_{:,<j} tb(<j, j)
    const Eigen::Index m = a.rows(), n = b.rows();
    CMat y(m, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        CVec rhs = f.col(j);
        if (j > 0) rhs.noalias() -= y.leftCols(j) * tb.col(j).head(j);
        CMat tshift = ta;
        tshift.diagonal().array() += tb(j, j);
        y.col(j) = tshift.triangularView<Eigen::Upper>().solve(rhs);
    }
    CMat x = sa.matrixU() * y * sb.matrixU().adjoint();

    const double cn = c.norm();
    const double res = (a * x + x * b - c).norm();
    const double rel = cn > 0.0 ? res / cn : res;
    if (!x.allFinite() || rel > 1e-8) {
        std::ostringstream os;
        os << "solve_sylvester: relative residual " << rel
           << " exceeds 1e-8 (near-singular operator)";
        throw std::runtime_error(os.str());
    }
    return x;
}

// ---------------------------------------------------------------------------
// Counter-based splittable RNG: every draw is a hash of (key, counter), so
// streams are reproducible and independent of call interleaving across
// (seed, stream) pairs.

class CounterRng {
  public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : key_(mix(mix(seed) + 0x9E3779B97F4A7C15ULL * (stream + 1))) {}

    CounterRng split(std::uint64_t stream) const {
        CounterRng child(0);
        child.key_ = mix(key_ ^ mix(stream + 0xD1B54A32D192ED03ULL));
        child.counter_ = 0;
        child.has_cached_ = false;
        return child;
    }

    std::uint64_t next_u64() { return mix(key_ + 0x9E3779B97F4A7C15ULL * (++counter_)); }

    // Uniform on [0, 1) with 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller (second value cached).
    double next_gauss() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = next_double();
        const double u2 = next_double();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * M_PI * u2;
        cached_ = r * std::sin(t);
        has_cached_ = true;
        return r * std::cos(t);
    }

    // Circularly-symmetric unit-variance complex normal.
    Complex next_cgauss() {
        const double re = next_gauss();
        const double im = next_gauss();
        return Complex(re * M_SQRT1_2, im * M_SQRT1_2);
    }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

inline CVec sample_unit_cgauss(Eigen::Index n, CounterRng& rng) {
    CVec z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.next_cgauss();
    return z;
}

// x = S z with S = matrix_sqrt_psd(cov) and z i.i.d. CN(0, 1), so
// E[x x^H] = cov.
inline CVec sample_complex_gaussian(const CMat& cov, CounterRng& rng) {
    const CMat s = matrix_sqrt_psd(cov);
    return s * sample_unit_cgauss(cov.rows(), rng);
}

}  // namespace ristrain
