#pragma once

// Penalty duality decomposition on the training-MSE objective. The pilot
// product psi = phi P is split into four groups of copies,
//   U1,k = conj(psi), U2 = conj(psi) (x) I, U3,k = R_h^{1/2} U1,k W_h,k,
//   U4 = R_G^{1/2} U2 W_G,
// and the augmented objective
//   nu * f(U3, U4, W) + (1/2 rho) sum_i ||U_i - rhs_i + rho Lambda_i||^2
// is minimized by exact block updates (two closed forms, four Sylvester
// solves, a phase alignment, and a projected quadratic). The outer layer does
// per-constraint dual ascent or penalty shrinkage. nu = 1/(K s0) normalizes
// the objective so one penalty coefficient serves all copy groups.

#include "ristrain/channel.hpp"
#include "ristrain/estimation.hpp"
#include "ristrain/linalg.hpp"
#include "ristrain/opt_gd.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace ristrain {

struct PddConfig {
    double rho0_scale = 1.0;   // initial penalty, in units of the normalized objective
    double c_shrink = 0.6;
    double delta = 1e-5;       // constraint-violation threshold (max-abs)
    int inner_max = 50;
    int outer_max = 200;
    double tol_inner_rel = 1e-7;
    double tol_rel_obj = 1e-6;
    bool single_shrink = false;  // at most one penalty shrink per outer iteration
    std::uint64_t seed = 0;

    void validate() const {
        if (!(rho0_scale > 0.0) || !(c_shrink > 0.0 && c_shrink < 1.0) || !(delta > 0.0) ||
            inner_max < 1 || outer_max < 1 || !(tol_inner_rel > 0.0) || !(tol_rel_obj > 0.0))
            throw std::invalid_argument("PddConfig: invalid parameters");
    }
};

struct PddState {
    PilotSequence pilot;
    ReceiverSet rx;
    std::vector<CMat> u1;       // K copies, m_r x t
    CMat u2;                    // (m_r m_b) x (t m_b)
    std::vector<CMat> u3;       // K copies, m_r x m_r
    CMat u4;                    // (m_r m_b) x (m_r m_b)
    std::vector<CMat> lambda1;
    CMat lambda2;
    std::vector<CMat> lambda3;
    CMat lambda4;
    double rho = 1.0;
    double nu = 1.0;            // objective normalizer 1/(K s0)
};

// Scenario-derived constants shared by every block update.
struct PddWorkspace {
    ChannelStats st;
    double p_max = 0.0;
    CMat r_g_sqrt;
    CMat r_g_inv;
    CMat sigma_b_inv;
    std::vector<CMat> r_h_sqrt;
    std::vector<CMat> r_h_inv;
    double t1_sum = 0.0;  // sum_k Tr{R_G . (R_h,k (x) 1)}, the pilot-free term

    explicit PddWorkspace(const ChannelStats& stats, double p_max_in)
        : st(stats), p_max(p_max_in) {
        const CMat eye_g = CMat::Identity(st.m_b * st.m_r, st.m_b * st.m_r);
        r_g_sqrt = matrix_sqrt_psd(st.r_g);
        r_g_inv = solve_hpd(st.r_g, eye_g);
        sigma_b_inv = solve_hpd(st.sigma_b_mat, CMat::Identity(st.m_b, st.m_b));
        const CMat ones = CMat::Ones(st.m_b, st.m_b);
        for (std::size_t k = 0; k < st.r_h.size(); ++k) {
            r_h_sqrt.push_back(matrix_sqrt_psd(st.r_h[k]));
            r_h_inv.push_back(solve_hpd(st.r_h[k], CMat::Identity(st.m_r, st.m_r)));
            t1_sum += st.r_g.cwiseProduct(kron(st.r_h[k], ones)).trace().real();
        }
    }
};

namespace detail {

inline CMat conj_psi(const PddState& s) { return s.pilot.psi().conjugate(); }

inline CMat conj_psi_kron(const PddState& s, int m_b) {
    return kron(conj_psi(s), CMat::Identity(m_b, m_b));
}

// Diagonal of the f-part quadratic in U3 (per-block traces of
// C_Ghat = U4^H U4 + W_G^H (I (x) Sigma_B) W_G).
inline RVec pdd_c_d2(const PddState& s, const PddWorkspace& ws) {
    const CMat noise = s.rx.w_g.adjoint() * training_noise_cov(ws.st, s.pilot.t()) * s.rx.w_g;
    return partial_diag_sum(s.u4.adjoint() * s.u4 + noise, ws.st.m_b).real();
}

// Sum over users of Ddiag((U3^H U3 + sigma_u^2 W_h^H W_h) (x) 1) diagonals.
inline RVec pdd_c_d3(const PddState& s, const PddWorkspace& ws) {
    RVec d = RVec::Zero(ws.st.m_b * ws.st.m_r);
    for (std::size_t k = 0; k < s.u3.size(); ++k) {
        const CMat c_h = s.u3[k].adjoint() * s.u3[k] +
                         ws.st.sigma_u_sq[k] * s.rx.w_h[k].adjoint() * s.rx.w_h[k];
        d += repeat_each(diag_of(c_h), ws.st.m_b).real();
    }
    return d;
}

}  // namespace detail

// Objective part of the augmented Lagrangian expressed in the copies.
inline double pdd_objective_in_copies(const PddState& s, const PddWorkspace& ws) {
    const CMat noise_g =
        s.rx.w_g.adjoint() * training_noise_cov(ws.st, s.pilot.t()) * s.rx.w_g;
    const CMat c_g = s.u4.adjoint() * s.u4 + noise_g;
    const CVec s_cg = partial_diag_sum(c_g, ws.st.m_b);
    const CVec s_e = partial_diag_sum(ws.r_g_sqrt * s.u4, ws.st.m_b);
    double f = ws.t1_sum;
    for (std::size_t k = 0; k < s.u3.size(); ++k) {
        const CMat c_h = s.u3[k].adjoint() * s.u3[k] +
                         ws.st.sigma_u_sq[k] * s.rx.w_h[k].adjoint() * s.rx.w_h[k];
        f += (s_cg.array() * diag_of(c_h).array()).sum().real();
        const CVec d_cross = diag_of(ws.r_h_sqrt[k] * s.u3[k]);
        f -= 2.0 * (d_cross.array() * s_e.array()).sum().real();
    }
    return f;
}

// Full augmented objective: nu * f(copies) + (1/2 rho) sum of penalty norms.
inline double pdd_augmented_objective(const PddState& s, const PddWorkspace& ws) {
    const CMat cp = detail::conj_psi(s);
    const CMat cpk = detail::conj_psi_kron(s, ws.st.m_b);
    double pen = (s.u2 - cpk + s.rho * s.lambda2).squaredNorm() +
                 (s.u4 - ws.r_g_sqrt * s.u2 * s.rx.w_g + s.rho * s.lambda4).squaredNorm();
    for (std::size_t k = 0; k < s.u1.size(); ++k) {
        pen += (s.u1[k] - cp + s.rho * s.lambda1[k]).squaredNorm();
        pen += (s.u3[k] - ws.r_h_sqrt[k] * s.u1[k] * s.rx.w_h[k] + s.rho * s.lambda3[k])
                   .squaredNorm();
    }
    return s.nu * pdd_objective_in_copies(s, ws) + pen / (2.0 * s.rho);
}

// ---------------------------------------------------------------------------
// Block updates (each is the exact minimizer of the augmented objective over
// its block with all other blocks fixed).

// W_h,k: Sylvester (1/2rho) Sigma^{-1} U1^H R_h U1 W + nu W C_d2 =
//        (1/2rho) Sigma^{-1} U1^H R_h^{1/2} (U3 + rho Lambda3).
inline std::vector<CMat> pdd_update_wh(const PddState& s, const PddWorkspace& ws) {
    const RVec c_d2 = detail::pdd_c_d2(s, ws);
    const CMat b = (s.nu * c_d2).cast<Complex>().asDiagonal();
    std::vector<CMat> out;
    for (std::size_t k = 0; k < s.u1.size(); ++k) {
        const double w = 1.0 / (2.0 * s.rho * ws.st.sigma_u_sq[k]);
        const CMat a = w * (s.u1[k].adjoint() * ws.st.r_h[k] * s.u1[k]);
        const CMat c =
            w * (s.u1[k].adjoint() * ws.r_h_sqrt[k] * (s.u3[k] + s.rho * s.lambda3[k]));
        out.push_back(solve_sylvester(a, b, c));
    }
    return out;
}

// W_G: Sylvester (1/2rho) N^{-1} U2^H R_G U2 W + nu W C_d3 =
//      (1/2rho) N^{-1} U2^H R_G^{1/2} (U4 + rho Lambda4).
inline CMat pdd_update_wg(const PddState& s, const PddWorkspace& ws) {
    const CMat n_inv = kron(CMat::Identity(s.pilot.t(), s.pilot.t()), ws.sigma_b_inv);
    const double w = 1.0 / (2.0 * s.rho);
    const CMat a = w * (n_inv * s.u2.adjoint() * ws.st.r_g * s.u2);
    const CMat b = (s.nu * detail::pdd_c_d3(s, ws)).cast<Complex>().asDiagonal();
    const CMat c = w * (n_inv * s.u2.adjoint() * ws.r_g_sqrt * (s.u4 + s.rho * s.lambda4));
    return solve_sylvester(a, b, c);
}

// U1,k: Sylvester R_h^{-1} U + U W_h W_h^H =
//       R_h^{-1} (conj(psi) - rho Lambda1 + R_h^{1/2} (U3 + rho Lambda3) W_h^H).
inline std::vector<CMat> pdd_update_u1(const PddState& s, const PddWorkspace& ws) {
    const CMat cp = detail::conj_psi(s);
    std::vector<CMat> out;
    for (std::size_t k = 0; k < s.u1.size(); ++k) {
        const CMat& wh = s.rx.w_h[k];
        const CMat rhs = cp - s.rho * s.lambda1[k] +
                         ws.r_h_sqrt[k] * (s.u3[k] + s.rho * s.lambda3[k]) * wh.adjoint();
        out.push_back(solve_sylvester(ws.r_h_inv[k], wh * wh.adjoint(), ws.r_h_inv[k] * rhs));
    }
    return out;
}

// U2: Sylvester R_G^{-1} U + U W_G W_G^H =
//     R_G^{-1} (conj(psi) (x) I - rho Lambda2 + R_G^{1/2} (U4 + rho Lambda4) W_G^H).
inline CMat pdd_update_u2(const PddState& s, const PddWorkspace& ws) {
    const CMat rhs = detail::conj_psi_kron(s, ws.st.m_b) - s.rho * s.lambda2 +
                     ws.r_g_sqrt * (s.u4 + s.rho * s.lambda4) * s.rx.w_g.adjoint();
    return solve_sylvester(ws.r_g_inv, s.rx.w_g * s.rx.w_g.adjoint(), ws.r_g_inv * rhs);
}

// U3,k closed form:
//   U3 [(1/2rho) I + nu C_d2] =
//     (1/2rho) R_h^{1/2} U1 W_h - Lambda3/2 + nu R_h^{1/2} Diag(s(U4^H R_G^{1/2})).
inline std::vector<CMat> pdd_update_u3(const PddState& s, const PddWorkspace& ws) {
    const RVec c_d2 = detail::pdd_c_d2(s, ws);
    RVec denom = (s.nu * c_d2).array() + 1.0 / (2.0 * s.rho);
    const CVec c_d1 = partial_diag_sum(s.u4.adjoint() * ws.r_g_sqrt, ws.st.m_b);
    std::vector<CMat> out;
    for (std::size_t k = 0; k < s.u3.size(); ++k) {
        const CMat num = (1.0 / (2.0 * s.rho)) * ws.r_h_sqrt[k] * s.u1[k] * s.rx.w_h[k] -
                         0.5 * s.lambda3[k] + s.nu * ws.r_h_sqrt[k] * diag_make(c_d1);
        out.push_back(num * denom.cwiseInverse().cast<Complex>().asDiagonal());
    }
    return out;
}

// U4 closed form:
//   U4 [(1/2rho) I + nu C_d3] = (1/2rho) R_G^{1/2} U2 W_G - Lambda4/2
//     + nu R_G^{1/2} sum_k Ddiag((U3^H R_h^{1/2}) (x) 1).
inline CMat pdd_update_u4(const PddState& s, const PddWorkspace& ws) {
    RVec denom = (s.nu * detail::pdd_c_d3(s, ws)).array() + 1.0 / (2.0 * s.rho);
    CMat num = (1.0 / (2.0 * s.rho)) * ws.r_g_sqrt * s.u2 * s.rx.w_g - 0.5 * s.lambda4;
    for (std::size_t k = 0; k < s.u3.size(); ++k) {
        const CVec d = diag_of(s.u3[k].adjoint() * ws.r_h_sqrt[k]);
        num += s.nu * ws.r_g_sqrt * diag_make(repeat_each(d, ws.st.m_b));
    }
    return num * denom.cwiseInverse().cast<Complex>().asDiagonal();
}

// Phase block: maximize Re{Tr{Q phi}} over unit-modulus phi, solved by
// phi = exp(j angle(Q^H)).
inline CMat pdd_update_phi(const PddState& s, const PddWorkspace& ws) {
    CMat m = block_trace(s.u2.transpose() + s.rho * s.lambda2.transpose(), ws.st.m_b);
    for (std::size_t k = 0; k < s.u1.size(); ++k)
        m += s.u1[k].transpose() + s.rho * s.lambda1[k].transpose();
    const CMat q = s.pilot.p.cast<Complex>().asDiagonal() * m;
    CMat phi(q.cols(), q.rows());
    for (Eigen::Index i = 0; i < phi.rows(); ++i)
        for (Eigen::Index t = 0; t < phi.cols(); ++t)
            phi(i, t) = std::exp(kI * std::arg(std::conj(q(t, i))));
    return phi;
}

// Amplitude block: minimize (K m_r + m_b m_r) ||p||^2 - 2 Re{q^H p} over
// {p >= 0, ||p||^2 <= p_max / m_r}; clamp-then-scale of the unconstrained
// minimizer.
inline RVec pdd_update_p(const PddState& s, const PddWorkspace& ws) {
    CMat m = block_trace(s.u2.transpose() + s.rho * s.lambda2.transpose(), ws.st.m_b);
    for (std::size_t k = 0; k < s.u1.size(); ++k)
        m += s.u1[k].transpose() + s.rho * s.lambda1[k].transpose();
    const RVec q = (m * s.pilot.phi).diagonal().real();
    const double coeff =
        static_cast<double>(s.u1.size()) * ws.st.m_r + ws.st.m_b * ws.st.m_r;
    return project_power(q / coeff, ws.p_max / ws.st.m_r);
}

// ---------------------------------------------------------------------------
// Outer layer

// Max-abs violations of the four copy-constraint groups.
inline std::array<double, 4> pdd_violations(const PddState& s, const PddWorkspace& ws) {
    const CMat cp = detail::conj_psi(s);
    const CMat cpk = detail::conj_psi_kron(s, ws.st.m_b);
    std::array<double, 4> v{0.0, 0.0, 0.0, 0.0};
    for (std::size_t k = 0; k < s.u1.size(); ++k) {
        v[0] = std::max(v[0], (s.u1[k] - cp).cwiseAbs().maxCoeff());
        v[2] = std::max(
            v[2],
            (s.u3[k] - ws.r_h_sqrt[k] * s.u1[k] * s.rx.w_h[k]).cwiseAbs().maxCoeff());
    }
    v[1] = (s.u2 - cpk).cwiseAbs().maxCoeff();
    v[3] = (s.u4 - ws.r_g_sqrt * s.u2 * s.rx.w_g).cwiseAbs().maxCoeff();
    return v;
}

// Per constraint group: dual ascent when its violation is within delta,
// otherwise a penalty shrink (literal per-group policy; single_shrink caps
// the shrinks at one per call).
inline void pdd_outer(PddState& s, const PddWorkspace& ws, const PddConfig& cfg) {
    const std::array<double, 4> v = pdd_violations(s, ws);
    const CMat cp = detail::conj_psi(s);
    const CMat cpk = detail::conj_psi_kron(s, ws.st.m_b);
    bool shrunk = false;
    const auto shrink = [&] {
        if (!cfg.single_shrink || !shrunk) s.rho *= cfg.c_shrink;
        shrunk = true;
    };
    if (v[0] <= cfg.delta) {
        for (std::size_t k = 0; k < s.u1.size(); ++k)
            s.lambda1[k] += (s.u1[k] - cp) / s.rho;
    } else {
        shrink();
    }
    if (v[1] <= cfg.delta) {
        s.lambda2 += (s.u2 - cpk) / s.rho;
    } else {
        shrink();
    }
    if (v[2] <= cfg.delta) {
        for (std::size_t k = 0; k < s.u3.size(); ++k)
            s.lambda3[k] += (s.u3[k] - ws.r_h_sqrt[k] * s.u1[k] * s.rx.w_h[k]) / s.rho;
    } else {
        shrink();
    }
    if (v[3] <= cfg.delta) {
        s.lambda4 += (s.u4 - ws.r_g_sqrt * s.u2 * s.rx.w_g) / s.rho;
    } else {
        shrink();
    }
}

struct PddIterRecord {
    int outer = 0;
    int inner_sweeps = 0;
    double aug_objective = 0.0;
    double true_objective = 0.0;  // raw Theorem-1 objective at current pilot/receivers
    std::array<double, 4> violations{0.0, 0.0, 0.0, 0.0};
    double rho = 0.0;
};

struct PddResult {
    PilotSequence pilot;
    ReceiverSet rx;
    std::vector<double> objective_trace;   // raw objective per outer iteration
    std::vector<double> violation_trace;   // max violation per outer iteration
    std::vector<PddIterRecord> log;
    bool converged = false;
    double scale = 1.0;
};

inline PddState pdd_init(const Scenario& sc, const ChannelStats& st,
                         const PddWorkspace& ws) {
    PddState s;
    s.pilot = dft_pilot(sc.m_r, sc.p_max);
    s.rx = lmmse_receivers(s.pilot, st);
    const CMat cp = detail::conj_psi(s);
    const CMat cpk = detail::conj_psi_kron(s, st.m_b);
    s.u2 = cpk;
    s.u4 = ws.r_g_sqrt * s.u2 * s.rx.w_g;
    s.lambda2 = CMat::Zero(s.u2.rows(), s.u2.cols());
    s.lambda4 = CMat::Zero(s.u4.rows(), s.u4.cols());
    for (int k = 0; k < sc.k_users; ++k) {
        s.u1.push_back(cp);
        s.u3.push_back(ws.r_h_sqrt[k] * cp * s.rx.w_h[k]);
        s.lambda1.push_back(CMat::Zero(cp.rows(), cp.cols()));
        s.lambda3.push_back(CMat::Zero(st.m_r, st.m_r));
    }
    return s;
}

inline PddResult run_pdd(const Scenario& sc, const PddConfig& cfg) {
    cfg.validate();
    sc.validate();
    const ChannelStats st = build_stats(sc);
    const PddWorkspace ws(st, sc.p_max);
    PddState s = pdd_init(sc, st, ws);

    const double s0 = objective_p1(s.pilot, st, s.rx);
    const double scale = s0 > 0.0 ? s0 : 1.0;
    s.nu = 1.0 / (static_cast<double>(sc.k_users) * scale);
    s.rho = cfg.rho0_scale;

    PddResult res;
    res.scale = scale;
    double true_obj = s0;
    res.objective_trace.push_back(true_obj);

    for (int outer = 1; outer <= cfg.outer_max; ++outer) {
        double aug = pdd_augmented_objective(s, ws);
        int sweeps = 0;
        for (int inner = 0; inner < cfg.inner_max; ++inner) {
            s.rx.w_h = pdd_update_wh(s, ws);
            s.rx.w_g = pdd_update_wg(s, ws);
            s.u1 = pdd_update_u1(s, ws);
            s.u2 = pdd_update_u2(s, ws);
            s.u3 = pdd_update_u3(s, ws);
            s.u4 = pdd_update_u4(s, ws);
            s.pilot.phi = pdd_update_phi(s, ws);
            s.pilot.p = pdd_update_p(s, ws);
            ++sweeps;
            const double aug_new = pdd_augmented_objective(s, ws);
            const double rel = std::abs(aug - aug_new) / std::max(std::abs(aug), 1e-300);
            aug = aug_new;
            if (rel < cfg.tol_inner_rel) break;
        }

        const std::array<double, 4> v = pdd_violations(s, ws);
        const double vmax = std::max(std::max(v[0], v[1]), std::max(v[2], v[3]));
        pdd_outer(s, ws, cfg);

        const double prev_obj = true_obj;
        true_obj = objective_p1(s.pilot, st, s.rx);
        res.objective_trace.push_back(true_obj);
        res.violation_trace.push_back(vmax);
        PddIterRecord rec;
        rec.outer = outer;
        rec.inner_sweeps = sweeps;
        rec.aug_objective = aug;
        rec.true_objective = true_obj;
        rec.violations = v;
        rec.rho = s.rho;
        res.log.push_back(rec);

        const double rel_obj =
            std::abs(prev_obj - true_obj) / std::max(std::abs(prev_obj), 1e-300);
        if (vmax < cfg.delta && rel_obj < cfg.tol_rel_obj) {
            res.converged = true;
            break;
        }
    }

    res.pilot = s.pilot;
    res.rx = s.rx;
    return res;
}

}  // namespace ristrain
