#pragma once

// Block-coordinate descent on the training-MSE objective: closed-form
// receiver updates, gradient descent on the pilot phases, and projected
// gradient descent on the per-slot amplitudes. Feasibility of the pilot is
// maintained at every step.

#include "ristrain/channel.hpp"
#include "ristrain/estimation.hpp"
#include "ristrain/linalg.hpp"

#include <cmath>
#include <vector>

namespace ristrain {

struct GdConfig {
    int max_outer_iters = 500;
    int inner_gd_iters = 20;   // per outer sweep, for phases and amplitudes each
    enum class StepRule { backtracking, constant };
    StepRule step_rule = StepRule::backtracking;
    double eta = 1.0;          // constant-step size
    double step0 = 1.0;        // initial backtracking step
    double beta = 0.5;         // backtracking shrink factor
    double c1 = 1e-4;          // Armijo slope fraction
    double tol_rel_obj = 1e-6;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(eta > 0.0) || !(beta > 0.0 && beta < 1.0) || !(c1 > 0.0 && c1 < 1.0) ||
            !(tol_rel_obj > 0.0) || max_outer_iters < 1 || inner_gd_iters < 0)
            throw std::invalid_argument("GdConfig: invalid parameters");
    }
};

namespace detail {

// Wirtinger carrier of the objective with respect to the pilot matrix X = psi:
// d objective = (2/K) Re{ sum_it carrier(i,t) dX(i,t) }. Assembled with the
// per-block diagonal-sum and block-trace compressions so no derivative of a
// Hadamard product is ever formed explicitly.
inline CMat pilot_carrier(const PilotSequence& pilot, const ChannelStats& st,
                          const ReceiverSet& rx) {
    const CMat x = pilot.psi();
    const CMat xc = x.conjugate();
    const Eigen::Index m_b = st.m_b;
    const CMat xc_kron = kron(xc, CMat::Identity(m_b, m_b));  // = A^H
    const CMat e = st.r_g * xc_kron * rx.w_g;                 // R_G A^H W_G
    const CVec s_e = partial_diag_sum(e, m_b);
    const EstimateCovariances cov = estimate_covariances(pilot, st, rx);
    const CVec s_cg = partial_diag_sum(cov.c_g_hat, m_b);

    CMat carrier = CMat::Zero(x.rows(), x.cols());
    for (std::size_t k = 0; k < st.r_h.size(); ++k) {
        const CMat& wh = rx.w_h[k];
        const CMat& rh = st.r_h[k];
        // T2 through C_hhat: R_h conj(X) W_h Diag(s(C_Ghat)) W_h^H
        carrier += rh * xc * wh * s_cg.asDiagonal() * wh.adjoint();
        // T2 through C_Ghat: blocktrace(E Ddiag(C_hhat (x) 1) W_G^H)
        const CMat dh = diag_make(repeat_each(diag_of(cov.c_h_hat[k]), m_b));
        carrier += block_trace(e * dh * rx.w_g.adjoint(), m_b);
        // Cross term -2 Re{S}: carrier -= conj(dS/d conj(X))
        const CMat rxw = rh * xc * wh;
        const CMat dc = diag_make(repeat_each(diag_of(rxw), m_b));
        const CMat ds = rh.transpose() * s_e.asDiagonal() * wh.transpose() +
                        block_trace(rx.w_g * dc * st.r_g, m_b).transpose();
        carrier -= ds.conjugate();
    }
    return carrier / static_cast<double>(st.r_h.size());
}

}  // namespace detail

// Gradient of the objective with respect to the phase matrix Theta,
// phi = exp(j Theta) entrywise.
inline RMat grad_theta(const PilotSequence& pilot, const ChannelStats& st,
                       const ReceiverSet& rx) {
    const CMat carrier = detail::pilot_carrier(pilot, st, rx);
    const CMat scaled = carrier * pilot.p.asDiagonal();
    return 2.0 * (kI * scaled.cwiseProduct(pilot.phi)).real();
}

// Gradient of the objective with respect to the amplitude vector p.
inline RVec grad_p(const PilotSequence& pilot, const ChannelStats& st,
                   const ReceiverSet& rx) {
    const CMat carrier = detail::pilot_carrier(pilot, st, rx);
    return 2.0 * carrier.cwiseProduct(pilot.phi).colwise().sum().real().transpose();
}

// Euclidean projection onto {x >= 0, ||x||^2 <= budget}: clamp negatives,
// then rescale onto the sphere only if the clamped norm exceeds the budget.
inline RVec project_power(const RVec& p, double budget) {
    if (!(budget > 0.0)) throw std::invalid_argument("project_power: budget must be > 0");
    RVec out = p.cwiseMax(0.0);
    const double nsq = out.squaredNorm();
    if (nsq > budget) out *= std::sqrt(budget / nsq);
    return out;
}

namespace detail {

// Zero diagonal entries are lifted to 1e-12 * (max diagonal); an all-zero
// diagonal is a genuine singularity.
inline RVec regularize_diagonal(RVec d, const char* who) {
    const double dmax = d.maxCoeff();
    if (!(dmax > 0.0)) throw std::runtime_error(std::string(who) + ": singular diagonal");
    for (Eigen::Index i = 0; i < d.size(); ++i)
        if (d(i) == 0.0) d(i) = 1e-12 * dmax;
    return d;
}

}  // namespace detail

// Jointly-optimal BS receiver given the user receivers:
// W_G = (A R_G A^H + I (x) Sigma_B)^{-1} A R_G D_1 D_2^{-1} with diagonal
// matrices built from the per-user partial traces.
inline CMat update_wg(const PilotSequence& pilot, const ChannelStats& st,
                      const std::vector<CMat>& w_h) {
    const CMat psi = pilot.psi();
    const CMat a = measurement_matrix(pilot, st.m_b);
    const CMat omega = hermitize(a * st.r_g * a.adjoint()) + training_noise_cov(st, pilot.t());
    const CMat j_g = solve_hpd(omega, a * st.r_g);
    CVec d1 = CVec::Zero(st.m_b * st.m_r);
    RVec d2 = RVec::Zero(st.m_b * st.m_r);
    for (std::size_t k = 0; k < st.r_h.size(); ++k) {
        d1 += repeat_each(diag_of(w_h[k].adjoint() * psi.transpose() * st.r_h[k]), st.m_b);
        const CMat s = hermitize(psi.transpose() * st.r_h[k] * psi.conjugate()) +
                       st.sigma_u_sq[k] * CMat::Identity(pilot.t(), pilot.t());
        d2 += repeat_each(diag_of(w_h[k].adjoint() * s * w_h[k]), st.m_b).real();
    }
    d2 = detail::regularize_diagonal(d2, "update_wg");
    return j_g * d1.asDiagonal() * d2.cwiseInverse().cast<Complex>().asDiagonal();
}

// Jointly-optimal user receivers given the BS receiver:
// W_hk = (psi^T R_hk psi^* + sigma^2 I)^{-1} psi^T R_hk D_1 D_2^{-1}.
inline std::vector<CMat> update_wh(const PilotSequence& pilot, const ChannelStats& st,
                                   const CMat& w_g) {
    const CMat psi = pilot.psi();
    const CMat a = measurement_matrix(pilot, st.m_b);
    const CMat e = st.r_g * a.adjoint() * w_g;
    const CVec d1 = partial_diag_sum(e, st.m_b).conjugate();
    const CMat omega = hermitize(a * st.r_g * a.adjoint()) + training_noise_cov(st, pilot.t());
    RVec d2 = partial_diag_sum(w_g.adjoint() * omega * w_g, st.m_b).real();
    d2 = detail::regularize_diagonal(d2, "update_wh");
    const CMat scale = d1.asDiagonal() * d2.cwiseInverse().cast<Complex>().asDiagonal();
    std::vector<CMat> out;
    for (std::size_t k = 0; k < st.r_h.size(); ++k) {
        const CMat s = hermitize(psi.transpose() * st.r_h[k] * psi.conjugate()) +
                       st.sigma_u_sq[k] * CMat::Identity(pilot.t(), pilot.t());
        out.push_back(solve_hpd(s, psi.transpose() * st.r_h[k]) * scale);
    }
    return out;
}

struct GdIterRecord {
    int iter = 0;
    double objective = 0.0;      // raw trace objective
    double step_theta = 0.0;     // last accepted step in the phase block
    double step_p = 0.0;         // last accepted step in the amplitude block
    double feas_power = 0.0;     // ||psi||_F^2 - p_max (<= 0 when feasible)
    double feas_modulus = 0.0;   // max | |phi_ij| - 1 |
};

struct GdResult {
    PilotSequence pilot;
    ReceiverSet rx;
    std::vector<double> objective_trace;  // raw objective per outer iteration
    std::vector<GdIterRecord> log;
    bool converged = false;
    double scale = 1.0;  // normalizer s0 (initial objective)
};

// Block order per sweep: W_G, W_h, phases, amplitudes. The objective used
// internally is objective_p1 / s0 so step sizes and tolerances are
// scale-free; the recorded trace is raw.
inline GdResult run_gd(const Scenario& sc, const GdConfig& cfg) {
    cfg.validate();
    sc.validate();
    const ChannelStats st = build_stats(sc);
    const double budget = sc.p_max / sc.m_r;

    GdResult res;
    res.pilot = dft_pilot(sc.m_r, sc.p_max);
    RMat theta = res.pilot.phi.array().arg().matrix();
    res.rx = lmmse_receivers(res.pilot, st);

    const double s0 = objective_p1(res.pilot, st, res.rx);
    res.scale = s0 > 0.0 ? s0 : 1.0;
    const auto fval = [&](const PilotSequence& pl) {
        return objective_p1(pl, st, res.rx) / res.scale;
    };

    double obj = s0 / res.scale;
    res.objective_trace.push_back(obj * res.scale);
    const bool backtrack = cfg.step_rule == GdConfig::StepRule::backtracking;

    for (int iter = 1; iter <= cfg.max_outer_iters; ++iter) {
        res.rx.w_g = update_wg(res.pilot, st, res.rx.w_h);
        res.rx.w_h = update_wh(res.pilot, st, res.rx.w_g);

        GdIterRecord rec;
        rec.iter = iter;

        double f_cur = fval(res.pilot);
        for (int i = 0; i < cfg.inner_gd_iters; ++i) {
            const RMat g = grad_theta(res.pilot, st, res.rx) / res.scale;
            const double gnorm_sq = g.squaredNorm();
            if (!(gnorm_sq > 0.0)) break;
            if (!backtrack) {
                theta -= cfg.eta * g;
                res.pilot.phi = (kI * theta.cast<Complex>().array()).exp().matrix();
                f_cur = fval(res.pilot);
                rec.step_theta = cfg.eta;
                continue;
            }
            double t = cfg.step0;
            bool accepted = false;
            for (int bt = 0; bt < 60; ++bt) {
                PilotSequence cand = res.pilot;
                const RMat theta_cand = theta - t * g;
                cand.phi = (kI * theta_cand.cast<Complex>().array()).exp().matrix();
                const double f_new = fval(cand);
                if (f_new <= f_cur - cfg.c1 * t * gnorm_sq) {
                    theta = theta_cand;
                    res.pilot = cand;
                    f_cur = f_new;
                    rec.step_theta = t;
                    accepted = true;
                    break;
                }
                t *= cfg.beta;
            }
            if (!accepted) break;  // already at line-search resolution
        }

        for (int i = 0; i < cfg.inner_gd_iters; ++i) {
            const RVec g = grad_p(res.pilot, st, res.rx) / res.scale;
            if (!backtrack) {
                res.pilot.p = project_power(res.pilot.p - cfg.eta * g, budget);
                f_cur = fval(res.pilot);
                rec.step_p = cfg.eta;
                continue;
            }
            double t = cfg.step0;
            bool accepted = false;
            for (int bt = 0; bt < 60; ++bt) {
                PilotSequence cand = res.pilot;
                cand.p = project_power(res.pilot.p - t * g, budget);
                const double move_sq = (cand.p - res.pilot.p).squaredNorm();
                if (!(move_sq > 0.0)) break;
                const double f_new = fval(cand);
                if (f_new <= f_cur - cfg.c1 / t * move_sq) {
                    res.pilot = cand;
                    f_cur = f_new;
                    rec.step_p = t;
                    accepted = true;
                    break;
                }
                t *= cfg.beta;
            }
            if (!accepted) break;
        }

        rec.objective = f_cur * res.scale;
        rec.feas_power = sc.m_r * res.pilot.p.squaredNorm() - sc.p_max;
        rec.feas_modulus = (res.pilot.phi.cwiseAbs().array() - 1.0).abs().maxCoeff();
        res.log.push_back(rec);
        res.objective_trace.push_back(rec.objective);

        const double rel = std::abs(obj - f_cur) / std::max(std::abs(obj), 1e-300);
        obj = f_cur;
        if (rel < cfg.tol_rel_obj) {
            res.converged = true;
            break;
        }
    }
    return res;
}

}  // namespace ristrain
