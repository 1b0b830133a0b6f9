#pragma once

// RIS-transmitting training: pilot structures, measurement matrices, LMMSE/LS
// receivers, the exact cascaded-estimate MSE matrix, closed-form NMSE under
// DFT pilots with i.i.d. Rayleigh statistics, and Monte-Carlo estimation.

#include "ristrain/channel.hpp"
#include "ristrain/linalg.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace ristrain {

// Pilot transmitted from the RIS over T slots: column t of psi() is
// p[t] * phi(:,t) with |phi(i,t)| = 1.
struct PilotSequence {
    CMat phi;  // m_r x t, unit modulus
    RVec p;    // length t, nonnegative per-slot amplitudes

    Eigen::Index m_r() const { return phi.rows(); }
    Eigen::Index t() const { return phi.cols(); }
    CMat psi() const { return phi * p.asDiagonal(); }

    void validate(double p_max) const {
        if (phi.cols() != p.size())
            throw std::invalid_argument("PilotSequence: phi/p size mismatch");
        if (((phi.cwiseAbs().array() - 1.0).abs() > 1e-12).any())
            throw std::invalid_argument("PilotSequence: phi entries must be unit modulus");
        if ((p.array() < 0.0).any())
            throw std::invalid_argument("PilotSequence: amplitudes must be nonnegative");
        const double power = static_cast<double>(phi.rows()) * p.squaredNorm();
        if (power > p_max + 1e-9)
            throw std::invalid_argument("PilotSequence: power budget exceeded");
    }
};

struct ReceiverSet {
    CMat w_g;                // (t*m_b) x (m_r*m_b)
    std::vector<CMat> w_h;   // K matrices, t x m_r
};

struct MseReport {
    std::vector<double> mse;    // per-user E ||H_c - H_c_hat||_F^2
    std::vector<double> nmse;   // mse / trace(R_Hc)
    std::string method;         // "analytic" | "monte-carlo"
    long trials = 0;
    std::vector<double> se;     // standard error of mse (monte-carlo only)
};

// DFT phase matrix with uniform amplitudes sqrt(p_max)/m_r; satisfies
// psi psi^H = (p_max/m_r) I and ||psi||_F^2 = p_max.
inline PilotSequence dft_pilot(int m_r, double p_max) {
    if (m_r < 1) throw std::invalid_argument("dft_pilot: m_r must be >= 1");
    if (!(p_max > 0.0)) throw std::invalid_argument("dft_pilot: p_max must be > 0");
    PilotSequence out;
    out.phi.resize(m_r, m_r);
    for (int i = 0; i < m_r; ++i)
        for (int j = 0; j < m_r; ++j)
            out.phi(i, j) = std::exp(-kI * (2.0 * M_PI * i * j / m_r));
    out.p = RVec::Constant(m_r, std::sqrt(p_max) / m_r);
    return out;
}

// A_G(psi) = psi^T (x) I_{m_b}: maps vec(G) to vec(G psi).
inline CMat measurement_matrix(const PilotSequence& pilot, int m_b) {
    return kron(pilot.psi().transpose(), CMat::Identity(m_b, m_b));
}

// Training-noise covariance of vec(N_B) when each slot has covariance
// sigma_b_mat: I_T (x) Sigma_B.
inline CMat training_noise_cov(const ChannelStats& st, Eigen::Index t) {
    return kron(CMat::Identity(t, t), st.sigma_b_mat);
}

// Per-link LMMSE receivers:
//   W_G  = (A R_G A^H + I (x) Sigma_B)^{-1} A R_G
//   W_hk = (psi^T R_hk psi^* + sigma_uk^2 I)^{-1} psi^T R_hk
inline ReceiverSet lmmse_receivers(const PilotSequence& pilot, const ChannelStats& st) {
    const CMat psi = pilot.psi();
    const CMat a = measurement_matrix(pilot, st.m_b);
    ReceiverSet rx;
    rx.w_g = solve_hpd(hermitize(a * st.r_g * a.adjoint()) + training_noise_cov(st, pilot.t()),
                       a * st.r_g);
    for (std::size_t k = 0; k < st.r_h.size(); ++k) {
        const CMat s = hermitize(psi.transpose() * st.r_h[k] * psi.conjugate()) +
                       st.sigma_u_sq[k] * CMat::Identity(pilot.t(), pilot.t());
        rx.w_h.push_back(solve_hpd(s, psi.transpose() * st.r_h[k]));
    }
    return rx;
}

// Least-squares receivers W_G = A (A^H A)^{-1}, W_hk = psi^T (psi^* psi^T)^{-1};
// both satisfy the unbiasedness identities W^H A = I. Requires cond(psi) <= 1e8.
inline ReceiverSet ls_receivers(const PilotSequence& pilot, int m_b, int k_users) {
    const CMat psi = pilot.psi();
    Eigen::JacobiSVD<CMat> svd(psi);
    const double smin = svd.singularValues().minCoeff();
    const double cond = smin > 0.0 ? svd.singularValues().maxCoeff() / smin
                                   : std::numeric_limits<double>::infinity();
    if (!(cond <= 1e8)) {
        std::ostringstream os;
        os << "ls_receivers: pilot condition number " << cond << " exceeds 1e8";
        throw std::runtime_error(os.str());
    }
    const CMat a = measurement_matrix(pilot, m_b);
    ReceiverSet rx;
    rx.w_g = a * solve_hpd(hermitize(a.adjoint() * a), CMat::Identity(a.cols(), a.cols()));
    const CMat wh = psi.transpose() *
                    solve_hpd(hermitize(psi.conjugate() * psi.transpose()),
                              CMat::Identity(psi.rows(), psi.rows()));
    for (int k = 0; k < k_users; ++k) rx.w_h.push_back(wh);
    return rx;
}

struct EstimateCovariances {
    CMat c_g_hat;                // covariance of g_hat
    std::vector<CMat> c_h_hat;   // covariance of h_hat,k
};

// C_Ghat = W^H (A R_G A^H + I (x) Sigma_B) W,
// C_hhat,k = W_hk^H (psi^T R_hk psi^* + sigma_uk^2 I) W_hk.
inline EstimateCovariances estimate_covariances(const PilotSequence& pilot,
                                                const ChannelStats& st,
                                                const ReceiverSet& rx) {
    const CMat psi = pilot.psi();
    const CMat a = measurement_matrix(pilot, st.m_b);
    EstimateCovariances out;
    const CMat omega = hermitize(a * st.r_g * a.adjoint()) + training_noise_cov(st, pilot.t());
    out.c_g_hat = rx.w_g.adjoint() * omega * rx.w_g;
    for (std::size_t k = 0; k < st.r_h.size(); ++k) {
        const CMat s = hermitize(psi.transpose() * st.r_h[k] * psi.conjugate()) +
                       st.sigma_u_sq[k] * CMat::Identity(pilot.t(), pilot.t());
        out.c_h_hat.push_back(rx.w_h[k].adjoint() * s * rx.w_h[k]);
    }
    return out;
}

// Exact error covariance of vec(H_c,k - G_hat Diag(h_hat,k)):
//   C = R_G . (R_hk (x) 1) + C_Ghat . (C_hhat,k (x) 1) - X - X^H,
//   X = (R_G A^H W_G) . ((R_hk psi^* W_hk) (x) 1),
// with "." the Hadamard product and 1 the all-ones m_b x m_b block.
// Symmetrized to (C + C^H)/2 before returning.
inline CMat mse_matrix(const PilotSequence& pilot, const ChannelStats& st,
                       const ReceiverSet& rx, int k) {
    const CMat psi = pilot.psi();
    const CMat a = measurement_matrix(pilot, st.m_b);
    const CMat ones = CMat::Ones(st.m_b, st.m_b);
    const EstimateCovariances cov = estimate_covariances(pilot, st, rx);

    const CMat term1 = st.r_g.cwiseProduct(kron(st.r_h[k], ones));
    const CMat term2 = cov.c_g_hat.cwiseProduct(kron(cov.c_h_hat[k], ones));
    const CMat cross = (st.r_g * a.adjoint() * rx.w_g)
                           .cwiseProduct(kron(st.r_h[k] * psi.conjugate() * rx.w_h[k], ones));
    return hermitize(term1 + term2 - cross - cross.adjoint());
}

// (P1) objective: mean over users of trace of the error covariance.
inline double objective_p1(const PilotSequence& pilot, const ChannelStats& st,
                           const ReceiverSet& rx) {
    double acc = 0.0;
    for (std::size_t k = 0; k < st.r_h.size(); ++k)
        acc += mse_matrix(pilot, st, rx, static_cast<int>(k)).trace().real();
    return acc / static_cast<double>(st.r_h.size());
}

enum class RisTxScheme { lmmse, ls };

struct ClosedFormParams {
    double rho_g = 0.0;
    double rho_h = 0.0;
    double sigma_b_sq = 0.0;
    double sigma_u_sq = 0.0;
    double m_r = 0.0;
    double m_b = 0.0;
    double p_max = 0.0;

    void validate() const {
        if (!(rho_g > 0.0 && rho_h > 0.0 && sigma_b_sq > 0.0 && sigma_u_sq > 0.0 &&
              m_r >= 1.0 && m_b >= 1.0 && p_max > 0.0))
            throw std::invalid_argument("ClosedFormParams: all parameters must be positive");
    }
};

// Closed-form NMSE of the RIS-TX scheme under DFT pilots with uniform power
// and i.i.d. Rayleigh statistics. The LMMSE trace per cascaded entry is
// rho_g rho_h - c_g c_h with c_g = rho_g^2 P/(rho_g P + sigma_b^2 M_R) and
// c_h defined symmetrically; LS substitutes the pseudo-inverse error powers.
inline double closed_form_nmse(RisTxScheme scheme, const ClosedFormParams& q) {
    q.validate();
    const double p = q.p_max, m = q.m_r;
    if (scheme == RisTxScheme::lmmse) {
        const double cg = q.rho_g * p / (q.rho_g * p + q.sigma_b_sq * m);
        const double ch = q.rho_h * p / (q.rho_h * p + q.sigma_u_sq * m);
        return 1.0 - cg * ch;
    }
    const double num = q.rho_h * q.sigma_b_sq * m * p + q.rho_g * q.sigma_u_sq * m * p +
                       q.sigma_b_sq * q.sigma_u_sq * m * m;
    return num / (p * p * q.rho_g * q.rho_h);
}

// trace(R_Hc,k): the NMSE normalizer. Equals rho_g rho_h m_b m_r whenever the
// correlation factors have unit diagonal.
inline double cascaded_trace(const ChannelStats& st, int k) {
    if (st.has_factors) return cascaded_covariance(st, k).trace().real();
    return st.rho_g * st.rho_h[k] * st.m_b * st.m_r;
}

// Monte-Carlo run of the training protocol: per trial draw channels and
// noises, form the observations, apply the receivers, and accumulate the
// cascaded estimation error per user. Trial t uses the derived stream
// (seed, t), so the aggregate is independent of evaluation order.
inline MseReport simulate_training(const PilotSequence& pilot, const ChannelStats& st,
                                   const ReceiverSet& rx, std::uint64_t seed, long trials) {
    if (trials < 1) throw std::invalid_argument("simulate_training: trials must be >= 1");
    const CMat psi = pilot.psi();
    const Eigen::Index t = pilot.t();
    const std::size_t nu = st.r_h.size();
    const CMat sigma_b_sqrt = matrix_sqrt_psd(st.sigma_b_mat);

    std::vector<double> sum(nu, 0.0), sumsq(nu, 0.0);
    for (long trial = 0; trial < trials; ++trial) {
        CounterRng rng = CounterRng(seed, static_cast<std::uint64_t>(trial));
        const ChannelDraw ch = sample_channels(st, rng);
        CMat n_b(st.m_b, t);
        for (Eigen::Index col = 0; col < t; ++col)
            n_b.col(col) = sigma_b_sqrt * sample_unit_cgauss(st.m_b, rng);
        const CMat y_b = ch.g * psi + n_b;
        const CVec g_hat = rx.w_g.adjoint() * vec(y_b);
        const CMat g_hat_mat = unvec(g_hat, st.m_b, st.m_r);
        for (std::size_t k = 0; k < nu; ++k) {
            const CVec y_u =
                psi.transpose() * ch.h[k] +
                std::sqrt(st.sigma_u_sq[k]) * sample_unit_cgauss(t, rng);
            const CVec h_hat = rx.w_h[k].adjoint() * y_u;
            const double err =
                (cascaded_channel(ch.g, ch.h[k]) - cascaded_channel(g_hat_mat, h_hat))
                    .squaredNorm();
            sum[k] += err;
            sumsq[k] += err * err;
        }
    }

    MseReport rep;
    rep.method = "monte-carlo";
    rep.trials = trials;
    for (std::size_t k = 0; k < nu; ++k) {
        const double mean = sum[k] / static_cast<double>(trials);
        const double var =
            trials > 1 ? std::max(0.0, (sumsq[k] - static_cast<double>(trials) * mean * mean) /
                                           (static_cast<double>(trials) - 1.0))
                       : 0.0;
        rep.mse.push_back(mean);
        rep.se.push_back(std::sqrt(var / static_cast<double>(trials)));
        rep.nmse.push_back(mean / cascaded_trace(st, static_cast<int>(k)));
    }
    return rep;
}

// Analytic counterpart of simulate_training via the exact error covariance.
inline MseReport analytic_report(const PilotSequence& pilot, const ChannelStats& st,
                                 const ReceiverSet& rx) {
    MseReport rep;
    rep.method = "analytic";
    for (std::size_t k = 0; k < st.r_h.size(); ++k) {
        const double mse = mse_matrix(pilot, st, rx, static_cast<int>(k)).trace().real();
        rep.mse.push_back(mse);
        rep.nmse.push_back(mse / cascaded_trace(st, static_cast<int>(k)));
    }
    return rep;
}

}  // namespace ristrain
