#pragma once

// Conventional cascaded-channel training baseline: uplink orthogonal user
// pilots against a DFT phase schedule at the RIS, LMMSE/LS estimation of the
// cascaded channel, and the matching closed-form NMSE.

#include "ristrain/channel.hpp"
#include "ristrain/estimation.hpp"
#include "ristrain/linalg.hpp"

#include <cmath>
#include <vector>

namespace ristrain {

struct CscdPilot {
    CMat phi_p;  // m_r x t DFT phase schedule, columns unit modulus
    CMat z;      // k x k user pilots, Z^H Z = p_max I
};

// DFT phase schedule plus scaled-DFT user pilots.
inline CscdPilot cscd_pilot(int m_r, int k_users, double p_max) {
    if (m_r < 1 || k_users < 1) throw std::invalid_argument("cscd_pilot: bad dimensions");
    if (!(p_max > 0.0)) throw std::invalid_argument("cscd_pilot: p_max must be > 0");
    CscdPilot out;
    out.phi_p.resize(m_r, m_r);
    for (int i = 0; i < m_r; ++i)
        for (int j = 0; j < m_r; ++j)
            out.phi_p(i, j) = std::exp(-kI * (2.0 * M_PI * i * j / m_r));
    out.z.resize(k_users, k_users);
    const double amp = std::sqrt(p_max / k_users);
    for (int i = 0; i < k_users; ++i)
        for (int j = 0; j < k_users; ++j)
            out.z(i, j) = amp * std::exp(-kI * (2.0 * M_PI * i * j / k_users));
    return out;
}

// Per-slot despread observation for user k:
//   y(t) = Y(t) conj(z_k),  Y(t) = sum_j H_c,j phi_p(:,t) z_j^T + N(t),
// stacked over slots. noise_slots holds the T raw m_b x k noise matrices.
inline CVec cscd_receive(const CscdPilot& pilot, const CMat& g, const std::vector<CVec>& h,
                         const std::vector<CMat>& noise_slots, int k) {
    const Eigen::Index t = pilot.phi_p.cols();
    const Eigen::Index m_b = g.rows();
    if (noise_slots.size() != static_cast<std::size_t>(t))
        throw std::invalid_argument("cscd_receive: need one noise matrix per slot");
    if (k < 0 || static_cast<std::size_t>(k) >= h.size())
        throw std::invalid_argument("cscd_receive: user index out of range");
    std::vector<CMat> h_c;
    for (const CVec& hk : h) h_c.push_back(cascaded_channel(g, hk));
    CVec y(t * m_b);
    for (Eigen::Index slot = 0; slot < t; ++slot) {
        CMat y_slot = noise_slots[slot];
        for (std::size_t j = 0; j < h.size(); ++j)
            y_slot.noalias() +=
                (h_c[j] * pilot.phi_p.col(slot)) * pilot.z.col(j).transpose();
        y.segment(slot * m_b, m_b) = y_slot * pilot.z.col(k).conjugate();
    }
    return y;
}

// LMMSE error covariance of the cascaded estimate:
//   C = R - R A^H (A R A^H + (sigma_b^2/p_max) I)^{-1} A R,  A = phi_p^T (x) I.
inline CMat cscd_lmmse_mse(const ChannelStats& st, double p_max, int k) {
    const CMat r = cascaded_covariance(st, k);
    CMat phi_p(st.m_r, st.m_r);
    for (int i = 0; i < st.m_r; ++i)
        for (int j = 0; j < st.m_r; ++j)
            phi_p(i, j) = std::exp(-kI * (2.0 * M_PI * i * j / st.m_r));
    const CMat a = kron(phi_p.transpose(), CMat::Identity(st.m_b, st.m_b));
    const double sigma_b_sq = st.sigma_b_mat(0, 0).real();
    const CMat inner = hermitize(a * r * a.adjoint()) +
                       (sigma_b_sq / p_max) * CMat::Identity(a.rows(), a.rows());
    return hermitize(r - r * a.adjoint() * solve_hpd(inner, a * r));
}

// LS error covariance: (sigma_b^2/(m_r p_max)) I of dimension m_b*m_r.
inline CMat cscd_ls_mse(int m_b, int m_r, double sigma_b_sq, double p_max) {
    if (m_b < 1 || m_r < 1 || !(sigma_b_sq > 0.0) || !(p_max > 0.0))
        throw std::invalid_argument("cscd_ls_mse: bad parameters");
    return (sigma_b_sq / (m_r * p_max)) * CMat::Identity(m_b * m_r, m_b * m_r);
}

enum class CscdScheme { lmmse, ls };

// Closed-form NMSE under i.i.d. Rayleigh statistics and DFT scheduling.
inline double cscd_closed_form_nmse(CscdScheme scheme, const ClosedFormParams& q) {
    q.validate();
    const double x = q.rho_g * q.rho_h * q.m_r * q.p_max;
    if (scheme == CscdScheme::lmmse) return q.sigma_b_sq / (x + q.sigma_b_sq);
    return q.sigma_b_sq / x;
}

// Minimum pilot overhead of the baseline: m_r + max{k-1, (k-1) ceil(m_r/m_b)}.
inline long cscd_pilot_overhead(int m_r, int k_users, int m_b) {
    if (m_r < 1 || k_users < 1 || m_b < 1)
        throw std::invalid_argument("cscd_pilot_overhead: bad dimensions");
    const long ceil_ratio = (m_r + m_b - 1) / m_b;
    const long a = static_cast<long>(k_users - 1);
    return m_r + std::max(a, a * ceil_ratio);
}

}  // namespace ristrain
