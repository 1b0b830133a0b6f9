#pragma once

// Scenario configuration, log-distance pathloss, channel covariance
// construction, and random channel sampling.

#include "ristrain/linalg.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace ristrain {

struct Correlation {
    enum class Kind { uncorrelated, exponential };
    Kind kind = Kind::uncorrelated;
    double coeff = 0.0;  // exponential coefficient, 0 <= coeff < 1
};

struct Scenario {
    int m_b = 1;                 // BS antennas
    int m_r = 1;                 // RIS elements; training length T == m_r
    int k_users = 1;
    double p_max = 1.0;          // training power budget [W]
    double d_b = 1.0;            // BS-RIS distance [m]
    std::vector<double> d_u;     // RIS-user distances [m], size k_users
    double sigma_b_sq = 1.0;     // BS noise power per antenna [W]
    double sigma_u_sq = 1.0;     // user noise power [W]
    double gains_db = 5.0;       // combined antenna gain G_t + G_r [dBi]
    Correlation correlation;
    std::uint64_t seed = 0;

    void validate() const {
        if (m_b < 1 || m_r < 1 || k_users < 1)
            throw std::invalid_argument("Scenario: antenna/element/user counts must be >= 1");
        if (!(p_max > 0.0)) throw std::invalid_argument("Scenario: p_max must be > 0");
        if (!(sigma_b_sq > 0.0) || !(sigma_u_sq > 0.0))
            throw std::invalid_argument("Scenario: noise powers must be > 0");
        if (d_b < 1.0) throw std::invalid_argument("Scenario: d_b must be >= 1 m");
        if (d_u.size() != static_cast<std::size_t>(k_users))
            throw std::invalid_argument("Scenario: d_u must have k_users entries");
        for (double d : d_u)
            if (d < 1.0) throw std::invalid_argument("Scenario: d_u entries must be >= 1 m");
        if (correlation.kind == Correlation::Kind::exponential &&
            (correlation.coeff < 0.0 || correlation.coeff >= 1.0))
            throw std::invalid_argument("Scenario: exponential coefficient must be in [0, 1)");
    }
};

// Log-distance pathloss, valid for d >= 1 m:
// gain = 10^((gains_db - 37.5 - 22 log10(d)) / 10).
inline double pathloss_gain(double d, double gains_db) {
    if (d < 1.0) throw std::invalid_argument("pathloss_gain: distance below 1 m");
    return std::pow(10.0, (gains_db - 37.5 - 22.0 * std::log10(d)) / 10.0);
}

inline CMat correlation_matrix(const Correlation& c, Eigen::Index n) {
    CMat r = CMat::Identity(n, n);
    if (c.kind == Correlation::Kind::exponential) {
        if (c.coeff < 0.0 || c.coeff >= 1.0)
            throw std::invalid_argument("correlation_matrix: coefficient must be in [0, 1)");
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                r(i, j) = std::pow(c.coeff, std::abs(static_cast<double>(i - j)));
    }
    return r;
}

struct ChannelStats {
    int m_b = 1;
    int m_r = 1;
    CMat r_g;                      // covariance of vec(G), (m_b*m_r)^2
    std::vector<CMat> r_h;         // per-user covariance of h_k, m_r^2
    CMat sigma_b_mat;              // BS noise covariance per slot, m_b^2
    std::vector<double> sigma_u_sq;
    double rho_g = 0.0;
    std::vector<double> rho_h;
    // Kronecker factors (unit-diagonal) when built from a Scenario.
    bool has_factors = false;
    CMat r_gr, r_gb;               // R_G = rho_g * (r_gr (x) r_gb)
    std::vector<CMat> r_hr;        // R_h,k = rho_h[k] * r_hr[k]
};

inline ChannelStats build_stats(const Scenario& s) {
    s.validate();
    ChannelStats st;
    st.m_b = s.m_b;
    st.m_r = s.m_r;
    st.rho_g = pathloss_gain(s.d_b, s.gains_db);
    st.r_gr = correlation_matrix(s.correlation, s.m_r);
    st.r_gb = correlation_matrix(s.correlation, s.m_b);
    st.r_g = st.rho_g * kron(st.r_gr, st.r_gb);
    st.sigma_b_mat = s.sigma_b_sq * CMat::Identity(s.m_b, s.m_b);
    for (int k = 0; k < s.k_users; ++k) {
        st.rho_h.push_back(pathloss_gain(s.d_u[k], s.gains_db));
        st.r_hr.push_back(correlation_matrix(s.correlation, s.m_r));
        st.r_h.push_back(st.rho_h.back() * st.r_hr.back());
        st.sigma_u_sq.push_back(s.sigma_u_sq);
    }
    st.has_factors = true;
    return st;
}

struct ChannelDraw {
    CMat g;               // m_b x m_r
    std::vector<CVec> h;  // K vectors of length m_r
};

// vec(G) ~ CN(0, r_g), h_k ~ CN(0, r_h[k]), mutually independent.
inline ChannelDraw sample_channels(const ChannelStats& st, CounterRng& rng) {
    ChannelDraw d;
    d.g = unvec(sample_complex_gaussian(st.r_g, rng), st.m_b, st.m_r);
    for (const CMat& rh : st.r_h) d.h.push_back(sample_complex_gaussian(rh, rng));
    return d;
}

// H_c = G Diag(h): column j of G scaled by h(j).
inline CMat cascaded_channel(const CMat& g, const CVec& h) {
    if (g.cols() != h.size())
        throw std::invalid_argument("cascaded_channel: dimension mismatch");
    return g * h.asDiagonal();
}

// Covariance of vec(G Diag(h_k)) = rho_g rho_h,k ((r_hr (x) r_gr) (x) r_gb)
// with (x) the entrywise product on the RIS factor.
inline CMat cascaded_covariance(const ChannelStats& st, int k) {
    if (!st.has_factors)
        throw std::runtime_error("cascaded_covariance: Kronecker factors unavailable");
    if (k < 0 || static_cast<std::size_t>(k) >= st.r_h.size())
        throw std::invalid_argument("cascaded_covariance: user index out of range");
    const CMat ris = st.r_hr[k].cwiseProduct(st.r_gr);
    return st.rho_g * st.rho_h[k] * kron(ris, st.r_gb);
}

}  // namespace ristrain
