// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "channel.hpp"
#include "individual.hpp"
#include "metrics.hpp"
#include "numerics.hpp"
#include "parallel.hpp"
#include "system_params.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace sree
{
    /// D~ = M (beta_TR + rho N beta_SR beta_TS) / sigma^2
    inline double hardened_gain(int m, int n, const PathLosses &b, const SystemParams &params)
    {
        return double(m) * (b.tr + params.reflection_efficiency * double(n) * b.sr * b.ts) / params.noise_power_w;
    }

    /// Large-M, large-N Rayleigh limit of the PT energy efficiency at transmit power p.
    inline double ee_pt_asymptotic(double p, int m, int n, const PathLosses &b, const SystemParams &params)
    {
        const double rate = params.bandwidth_hz * log2_1p(p * hardened_gain(m, n, b, params));
        return rate / (params.amplifier_inefficiency * p + params.circuit_power_w);
    }

    inline double opt_power_asymptotic(int m, int n, const PathLosses &b, const SystemParams &params)
    {
        return opt_power(hardened_gain(m, n, b, params), params);
    }

    /// E|x| for x ~ CN(sqrt(beta K/(K+1)) e^{j.}, beta s/(K+1)) with s the correlation scale
    /// (row absolute sum of R in the closed form, 1 for uncorrelated elements).
    inline double rician_envelope_mean(double beta, double k, double row_abs_sum)
    {
        if (!(beta > 0.0) || !(k >= 0.0) || !(row_abs_sum > 0.0))
            throw std::domain_error("rician_envelope_mean: need beta > 0, K >= 0, row_abs_sum > 0");
        return std::sqrt(beta * std::numbers::pi * row_abs_sum / (4.0 * (k + 1.0))) * laguerre_half(-k / row_abs_sum);
    }

    /// Row absolute sums of a correlation matrix.
    inline RealVec row_abs_sums(const ComplexMat &r) { return r.cwiseAbs().rowwise().sum(); }

    /// Large-N SISO limit of the RIS energy efficiency under uncorrelated Rician fading.
    inline double ee_ris_asymptotic_siso(int n, const PathLosses &b, double k2, double k3, const SystemParams &params)
    {
        const double mu_f = rician_envelope_mean(b.sr, k3, 1.0);
        const double mu_g = rician_envelope_mean(b.ts, k2, 1.0);
        const double snr = params.reflection_efficiency * params.spreading_factor * params.max_power_w /
                           params.noise_power_w;
        const double x = double(n) * mu_f * mu_g;
        return params.bandwidth_hz / (params.spreading_factor * n * params.element_power_w) * log2_1p(snr * x * x);
    }

    /// Rayleigh special case, N^2 pi^2 beta_SR beta_TS / 16.
    inline double ee_ris_asymptotic_rayleigh(int n, const PathLosses &b, const SystemParams &params)
    {
        const double snr = params.reflection_efficiency * params.spreading_factor * params.max_power_w /
                           params.noise_power_w;
        const double g = double(n) * double(n) * std::numbers::pi * std::numbers::pi * b.sr * b.ts / 16.0;
        return params.bandwidth_hz / (params.spreading_factor * n * params.element_power_w) * log2_1p(snr * g);
    }

    /// Large-M, large-N Rayleigh limit of the RIS energy efficiency.
    inline double ee_ris_asymptotic_miso(int m, int n, const PathLosses &b, const SystemParams &params)
    {
        const double snr = params.reflection_efficiency * params.spreading_factor * params.max_power_w /
                           params.noise_power_w;
        return params.bandwidth_hz / (params.spreading_factor * n * params.element_power_w) *
               log2_1p(snr * double(m) * double(n) * b.sr * b.ts);
    }

    struct AsymptoticStats
    {
        ComplexVec mu_f;  // N, mean of f_n
        ComplexMat mu_g;  // N x M, mean of g_nm
        RealVec sigma2_f; // N
        RealVec sigma2_g; // N
        double lambda_nc = 0.0;
        double mean_y = 0.0;
        RealVec mean_x_terms; // mu_{f,n} mu_{g,n} envelope products (first antenna)
        double mean_x = 0.0;
    };

    enum class VarianceScale
    {
        row_abs_sum, // sum_r |R_nr|, as in the closed form
        diagonal     // R_nn, the exact marginal variance
    };

    /// Means and variances of f_n^* g_nm and the resulting non-centrality and E[Y], Y = ||f^H Phi G||^2
    /// with Phi = diag(conj(phi)).
    inline AsymptoticStats noncentral_stats(const LosComponents &los, const ChannelConfig &cfg, const ComplexVec &phi,
                                            const PathLosses &b, VarianceScale scale = VarianceScale::row_abs_sum)
    {
        const int n = cfg.N, m = cfg.M;
        if (phi.size() != n || los.f.size() != n || los.G.rows() != n || los.G.cols() != m)
            throw std::invalid_argument("noncentral_stats: dimension mismatch");
        const double k2 = cfg.K2, k3 = cfg.k3();
        const ComplexMat r_sr = cfg.corr_sr.matrix(n);
        const ComplexMat r_ts = cfg.corr_ts.matrix(n);
        const RealVec s_sr = scale == VarianceScale::row_abs_sum ? row_abs_sums(r_sr) : RealVec(r_sr.diagonal().real());
        const RealVec s_ts = scale == VarianceScale::row_abs_sum ? row_abs_sums(r_ts) : RealVec(r_ts.diagonal().real());

        AsymptoticStats st;
        st.mu_f = std::sqrt(b.sr * detail::los_amplitude(k3) * detail::los_amplitude(k3)) * los.f;
        st.mu_g = std::sqrt(b.ts * detail::los_amplitude(k2) * detail::los_amplitude(k2)) * los.G;
        st.sigma2_f = b.sr * detail::nlos_amplitude(k3) * detail::nlos_amplitude(k3) * s_sr;
        st.sigma2_g = b.ts * detail::nlos_amplitude(k2) * detail::nlos_amplitude(k2) * s_ts;

        st.mean_x_terms.resize(n);
        for (int i = 0; i < n; ++i)
        {
            const double ef = std::isinf(k3) ? std::sqrt(b.sr) : rician_envelope_mean(b.sr, k3, s_sr(i));
            const double eg = std::isinf(k2) ? std::sqrt(b.ts) : rician_envelope_mean(b.ts, k2, s_ts(i));
            st.mean_x_terms(i) = ef * eg;
        }
        st.mean_x = st.mean_x_terms.sum();

        for (int j = 0; j < m; ++j)
        {
            cplx mu_m = 0.0;
            double var_m = 0.0;
            for (int i = 0; i < n; ++i)
            {
                mu_m += std::conj(st.mu_f(i)) * st.mu_g(i, j) * std::conj(phi(i));
                var_m += st.sigma2_f(i) * st.sigma2_g(i) + std::norm(st.mu_f(i)) * st.sigma2_g(i) +
                         std::norm(st.mu_g(i, j)) * st.sigma2_f(i);
            }
            st.lambda_nc += std::norm(mu_m);
            st.mean_y += var_m;
        }
        st.mean_y += st.lambda_nc;
        return st;
    }

    struct MonteCarloMean
    {
        double mean = 0.0;
        double standard_error = 0.0;
        std::size_t trials = 0;
    };

    namespace detail
    {
        inline MonteCarloMean summarize(const std::vector<double> &v)
        {
            MonteCarloMean r;
            r.trials = v.size();
            if (v.empty())
                return r;
            double s = 0.0;
            for (double x : v)
                s += x;
            r.mean = s / double(v.size());
            double ss = 0.0;
            for (double x : v)
                ss += (x - r.mean) * (x - r.mean);
            if (v.size() > 1)
                r.standard_error = std::sqrt(ss / double(v.size() - 1) / double(v.size()));
            return r;
        }

        template <class Stat>
        MonteCarloMean monte_carlo(const ChannelSampler &sampler, std::size_t trials, std::uint64_t seed,
                                   unsigned threads, Stat &&stat)
        {
            std::vector<double> values(trials);
            parallel_for(trials, threads, [&](std::size_t t)
                         {
                             RngStream rng(seed, t);
                             values[t] = stat(sampler.sample(rng), rng); });
            return summarize(values);
        }
    }

    /// Empirical mean of X = sum_n |f_n| |g_n1|.
    inline MonteCarloMean mc_envelope_sum(const ChannelSampler &sampler, std::size_t trials, std::uint64_t seed,
                                          unsigned threads = 1)
    {
        return detail::monte_carlo(sampler, trials, seed, threads, [](const ChannelRealization &ch, RngStream &)
                                   { return (ch.f.cwiseAbs().array() * ch.G.col(0).cwiseAbs().array()).sum(); });
    }

    /// Empirical mean of Y = ||f^H Phi G||^2 at a fixed phase vector.
    inline MonteCarloMean mc_cascade_energy(const ChannelSampler &sampler, const ComplexVec &phi, std::size_t trials,
                                            std::uint64_t seed, unsigned threads = 1)
    {
        return detail::monte_carlo(sampler, trials, seed, threads, [&](const ChannelRealization &ch, RngStream &)
                                   { return (ch.G.transpose() * (ch.f.conjugate().array() * phi.conjugate().array()).matrix())
                                         .squaredNorm(); });
    }

    /// Empirical mean of lambda_max(D) / M, D = h h^H + rho G^H Phi^H f f^H Phi G, at random phases.
    inline MonteCarloMean mc_hardened_gain(const ChannelSampler &sampler, double rho, std::size_t trials,
                                           std::uint64_t seed, unsigned threads = 1)
    {
        const int m = sampler.config().M, n = sampler.config().N;
        return detail::monte_carlo(sampler, trials, seed, threads, [=](const ChannelRealization &ch, RngStream &rng)
                                   {
                                       ComplexVec phi(n);
                                       for (int i = 0; i < n; ++i)
                                           phi(i) = rng.unit_phase();
                                       const ComplexVec b = ch.G.adjoint() * (phi.array() * ch.f.array()).matrix();
                                       return top_eigpair_rank2(ch.h, std::sqrt(rho) * b).value / double(m); });
    }

    /// Empirical PT energy efficiency at random phases: dominant direction of D and its optimal power.
    inline MonteCarloMean mc_ee_pt_random_phase(const ChannelSampler &sampler, const SystemParams &params,
                                                std::size_t trials, std::uint64_t seed, unsigned threads = 1)
    {
        const int n = sampler.config().N;
        return detail::monte_carlo(sampler, trials, seed, threads, [&](const ChannelRealization &ch, RngStream &rng)
                                   {
                                       ComplexVec phi(n);
                                       for (int i = 0; i < n; ++i)
                                           phi(i) = rng.unit_phase();
                                       const DerivedChannel dc = derive_normalized(ch, params);
                                       const double lambda = opt_direction(dc, phi).value;
                                       const double p = opt_power(lambda, params);
                                       return params.bandwidth_hz * log2_1p(p * lambda) /
                                              (params.amplifier_inefficiency * p + params.circuit_power_w); });
    }

    /// Empirical RIS energy efficiency, SISO link with optimal phases (gain P rho X^2 / sigma^2).
    inline MonteCarloMean mc_ee_ris_siso(const ChannelSampler &sampler, SystemParams params, std::size_t trials,
                                         std::uint64_t seed, unsigned threads = 1)
    {
        params.elements = sampler.config().N;
        return detail::monte_carlo(sampler, trials, seed, threads, [&](const ChannelRealization &ch, RngStream &)
                                   {
                                       const double x = (ch.f.cwiseAbs().array() * ch.G.col(0).cwiseAbs().array()).sum();
                                       const double gamma = params.reflection_efficiency * params.max_power_w * x * x / params.noise_power_w;
                                       return ee_ris(rate_secondary_from_gain(gamma, params), params); });
    }

    /// Empirical RIS energy efficiency with random phases and MRT toward the cascaded channel.
    inline MonteCarloMean mc_ee_ris_mrt(const ChannelSampler &sampler, SystemParams params, std::size_t trials,
                                        std::uint64_t seed, unsigned threads = 1)
    {
        const int n = sampler.config().N;
        params.elements = n;
        return detail::monte_carlo(sampler, trials, seed, threads, [&](const ChannelRealization &ch, RngStream &rng)
                                   {
                                       ComplexVec phi(n);
                                       for (int i = 0; i < n; ++i)
                                           phi(i) = rng.unit_phase();
                                       const DerivedChannel dc = derive_normalized(ch, params);
                                       BeamformingSolution sol;
                                       sol.phi = phi;
                                       sol.w = mrt_given_phase(dc, phi, params.max_power_w);
                                       return ee_ris(rate_secondary(dc, sol, params), params); });
    }
}
