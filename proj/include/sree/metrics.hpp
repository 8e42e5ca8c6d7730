// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "channel.hpp"
#include "numerics.hpp"
#include "system_params.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace sree
{
    /// Transmit vector w = sqrt(p) v and RIS reflection vector phi.
    struct BeamformingSolution
    {
        ComplexVec w;
        ComplexVec phi;
        bool unit_modulus = true;

        double power() const { return w.squaredNorm(); }

        ComplexVec direction() const
        {
            const double n = w.norm();
            return n > 0.0 ? ComplexVec(w / n) : ComplexVec(ComplexVec::Unit(w.size(), 0));
        }
    };

    /// Fixed draws c_1..c_T of the backscatter symbol, c ~ CN(0, 1).
    struct SampleSet
    {
        std::vector<cplx> samples;
        std::uint64_t seed = 0;

        std::size_t size() const { return samples.size(); }

        static SampleSet generate(std::size_t t, std::uint64_t seed)
        {
            if (t == 0)
                throw std::invalid_argument("SampleSet: T must be >= 1");
            RngStream rng(seed, 0x53414d50u);
            SampleSet s;
            s.seed = seed;
            s.samples.reserve(t);
            for (std::size_t i = 0; i < t; ++i)
                s.samples.push_back(rng.complex_normal());
            return s;
        }
    };

    struct EEPair
    {
        double ee_pt = 0.0;
        double ee_ris = 0.0;
    };

    inline double log2_1p(double x) { return std::log1p(std::max(x, 0.0)) / std::numbers::ln2; }

    /// h_hat^H w
    inline cplx direct_gain(const DerivedChannel &dc, const ComplexVec &w) { return dc.h_hat.dot(w); }

    /// phi^H M_hat w
    inline cplx backscatter_gain(const DerivedChannel &dc, const ComplexVec &phi, const ComplexVec &w)
    {
        return phi.dot(dc.M_hat * w);
    }

    struct SampleRate
    {
        double mean = 0.0;           // bits/s
        double standard_error = 0.0; // bits/s
    };

    inline SampleRate rate_primary_samples_stats(cplx a, cplx b, const SampleSet &s, const SystemParams &params)
    {
        const std::size_t t = s.size();
        if (t == 0)
            throw std::invalid_argument("rate_primary_samples: empty sample set");
        double sum = 0.0, sum2 = 0.0;
        for (const cplx &c : s.samples)
        {
            const double r = log2_1p(std::norm(a + c * b));
            sum += r;
            sum2 += r * r;
        }
        const double mean = sum / double(t);
        const double var = t > 1 ? std::max(0.0, (sum2 - double(t) * mean * mean) / double(t - 1)) : 0.0;
        return {params.bandwidth_hz * mean, params.bandwidth_hz * std::sqrt(var / double(t))};
    }

    /// (B/T) sum_t log2(1 + |(h_hat^H + phi^H M_hat c_t) w|^2)
    inline double rate_primary_samples(const DerivedChannel &dc, const BeamformingSolution &sol, const SampleSet &s,
                                       const SystemParams &params)
    {
        return rate_primary_samples_stats(direct_gain(dc, sol.w), backscatter_gain(dc, sol.phi, sol.w), s, params).mean;
    }

    /// B log2(1 + |h_hat^H w|^2 + |phi^H M_hat w|^2)
    inline double rate_primary_upper(const DerivedChannel &dc, const BeamformingSolution &sol,
                                     const SystemParams &params)
    {
        const double g = std::norm(direct_gain(dc, sol.w)) + std::norm(backscatter_gain(dc, sol.phi, sol.w));
        return params.bandwidth_hz * log2_1p(g);
    }

    /// (B/L) log2(1 + L gamma), gamma = |phi^H M_hat w|^2
    inline double rate_secondary_from_gain(double gamma, const SystemParams &params)
    {
        const double l = double(params.spreading_factor);
        return params.bandwidth_hz / l * log2_1p(l * gamma);
    }

    inline double rate_secondary(const DerivedChannel &dc, const BeamformingSolution &sol, const SystemParams &params)
    {
        return rate_secondary_from_gain(std::norm(backscatter_gain(dc, sol.phi, sol.w)), params);
    }

    inline double ee_pt(double rate, const BeamformingSolution &sol, const SystemParams &params)
    {
        const double denom = params.amplifier_inefficiency * sol.power() + params.circuit_power_w;
        if (!(denom > 0.0))
            throw std::domain_error("ee_pt: zero power consumption");
        return rate / denom;
    }

    inline double ee_ris(double rate, const SystemParams &params) { return rate / params.ris_power_w(); }

    inline EEPair ee_pair_samples(const DerivedChannel &dc, const BeamformingSolution &sol, const SampleSet &s,
                                  const SystemParams &params)
    {
        return {ee_pt(rate_primary_samples(dc, sol, s, params), sol, params),
                ee_ris(rate_secondary(dc, sol, params), params)};
    }

    inline EEPair ee_pair_upper(const DerivedChannel &dc, const BeamformingSolution &sol, const SystemParams &params)
    {
        return {ee_pt(rate_primary_upper(dc, sol, params), sol, params),
                ee_ris(rate_secondary(dc, sol, params), params)};
    }
}
