// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "channel.hpp"
#include "metrics.hpp"
#include "numerics.hpp"
#include "system_params.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace sree
{
    /// Raised when the cascaded RIS channel M_hat^H phi vanishes.
    class DegenerateLink : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    struct AOTrace
    {
        std::vector<double> objective; // entry 0 is the initial point
        int iterations = 0;
        bool converged = false;
        double kappa = 0.0;

        bool monotone(double slack = 1e-9) const
        {
            for (std::size_t i = 1; i < objective.size(); ++i)
                if (objective[i] < objective[i - 1] - slack * std::max(1.0, std::abs(objective[i - 1])))
                    return false;
            return true;
        }
    };

    struct PhaseResult
    {
        ComplexVec phi;
        double gamma = 0.0; // |phi^H M_hat w| = ||M_hat w||_1
    };

    /// phi_n = x_n / |x_n| with x = M_hat w, i.e. theta_n = -arg(m_n^H w); zero entries get phi_n = 1.
    inline PhaseResult opt_phase(const DerivedChannel &dc, const ComplexVec &w)
    {
        const ComplexVec x = dc.M_hat * w;
        PhaseResult r;
        r.phi.resize(x.size());
        for (Eigen::Index n = 0; n < x.size(); ++n)
        {
            const double a = std::abs(x(n));
            r.phi(n) = a > 0.0 ? x(n) / a : cplx(1.0, 0.0);
            r.gamma += a;
        }
        return r;
    }

    /// Dominant eigenpair of F = h_hat h_hat^H + M_hat^H phi phi^H M_hat
    inline EigPair opt_direction(const DerivedChannel &dc, const ComplexVec &phi)
    {
        return top_eigpair_rank2(dc.h_hat, dc.M_hat.adjoint() * phi);
    }

    /// Maximizer of log2(1 + lambda p) / (mu p + Ps) over [0, Pmax].
    inline double opt_power(double lambda_max, const SystemParams &params)
    {
        if (!(lambda_max >= 0.0))
            throw std::domain_error("opt_power: lambda must be non-negative");
        if (lambda_max == 0.0)
            return 0.0;
        const double mu = params.amplifier_inefficiency;
        const double ps = params.circuit_power_w;
        const double pmax = params.max_power_w;
        if (ps <= 0.0)
            return 1e-6 * pmax;
        const double z = (lambda_max * ps - mu) / (mu * std::numbers::e);
        const double w = lambert_w0(z);
        // equal to (lambda Ps - mu) / (mu lambda W(z)) - 1/lambda, finite at W = 0
        const double p = std::expm1(1.0 + w) / lambda_max;
        return std::clamp(p, 0.0, pmax);
    }

    struct AoOptions
    {
        double kappa = 1e-4;
        int max_iter = 500;
        int restarts = 5;
        std::uint64_t seed = 0;
        bool pin_power_to_max = false; // rate-max benchmark
    };

    struct IndividualResult
    {
        BeamformingSolution solution;
        EEPair ee_upper;
        EEPair ee_sampled;
        AOTrace trace;
    };

    namespace detail
    {
        inline ComplexVec random_phases(Eigen::Index n, RngStream &rng)
        {
            ComplexVec phi(n);
            for (Eigen::Index i = 0; i < n; ++i)
                phi(i) = rng.unit_phase();
            return phi;
        }

        inline bool ao_step_done(AOTrace &trace, double previous, double current, double kappa)
        {
            trace.objective.push_back(current);
            ++trace.iterations;
            const double gain = previous > 0.0 ? (current - previous) / previous
                                               : (current > previous ? std::numeric_limits<double>::infinity() : 0.0);
            return gain < kappa;
        }

        inline IndividualResult finish(const DerivedChannel &dc, BeamformingSolution sol, AOTrace trace,
                                       const SampleSet &s, const SystemParams &params)
        {
            IndividualResult r;
            r.ee_upper = ee_pair_upper(dc, sol, params);
            r.ee_sampled = ee_pair_samples(dc, sol, s, params);
            r.solution = std::move(sol);
            r.trace = std::move(trace);
            return r;
        }
    }

    /// Alternating direction / power / phase updates for the PT energy efficiency (upper-bound rate).
    inline IndividualResult max_ee_pt(const DerivedChannel &dc, const SystemParams &params, const SampleSet &s,
                                      const AoOptions &opt = {})
    {
        if (!(opt.kappa > 0.0))
            throw std::invalid_argument("max_ee_pt: kappa must be positive");
        const double hn = dc.h_hat.norm();
        RngStream rng(opt.seed, 1);

        BeamformingSolution sol;
        sol.phi = detail::random_phases(dc.elements(), rng);
        const ComplexVec v0 = hn > 0.0 ? ComplexVec(dc.h_hat / hn) : ComplexVec(ComplexVec::Unit(dc.antennas(), 0));
        sol.w = std::sqrt(params.max_power_w) * v0;

        auto objective = [&](const BeamformingSolution &x)
        { return ee_pt(rate_primary_upper(dc, x, params), x, params); };

        AOTrace trace;
        trace.kappa = opt.kappa;
        double current = objective(sol);
        trace.objective.push_back(current);

        for (int it = 0; it < opt.max_iter; ++it)
        {
            const EigPair ep = opt_direction(dc, sol.phi);
            const double p = opt.pin_power_to_max ? params.max_power_w : opt_power(ep.value, params);
            sol.w = std::sqrt(p) * ep.vector;
            sol.phi = opt_phase(dc, sol.w).phi;

            const double previous = current;
            current = objective(sol);
            if (detail::ao_step_done(trace, previous, current, opt.kappa))
            {
                trace.converged = true;
                break;
            }
        }
        return detail::finish(dc, std::move(sol), std::move(trace), s, params);
    }

    /// MRT at full power toward M_hat^H phi.
    inline ComplexVec mrt_given_phase(const DerivedChannel &dc, const ComplexVec &phi, double pmax)
    {
        const ComplexVec b = dc.M_hat.adjoint() * phi;
        const double n = b.norm();
        if (!(n > 0.0))
            throw DegenerateLink("mrt_given_phase: cascaded channel M_hat^H phi is zero");
        return (std::sqrt(pmax) / n) * b;
    }

    /// Alternating MRT / phase alignment for the RIS energy efficiency, best of opt.restarts random starts.
    inline IndividualResult max_ee_ris(const DerivedChannel &dc, const SystemParams &params, const SampleSet &s,
                                       const AoOptions &opt = {})
    {
        if (!(opt.kappa > 0.0))
            throw std::invalid_argument("max_ee_ris: kappa must be positive");
        const int restarts = std::max(1, opt.restarts);

        BeamformingSolution best;
        AOTrace best_trace;
        double best_value = -1.0;
        bool any = false;

        for (int r = 0; r < restarts; ++r)
        {
            RngStream rng(opt.seed, 1000u + std::uint64_t(r));
            BeamformingSolution sol;
            sol.phi = detail::random_phases(dc.elements(), rng);
            try
            {
                sol.w = mrt_given_phase(dc, sol.phi, params.max_power_w);
            }
            catch (const DegenerateLink &)
            {
                continue;
            }

            AOTrace trace;
            trace.kappa = opt.kappa;
            double current = std::norm(backscatter_gain(dc, sol.phi, sol.w));
            trace.objective.push_back(current);
            for (int it = 0; it < opt.max_iter; ++it)
            {
                sol.phi = opt_phase(dc, sol.w).phi;
                sol.w = mrt_given_phase(dc, sol.phi, params.max_power_w);
                const double previous = current;
                current = std::norm(backscatter_gain(dc, sol.phi, sol.w));
                if (detail::ao_step_done(trace, previous, current, opt.kappa))
                {
                    trace.converged = true;
                    break;
                }
            }
            if (current > best_value)
            {
                best_value = current;
                best = std::move(sol);
                best_trace = std::move(trace);
                any = true;
            }
        }
        if (!any)
            throw DegenerateLink("max_ee_ris: cascaded channel is zero for every start");
        return detail::finish(dc, std::move(best), std::move(best_trace), s, params);
    }
}
