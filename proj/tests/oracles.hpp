// SPDX-License-Identifier: Apache-2.0
//
// Independent reference solvers shared by the unit tests and the acceptance runner.

#pragma once

#include <sree/convex.hpp>
#include <sree/metrics.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace sree::oracle
{
    // E|X| for X ~ CN(nu, sigma2) by nested adaptive quadrature in polar coordinates.
    inline double rice_mean_quadrature(double nu, double sigma2)
    {
        using boost::math::quadrature::gauss_kronrod;
        auto radial = [&](double r)
        {
            auto angular = [&](double phi)
            { return std::exp(-((r - nu) * (r - nu) + 2.0 * r * nu * (1.0 - std::cos(phi))) / sigma2); };
            const double inner = 2.0 * gauss_kronrod<double, 61>::integrate(angular, 0.0, std::numbers::pi, 15, 1e-15);
            return r * r * inner / (std::numbers::pi * sigma2);
        };
        const double width = 40.0 * std::sqrt(sigma2);
        const double lo = std::max(0.0, nu - width);
        return gauss_kronrod<double, 61>::integrate(radial, lo, nu + width, 15, 1e-14);
    }

    inline ComplexVec random_vec(RngStream &rng, Eigen::Index n, double scale = 1.0)
    {
        return scale * rng.complex_normal_vec(n);
    }

    /// SCA transmit subproblem at w_k with the rate constraint met with fraction `tight` of its slack.
    inline ConvexSubproblem random_transmit(RngStream &rng, int k, int t, double tight)
    {
        const double radius = 0.5 + 2.5 * rng.uniform();
        const ComplexVec h_hat = random_vec(rng, k);
        const ComplexVec h0 = random_vec(rng, k, 0.3 + rng.uniform());
        ComplexVec w_k = random_vec(rng, k);
        w_k *= radius * (0.2 + 0.75 * rng.uniform()) / w_k.norm();

        ConvexSubproblem p;
        p.kind = ConvexSubproblem::Kind::transmit;
        p.radius = radius;
        p.start = w_k;
        p.objective = sca_quadratic_lb(h0, w_k);
        double rate = 0.0;
        for (int i = 0; i < t; ++i)
        {
            const ComplexVec ht = h_hat + std::conj(rng.complex_normal()) * h0;
            auto lb = sca_quadratic_lb(ht, w_k);
            lb.constant += 1.0;
            rate += std::log2(lb(w_k));
            p.rate_terms.push_back(lb);
        }
        p.rate_scale = 1.0 / t;
        rate /= t;
        const double mu = 1.2, ps = 0.5 + rng.uniform();
        const double ae = tight * rate / (mu * w_k.squaredNorm() + ps);
        p.power_weight = ae * mu;
        p.rate_rhs = ae * ps;
        return p;
    }

    /// SCA phase subproblem in the full reflection vector.
    inline ConvexSubproblem random_phase(RngStream &rng, int k, int t, double tight)
    {
        const ComplexVec x = random_vec(rng, k);
        const cplx h = rng.complex_normal();
        ConvexSubproblem p;
        p.kind = ConvexSubproblem::Kind::phase;
        p.modulus = RealVec::NullaryExpr(k, [&](Eigen::Index) { return 0.5 + rng.uniform(); });
        ComplexVec phi_k(k);
        for (int n = 0; n < k; ++n)
            phi_k(n) = p.modulus(n) * rng.uniform() * rng.unit_phase();
        p.start = phi_k;
        p.objective = sca_quadratic_lb(x, phi_k);
        double rate = 0.0;
        for (int i = 0; i < t; ++i)
        {
            const ComplexVec beta = rng.complex_normal() * x;
            AffineForm a = sca_quadratic_lb(beta, phi_k);
            a.constant += 1.0 + std::norm(h);
            a.gradient += 2.0 * std::conj(h) * beta;
            rate += std::log2(a(phi_k));
            p.rate_terms.push_back(a);
        }
        p.rate_scale = 1.0 / t;
        p.rate_rhs = tight * rate / t;
        return p;
    }

    inline ComplexVec project(const ConvexSubproblem &p, ComplexVec z)
    {
        if (p.kind == ConvexSubproblem::Kind::transmit)
        {
            const double n = z.norm();
            if (n > p.radius)
                z *= p.radius / n;
        }
        else
            for (Eigen::Index i = 0; i < z.size(); ++i)
                if (std::abs(z(i)) > p.modulus(i))
                    z(i) *= p.modulus(i) / std::abs(z(i));
        return z;
    }

    inline double lagrangian(const ConvexSubproblem &p, const ComplexVec &z, double nu)
    {
        const double s = p.rate_slack(z);
        if (!std::isfinite(s))
            return -std::numeric_limits<double>::infinity();
        return p.objective(z) + nu * s;
    }

    /// Wirtinger gradient (as a complex vector) of the Lagrangian.
    inline ComplexVec lagrangian_grad(const ConvexSubproblem &p, const ComplexVec &z, double nu)
    {
        ComplexVec g = p.objective.gradient;
        if (p.has_rate())
        {
            ComplexVec r = -2.0 * p.power_weight * z;
            for (const auto &a : p.rate_terms)
                r += p.rate_scale / std::numbers::ln2 * a.gradient / a(z);
            g += nu * r;
        }
        return g;
    }

    /// Accelerated projected-gradient maximizer of the Lagrangian over the simple set (backtracking,
    /// adaptive restart); warm-started in z.
    inline double inner_max(const ConvexSubproblem &p, ComplexVec &z, double nu, long &budget)
    {
        double lip = 1.0;
        double f = lagrangian(p, z, nu);
        ComplexVec y = z;
        double fy = f;
        double mom = 1.0;
        int quiet = 0;
        while (budget > 0)
        {
            --budget;
            if (!std::isfinite(fy))
            {
                y = z;
                fy = f;
                mom = 1.0;
            }
            const ComplexVec g = lagrangian_grad(p, y, nu);
            ComplexVec next;
            double fn = -std::numeric_limits<double>::infinity();
            for (int tries = 0; tries < 200; ++tries)
            {
                next = project(p, y + g / lip);
                fn = lagrangian(p, next, nu);
                const ComplexVec step = next - y;
                if (std::isfinite(fn) &&
                    fn >= fy + g.dot(step).real() - 0.5 * lip * step.squaredNorm() - 1e-15 * std::abs(fy))
                    break;
                lip *= 2.0;
            }
            if (!std::isfinite(fn))
                break;
            const double moved = (next - z).norm();
            if (fn < f)
            {
                // restart the momentum from the best point
                y = z;
                fy = f;
                mom = 1.0;
                if (++quiet > 50)
                    break;
                continue;
            }
            const double mom_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * mom * mom));
            y = next + ((mom - 1.0) / mom_next) * (next - z);
            fy = lagrangian(p, y, nu);
            mom = mom_next;
            z = next;
            f = fn;
            lip *= 0.95;
            quiet = moved < 1e-15 * (1.0 + z.norm()) ? quiet + 1 : 0;
            if (quiet > 50)
                break;
        }
        return f;
    }

    struct Oracle
    {
        double dual = 0.0;   // min over nu of the dual function
        double primal = 0.0; // objective at a feasible Lagrangian maximizer
    };

    inline Oracle dual_oracle(const ConvexSubproblem &p)
    {
        long budget = 1000000;
        ComplexVec z = p.start;
        Oracle o;
        if (!p.has_rate())
        {
            o.dual = o.primal = inner_max(p, z, 0.0, budget);
            return o;
        }
        double g0 = inner_max(p, z, 0.0, budget);
        if (p.rate_slack(z) >= 0.0)
        {
            o.dual = o.primal = g0;
            return o;
        }
        // the unconstrained maximizer may sit on the log-domain boundary, so restart from the start point
        double lo = 0.0, hi = 1.0;
        ComplexVec z_hi = p.start;
        for (;;)
        {
            inner_max(p, z_hi, hi, budget);
            if (p.rate_slack(z_hi) >= 0.0 || budget <= 0)
                break;
            lo = hi;
            hi *= 4.0;
        }
        ComplexVec z_mid = z_hi;
        for (int it = 0; it < 80 && budget > 0; ++it)
        {
            const double mid = 0.5 * (lo + hi);
            inner_max(p, z_mid, mid, budget);
            if (p.rate_slack(z_mid) >= 0.0)
            {
                hi = mid;
                z_hi = z_mid;
            }
            else
                lo = mid;
        }
        ComplexVec zd = z_hi;
        o.dual = inner_max(p, zd, hi, budget);
        o.primal = p.objective(z_hi);
        return o;
    }

    inline double sampled_rate_ee(cplx a, cplx b, double p, const SampleSet &s, const SystemParams &params)
    {
        return rate_primary_samples_stats(a, b, s, params).mean / (params.amplifier_inefficiency * p + params.circuit_power_w);
    }

    /// max over a grid of transmit vectors (M = 2) and unit-modulus phases (N = 2) of
    /// min(EE_PT / alpha, EE_RIS / (1 - alpha)), for each alpha.
    inline std::vector<double> grid_eta(const DerivedChannel &dc, const SampleSet &s, const SystemParams &params,
                                 const std::vector<double> &alphas)
    {
        std::vector<double> best(alphas.size(), 0.0);
        const int np = 50, nph = 32, na = 16, nb = 16;
        for (int ia = 0; ia < na; ++ia)
            for (int ib = 0; ib < nb; ++ib)
            {
                const double a = 0.5 * std::numbers::pi * ia / (na - 1);
                ComplexVec v(2);
                v << std::cos(a), std::sin(a) * std::polar(1.0, 2.0 * std::numbers::pi * ib / nb);
                for (int i1 = 0; i1 < nph; ++i1)
                    for (int i2 = 0; i2 < nph; ++i2)
                    {
                        ComplexVec phi(2);
                        phi << std::polar(1.0, 2.0 * std::numbers::pi * i1 / nph),
                            std::polar(1.0, 2.0 * std::numbers::pi * i2 / nph);
                        const cplx a0 = dc.h_hat.dot(v);
                        const cplx b0 = phi.dot(dc.M_hat * v);
                        for (int ip = 1; ip <= np; ++ip)
                        {
                            const double p = params.max_power_w * ip / np;
                            const double sp = std::sqrt(p);
                            const double e_pt = sampled_rate_ee(sp * a0, sp * b0, p, s, params);
                            const double e_ris = ee_ris(rate_secondary_from_gain(p * std::norm(b0), params), params);
                            for (std::size_t k = 0; k < alphas.size(); ++k)
                                best[k] = std::max(best[k], std::min(e_pt / alphas[k], e_ris / (1.0 - alphas[k])));
                        }
                    }
            }
        return best;
    }
}
