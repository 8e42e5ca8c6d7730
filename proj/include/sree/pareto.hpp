// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "channel.hpp"
#include "convex.hpp"
#include "individual.hpp"
#include "metrics.hpp"
#include "numerics.hpp"
#include "parallel.hpp"
#include "system_params.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sree
{
    /// (1/L)(2^{(1-alpha) eta L N Pr / B} - 1); +inf once the exponent exceeds 1024.
    inline double gamma_threshold(double alpha, double eta, const SystemParams &params)
    {
        if (!(eta >= 0.0))
            throw std::domain_error("gamma_threshold: eta must be non-negative");
        const double l = double(params.spreading_factor);
        const double e = (1.0 - alpha) * eta * l * params.ris_power_w() / params.bandwidth_hz;
        if (e > 1024.0)
            return std::numeric_limits<double>::infinity();
        return std::expm1(e * std::numbers::ln2) / l;
    }

    /// Sample-average PT energy efficiency at the RIS-optimal solution.
    inline double ee_bar_pt(const DerivedChannel &dc, const BeamformingSolution &sol2, const SampleSet &s,
                            const SystemParams &params)
    {
        return ee_pt(rate_primary_samples(dc, sol2, s, params), sol2, params);
    }

    /// |phi^H M_hat w|^2
    inline double backscatter_energy(const DerivedChannel &dc, const BeamformingSolution &sol)
    {
        return std::norm(backscatter_gain(dc, sol.phi, sol.w));
    }

    class InfeasibleStart : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    struct Kappas
    {
        double k1 = 1e-5; // transmit SCA
        double k2 = 1e-5; // phase SCA
        double k3 = 1e-4; // outer AO
    };

    namespace detail
    {
        /// Sample-average rate constraint in bits/s/Hz: rate / B - alpha eta (mu p + Ps) / B.
        inline double c5_slack(cplx a, cplx b, double power, double alpha_eta, const SampleSet &s,
                               const SystemParams &params)
        {
            const double rate = rate_primary_samples_stats(a, b, s, params).mean / params.bandwidth_hz;
            return rate - alpha_eta * (params.amplifier_inefficiency * power + params.circuit_power_w) /
                              params.bandwidth_hz;
        }

        inline double c5_tol(double alpha_eta, const SystemParams &params)
        {
            const double rhs = alpha_eta * (params.amplifier_inefficiency * params.max_power_w + params.circuit_power_w) /
                               params.bandwidth_hz;
            return 1e-9 * std::max(1.0, rhs);
        }

        inline double fractional_gain(double previous, double current)
        {
            if (previous > 0.0)
                return (current - previous) / previous;
            return current > previous ? std::numeric_limits<double>::infinity() : 0.0;
        }

        /// Orthonormal basis of span{a, b} (0 to 2 columns).
        inline ComplexMat span_basis(const ComplexVec &a, const ComplexVec &b)
        {
            const double scale = std::max(a.norm(), b.norm());
            ComplexMat u(a.size(), 0);
            if (!(scale > 0.0))
                return u;
            std::vector<ComplexVec> cols;
            for (const ComplexVec *v : {&a, &b})
            {
                ComplexVec r = *v;
                for (const auto &c : cols)
                    r -= c.dot(r) * c;
                const double n = r.norm();
                if (n > 1e-12 * scale)
                    cols.push_back(r / n);
            }
            u.resize(a.size(), Eigen::Index(cols.size()));
            for (std::size_t i = 0; i < cols.size(); ++i)
                u.col(Eigen::Index(i)) = cols[i];
            return u;
        }

        inline double max_modulus(const ComplexVec &phi) { return phi.size() ? phi.cwiseAbs().maxCoeff() : 0.0; }

        inline bool unit_modulus(const ComplexVec &phi, double tol = 1e-9)
        {
            for (Eigen::Index n = 0; n < phi.size(); ++n)
                if (std::abs(std::abs(phi(n)) - 1.0) > tol)
                    return false;
            return true;
        }
    }

    /// Sample-average rate slack of C5 in bits/s/Hz (>= 0 when alpha eta is met).
    inline double c5_slack(const DerivedChannel &dc, const BeamformingSolution &sol, double alpha_eta,
                           const SampleSet &s, const SystemParams &params)
    {
        return detail::c5_slack(direct_gain(dc, sol.w), backscatter_gain(dc, sol.phi, sol.w), sol.power(), alpha_eta, s,
                                params);
    }

    /// Unit-modulus phi with phi^H x = sigma, if one exists.
    inline std::optional<ComplexVec> realize_unit_modulus(const ComplexVec &x, cplx sigma)
    {
        const Eigen::Index n = x.size();
        ComplexVec phi = ComplexVec::Ones(n);
        std::vector<Eigen::Index> idx;
        for (Eigen::Index i = 0; i < n; ++i)
            if (std::abs(x(i)) > 0.0)
                idx.push_back(i);
        const double total = x.cwiseAbs().sum();
        if (idx.empty())
            return std::abs(sigma) == 0.0 ? std::optional<ComplexVec>(phi) : std::nullopt;
        std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return std::abs(x(a)) > std::abs(x(b)); });

        // reachable |sum| of the suffix starting at k: [max(0, 2 r_k - S_k), S_k]
        const std::size_t m = idx.size();
        std::vector<double> suffix(m + 1, 0.0);
        for (std::size_t k = m; k-- > 0;)
            suffix[k] = suffix[k + 1] + std::abs(x(idx[k]));
        auto lo = [&](std::size_t k) { return std::max(0.0, 2.0 * std::abs(x(idx[k])) - suffix[k]); };
        const double tol = 1e-12 * total;
        if (std::abs(sigma) < lo(0) - tol || std::abs(sigma) > suffix[0] + tol)
            return std::nullopt;

        cplx target = sigma;
        std::vector<cplx> parts(m);
        const bool edge = std::abs(sigma) >= suffix[0] * (1.0 - 1e-12);
        for (std::size_t k = 0; k + 1 < m && edge; ++k)
            parts[k] = std::polar(std::abs(x(idx[k])), std::arg(sigma));
        for (std::size_t k = 0; k + 1 < m && !edge; ++k)
        {
            const double r = std::abs(x(idx[k]));
            const double t = std::abs(target);
            const double lo_m = std::max(std::abs(t - r), lo(k + 1));
            const double hi_m = std::min(t + r, suffix[k + 1]);
            const double rem = 0.5 * (lo_m + std::max(lo_m, hi_m));
            double psi = 0.0;
            if (t > 0.0)
            {
                const double c = std::clamp((t * t + r * r - rem * rem) / (2.0 * t * r), -1.0, 1.0);
                psi = std::arg(target) + std::acos(c);
            }
            parts[k] = std::polar(r, psi);
            target -= parts[k];
        }
        parts[m - 1] = std::polar(std::abs(x(idx[m - 1])), std::arg(target));

        cplx sum = 0.0;
        for (std::size_t k = 0; k < m; ++k)
        {
            const Eigen::Index i = idx[k];
            const cplx q = std::conj(parts[k] / x(i));
            phi(i) = q / std::abs(q);
            sum += std::conj(phi(i)) * x(i);
        }
        if (std::abs(sum - sigma) > 1e-9 * std::max(total, 1e-300))
            return std::nullopt;
        return phi;
    }

    /// SCA on the transmit subproblem at fixed phi: maximize |h0^H w|^2 subject to the power budget and the
    /// sample-average rate constraint. Iterates stay in span{M_hat^H phi, h_hat}, which holds every optimum.
    inline ComplexVec solve_subproblem_w(const DerivedChannel &dc, const ComplexVec &phi, double alpha_eta,
                                         const SampleSet &s, const SystemParams &params, const ComplexVec &w_init,
                                         double kappa1, AOTrace *trace = nullptr, int max_iter = 200)
    {
        if (w_init.size() != dc.antennas() || phi.size() != dc.elements())
            throw std::invalid_argument("solve_subproblem_w: dimension mismatch");
        if (!(kappa1 > 0.0))
            throw std::invalid_argument("solve_subproblem_w: kappa must be positive");
        const ComplexVec h0 = dc.M_hat.adjoint() * phi;
        const double tol = detail::c5_tol(alpha_eta, params);
        auto slack = [&](const ComplexVec &w)
        { return detail::c5_slack(dc.h_hat.dot(w), h0.dot(w), w.squaredNorm(), alpha_eta, s, params); };
        if (w_init.squaredNorm() > params.max_power_w * (1.0 + 1e-9))
            throw InfeasibleStart("solve_subproblem_w: initial point exceeds the power budget");
        if (slack(w_init) < -tol)
            throw InfeasibleStart("solve_subproblem_w: initial point violates the rate constraint");

        AOTrace local;
        AOTrace &tr = trace ? *trace : local;
        tr.kappa = kappa1;
        auto objective = [&](const ComplexVec &w) { return std::norm(h0.dot(w)); };

        const ComplexMat u = detail::span_basis(h0, dc.h_hat);
        if (u.cols() == 0)
        {
            tr.objective.push_back(0.0);
            tr.converged = true;
            return w_init;
        }
        ComplexVec y = u.adjoint() * w_init;
        ComplexVec w = u * y;
        double value = objective(w);
        tr.objective.push_back(value);

        const ComplexVec h0r = u.adjoint() * h0;
        const ComplexVec hhr = u.adjoint() * dc.h_hat;
        ConvexSubproblem p;
        p.kind = ConvexSubproblem::Kind::transmit;
        p.radius = std::sqrt(params.max_power_w);
        const bool rate = alpha_eta > 0.0;
        if (rate)
        {
            p.rate_scale = 1.0 / double(s.size());
            p.power_weight = alpha_eta * params.amplifier_inefficiency / params.bandwidth_hz;
            p.rate_rhs = alpha_eta * params.circuit_power_w / params.bandwidth_hz;
        }

        for (int it = 0; it < max_iter; ++it)
        {
            p.start = y;
            p.objective = sca_quadratic_lb(h0r, y);
            p.rate_terms.clear();
            if (rate)
                for (const cplx &c : s.samples)
                {
                    AffineForm lb = sca_quadratic_lb(hhr + std::conj(c) * h0r, y);
                    lb.constant += 1.0;
                    p.rate_terms.push_back(std::move(lb));
                }
            ComplexVec y_new;
            try
            {
                y_new = solve_convex(p).z;
            }
            catch (const SubproblemInfeasible &)
            {
                break;
            }
            if (y_new.norm() > p.radius)
                y_new *= p.radius / y_new.norm();
            const ComplexVec w_new = u * y_new;
            const double v_new = objective(w_new);
            ++tr.iterations;
            if (v_new < value || slack(w_new) < -tol)
            {
                tr.converged = true;
                break;
            }
            const double gain = detail::fractional_gain(value, v_new);
            y = y_new;
            w = w_new;
            value = v_new;
            tr.objective.push_back(value);
            if (gain < kappa1)
            {
                tr.converged = true;
                break;
            }
        }
        return w;
    }

    struct PhaseSubproblemResult
    {
        ComplexVec phi;
        bool relaxed = false; // some |phi_n| < 1
        AOTrace trace;
    };

    /// SCA on the relaxed phase subproblem at fixed w. The constraint and objective depend on phi only through
    /// sigma = phi^H x (x = M_hat w), whose range under |phi_n| <= 1 is the disc |sigma| <= ||x||_1; the optimum
    /// is then realized with unit-modulus entries when possible.
    inline PhaseSubproblemResult solve_subproblem_phase(const DerivedChannel &dc, const ComplexVec &w, double alpha_eta,
                                                        const SampleSet &s, const SystemParams &params,
                                                        const ComplexVec &phi_init, double kappa2, int max_iter = 200)
    {
        if (w.size() != dc.antennas() || phi_init.size() != dc.elements())
            throw std::invalid_argument("solve_subproblem_phase: dimension mismatch");
        if (!(kappa2 > 0.0))
            throw std::invalid_argument("solve_subproblem_phase: kappa must be positive");
        const ComplexVec x = dc.M_hat * w;
        const cplx h = dc.h_hat.dot(w);
        const double power = w.squaredNorm();
        const double tol = detail::c5_tol(alpha_eta, params);
        auto slack = [&](cplx sigma) { return detail::c5_slack(h, sigma, power, alpha_eta, s, params); };
        if (detail::max_modulus(phi_init) > 1.0 + 1e-9)
            throw InfeasibleStart("solve_subproblem_phase: |phi_n| exceeds 1");
        const cplx sigma0 = phi_init.dot(x);
        if (slack(sigma0) < -tol)
            throw InfeasibleStart("solve_subproblem_phase: initial point violates the rate constraint");

        PhaseSubproblemResult out;
        out.trace.kappa = kappa2;
        out.phi = phi_init;
        out.relaxed = !detail::unit_modulus(phi_init);
        double value = std::norm(sigma0);
        out.trace.objective.push_back(value);
        const double radius = x.cwiseAbs().sum();
        if (!(radius > 0.0))
        {
            out.trace.converged = true;
            return out;
        }

        ConvexSubproblem p;
        p.kind = ConvexSubproblem::Kind::phase;
        p.modulus = RealVec::Constant(1, radius);
        const bool rate = alpha_eta > 0.0;
        if (rate)
        {
            p.rate_scale = 1.0 / double(s.size());
            p.rate_rhs = alpha_eta * (params.amplifier_inefficiency * power + params.circuit_power_w) /
                         params.bandwidth_hz;
        }
        const ComplexVec one = ComplexVec::Ones(1);
        ComplexVec sigma = ComplexVec::Constant(1, sigma0);
        bool moved = false;
        for (int it = 0; it < max_iter; ++it)
        {
            p.start = sigma;
            p.objective = sca_quadratic_lb(one, sigma);
            p.rate_terms.clear();
            if (rate)
                for (const cplx &c : s.samples)
                {
                    AffineForm a = sca_quadratic_lb(ComplexVec::Constant(1, std::conj(c)), sigma);
                    a.constant += 1.0 + std::norm(h);
                    a.gradient(0) += 2.0 * h * std::conj(c);
                    p.rate_terms.push_back(std::move(a));
                }
            ComplexVec s_new;
            try
            {
                s_new = solve_convex(p).z;
            }
            catch (const SubproblemInfeasible &)
            {
                break;
            }
            if (std::abs(s_new(0)) > radius)
                s_new(0) *= radius / std::abs(s_new(0));
            const double v_new = std::norm(s_new(0));
            ++out.trace.iterations;
            if (v_new < value || slack(s_new(0)) < -tol)
            {
                out.trace.converged = true;
                break;
            }
            const double gain = detail::fractional_gain(value, v_new);
            sigma = s_new;
            value = v_new;
            moved = true;
            out.trace.objective.push_back(value);
            if (gain < kappa2)
            {
                out.trace.converged = true;
                break;
            }
        }
        // the barrier stops just inside the disc; move to its edge when that keeps the rate constraint
        if (std::abs(sigma(0)) > 0.0 && std::abs(sigma(0)) < radius)
        {
            const cplx edge = sigma(0) * (radius / std::abs(sigma(0)));
            if (slack(edge) >= -tol)
            {
                sigma(0) = edge;
                value = std::norm(edge);
                moved = true;
                out.trace.objective.push_back(value);
            }
        }
        if (!moved)
            return out;

        const cplx target = sigma(0);
        if (auto phi = realize_unit_modulus(x, target))
        {
            out.phi = *phi;
            out.relaxed = false;
            return out;
        }
        // projection of the relaxed point onto the unit circle: all entries aligned, |phi^H x| = ||x||_1
        const cplx rot = std::abs(target) > 0.0 ? target / std::abs(target) : cplx(1.0, 0.0);
        ComplexVec aligned(x.size());
        for (Eigen::Index n = 0; n < x.size(); ++n)
            aligned(n) = std::abs(x(n)) > 0.0 ? x(n) / std::abs(x(n)) * std::conj(rot) : cplx(1.0, 0.0);
        if (slack(aligned.dot(x)) >= -tol)
        {
            out.phi = aligned;
            out.relaxed = false;
            out.trace.objective.back() = std::norm(aligned.dot(x));
            return out;
        }
        out.phi = aligned * (std::abs(target) / radius);
        for (Eigen::Index n = 0; n < x.size(); ++n)
            if (std::abs(x(n)) == 0.0)
                out.phi(n) = 0.0;
        out.relaxed = true;
        return out;
    }

    struct P4Result
    {
        BeamformingSolution solution;
        double objective = 0.0; // |phi^H M_hat w|^2
        bool feasible_start = false;
        bool relaxed = false;
        AOTrace trace;
        std::vector<AOTrace> w_traces;
        std::vector<AOTrace> phase_traces;
    };

    /// Alternating transmit / phase SCA from the best feasible start in `starts`.
    inline P4Result solve_p4(const DerivedChannel &dc, double alpha, double eta, const SampleSet &s,
                             const SystemParams &params, const std::vector<BeamformingSolution> &starts,
                             const Kappas &kappas = {}, int max_outer = 100)
    {
        const double alpha_eta = alpha * eta;
        const double tol = detail::c5_tol(alpha_eta, params);
        P4Result out;
        double best = -1.0;
        for (const auto &c : starts)
        {
            if (c.w.size() != dc.antennas() || c.phi.size() != dc.elements())
                continue;
            if (c.power() > params.max_power_w * (1.0 + 1e-9) || detail::max_modulus(c.phi) > 1.0 + 1e-9)
                continue;
            if (c5_slack(dc, c, alpha_eta, s, params) < -tol)
                continue;
            const double v = backscatter_energy(dc, c);
            if (v > best)
            {
                best = v;
                out.solution = c;
            }
        }
        if (best < 0.0)
            return out;
        out.feasible_start = true;
        out.trace.kappa = kappas.k3;
        out.objective = best;
        out.trace.objective.push_back(best);

        BeamformingSolution sol = out.solution;
        for (int it = 0; it < max_outer; ++it)
        {
            AOTrace tw;
            sol.w = solve_subproblem_w(dc, sol.phi, alpha_eta, s, params, sol.w, kappas.k1, &tw);
            auto ph = solve_subproblem_phase(dc, sol.w, alpha_eta, s, params, sol.phi, kappas.k2);
            sol.phi = ph.phi;
            out.w_traces.push_back(std::move(tw));
            out.phase_traces.push_back(std::move(ph.trace));

            const double previous = out.objective;
            const double current = backscatter_energy(dc, sol);
            ++out.trace.iterations;
            if (current < previous)
            {
                out.trace.converged = true;
                break;
            }
            out.solution = sol;
            out.objective = current;
            out.trace.objective.push_back(current);
            if (detail::fractional_gain(previous, current) < kappas.k3)
            {
                out.trace.converged = true;
                break;
            }
        }
        out.solution.unit_modulus = detail::unit_modulus(out.solution.phi);
        out.relaxed = !out.solution.unit_modulus;
        return out;
    }

    /// Individual optima used to bracket and initialize the boundary search.
    struct Anchors
    {
        IndividualResult pt;           // max EE_PT
        IndividualResult ris;          // max EE_RIS
        BeamformingSolution pt_sampled; // pt direction and phase, power maximizing the sample-average EE_PT
        double eta_pt = 0.0;           // sample-average EE_PT at pt_sampled
        double eta_ris = 0.0;          // EE_RIS at the RIS optimum
        double ee_bar_pt = 0.0;        // sample-average EE_PT at the RIS optimum
    };

    namespace detail
    {
        struct PowerLine
        {
            cplx a; // h_hat^H v
            cplx b; // phi^H M_hat v

            double ee(double p, const SampleSet &s, const SystemParams &params) const
            {
                const double sp = std::sqrt(p);
                return rate_primary_samples_stats(sp * a, sp * b, s, params).mean /
                       (params.amplifier_inefficiency * p + params.circuit_power_w);
            }
        };

        /// Golden-section maximizer of the (quasi-concave) sample-average EE_PT over log p in [1e-12 Pmax, Pmax].
        inline double best_power(const PowerLine &line, const SampleSet &s, const SystemParams &params)
        {
            double lo = std::log(params.max_power_w) - 12.0 * std::numbers::ln10, hi = std::log(params.max_power_w);
            const double g = 0.5 * (std::sqrt(5.0) - 1.0);
            double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
            double f1 = line.ee(std::exp(x1), s, params), f2 = line.ee(std::exp(x2), s, params);
            for (int it = 0; it < 100; ++it)
            {
                if (f1 < f2)
                {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + g * (hi - lo);
                    f2 = line.ee(std::exp(x2), s, params);
                }
                else
                {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - g * (hi - lo);
                    f1 = line.ee(std::exp(x1), s, params);
                }
            }
            const double p = std::exp(0.5 * (lo + hi));
            return line.ee(params.max_power_w, s, params) >= line.ee(p, s, params) ? params.max_power_w : p;
        }

        /// Largest p <= Pmax with sample-average EE_PT >= alpha_eta along the line, if any.
        inline std::optional<double> largest_feasible_power(const PowerLine &line, double alpha_eta, const SampleSet &s,
                                                            const SystemParams &params)
        {
            const double pmax = params.max_power_w;
            if (line.ee(pmax, s, params) >= alpha_eta)
                return pmax;
            double lo = best_power(line, s, params);
            if (line.ee(lo, s, params) < alpha_eta)
                return std::nullopt;
            double hi = pmax;
            for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it)
            {
                const double mid = 0.5 * (lo + hi);
                (line.ee(mid, s, params) >= alpha_eta ? lo : hi) = mid;
            }
            return lo;
        }

        inline PowerLine power_line(const DerivedChannel &dc, const ComplexVec &v, const ComplexVec &phi)
        {
            return {dc.h_hat.dot(v), phi.dot(dc.M_hat * v)};
        }

        inline ComplexVec unit_direction(const ComplexVec &w, const DerivedChannel &dc)
        {
            const double n = w.norm();
            return n > 0.0 ? ComplexVec(w / n) : ComplexVec(ComplexVec::Unit(dc.antennas(), 0));
        }
    }

    inline Anchors make_anchors(const DerivedChannel &dc, const SystemParams &params, const SampleSet &s,
                                const AoOptions &ao = {})
    {
        Anchors a;
        a.pt = max_ee_pt(dc, params, s, ao);
        a.ris = max_ee_ris(dc, params, s, ao);
        const ComplexVec v = detail::unit_direction(a.pt.solution.w, dc);
        const auto line = detail::power_line(dc, v, a.pt.solution.phi);
        const double p = detail::best_power(line, s, params);
        a.pt_sampled.w = std::sqrt(p) * v;
        a.pt_sampled.phi = a.pt.solution.phi;
        a.eta_pt = ee_pt(rate_primary_samples(dc, a.pt_sampled, s, params), a.pt_sampled, params);
        const double eta_direct = ee_pt(rate_primary_samples(dc, a.pt.solution, s, params), a.pt.solution, params);
        if (eta_direct > a.eta_pt)
        {
            a.pt_sampled = a.pt.solution;
            a.eta_pt = eta_direct;
        }
        a.eta_ris = ee_ris(rate_secondary(dc, a.ris.solution, params), params);
        a.ee_bar_pt = ee_bar_pt(dc, a.ris.solution, s, params);
        return a;
    }

    /// Starting points for P4: the anchors' directions and their interpolations, each with its phase alignment and
    /// the largest power meeting the rate constraint.
    inline std::vector<BeamformingSolution> initial_candidates(const DerivedChannel &dc, const Anchors &anchors,
                                                               double alpha_eta, const SampleSet &s,
                                                               const SystemParams &params, int steps = 16)
    {
        std::vector<BeamformingSolution> out;
        const ComplexVec v1 = detail::unit_direction(anchors.pt.solution.w, dc);
        ComplexVec v2 = detail::unit_direction(anchors.ris.solution.w, dc);
        const cplx overlap = v2.dot(v1);
        if (std::abs(overlap) > 0.0)
            v2 *= overlap / std::abs(overlap);

        auto add = [&](const ComplexVec &v, const ComplexVec &phi)
        {
            if (auto p = detail::largest_feasible_power(detail::power_line(dc, v, phi), alpha_eta, s, params))
            {
                BeamformingSolution sol;
                sol.w = std::sqrt(*p) * v;
                sol.phi = phi;
                out.push_back(std::move(sol));
            }
        };
        add(v1, anchors.pt.solution.phi);
        add(v2, anchors.ris.solution.phi);
        for (int i = 0; i <= steps; ++i)
        {
            const double tau = double(i) / double(steps);
            ComplexVec v = (1.0 - tau) * v1 + tau * v2;
            if (!(v.norm() > 0.0))
                continue;
            v /= v.norm();
            add(v, opt_phase(dc, v).phi);
        }
        return out;
    }

    struct FeasibilityResult
    {
        bool feasible = false;
        bool short_circuit = false; // alpha eta <= ee_bar_pt
        bool has_solution = false;  // a point meeting C1, C5 (and relaxed C2) was found
        double gamma = 0.0;         // |phi^H M_hat w|^2 at the solution
        double gamma_th = 0.0;
        BeamformingSolution solution;
        P4Result p4;
    };

    /// Feasibility of eta for profile alpha. `warm` may hold points known to meet the rate constraint at a
    /// larger eta; they join the start set so that feasibility is monotone in eta.
    inline FeasibilityResult check_feasibility(const DerivedChannel &dc, double alpha, double eta, const SampleSet &s,
                                               const SystemParams &params, const Anchors &anchors,
                                               const std::vector<BeamformingSolution> &warm = {},
                                               const Kappas &kappas = {})
    {
        if (!(eta >= 0.0))
            throw std::domain_error("check_feasibility: eta must be non-negative");
        FeasibilityResult r;
        r.gamma_th = gamma_threshold(alpha, eta, params);
        const double alpha_eta = alpha * eta;

        if (alpha_eta <= anchors.ee_bar_pt)
        {
            r.short_circuit = true;
            r.has_solution = true;
            r.solution = anchors.ris.solution;
            r.gamma = backscatter_energy(dc, r.solution);
            const double tol = detail::c5_tol(alpha_eta, params);
            for (const auto &c : warm)
                if (backscatter_energy(dc, c) > r.gamma && c5_slack(dc, c, alpha_eta, s, params) >= -tol)
                {
                    r.solution = c;
                    r.gamma = backscatter_energy(dc, c);
                }
            r.feasible = r.gamma >= r.gamma_th;
            return r;
        }
        if (std::isinf(r.gamma_th))
            return r;

        std::vector<BeamformingSolution> starts = initial_candidates(dc, anchors, alpha_eta, s, params);
        starts.insert(starts.end(), warm.begin(), warm.end());
        r.p4 = solve_p4(dc, alpha, eta, s, params, starts, kappas);
        if (!r.p4.feasible_start)
            return r;
        r.has_solution = true;
        r.solution = r.p4.solution;
        r.gamma = r.p4.objective;
        r.feasible = r.gamma >= r.gamma_th;
        return r;
    }

    struct ParetoQuery
    {
        double alpha = 0.5;
        double epsilon_bisect = 1e-3;
        Kappas kappas;
        std::uint64_t sample_seed = 0;
        std::size_t T = 200;         // optimization samples
        std::size_t report_T = 10000; // independent samples for reporting
        int max_depth = 40;
        AoOptions anchor_options;

        void validate() const
        {
            if (!(alpha > 0.0 && alpha < 1.0))
                throw std::invalid_argument("ParetoQuery: alpha must lie in (0, 1)");
            if (!(epsilon_bisect > 0.0) || !(kappas.k1 > 0.0) || !(kappas.k2 > 0.0) || !(kappas.k3 > 0.0))
                throw std::invalid_argument("ParetoQuery: tolerances must be positive");
            if (T == 0 || report_T == 0)
                throw std::invalid_argument("ParetoQuery: sample counts must be positive");
            if (max_depth < 1)
                throw std::invalid_argument("ParetoQuery: max_depth must be >= 1");
        }
    };

    struct ParetoPoint
    {
        double alpha = 0.0;
        double eta_star = 0.0;
        double eta_lower = 0.0; // final bracket
        double eta_upper = 0.0;
        int bisection_steps = 0;
        EEPair ee_pair;        // optimization samples
        EEPair ee_pair_report; // report samples
        EEPair ee_pair_upper;  // Jensen upper bound on the primary rate
        BeamformingSolution solution;
        bool relaxed = false;       // phi not unit modulus
        bool on_ray = false;        // both EE constraints tight within 2%
        bool short_circuit = false; // solution taken from the RIS optimum
        std::string error;

        bool ok() const { return error.empty(); }
        double bracket_width() const { return eta_lower > 0.0 ? (eta_upper - eta_lower) / eta_lower
                                                 : std::numeric_limits<double>::infinity(); }
    };

    inline constexpr double clamp_alpha(double alpha) { return std::clamp(alpha, 1e-3, 1.0 - 1e-3); }

    inline SampleSet report_samples(const ParetoQuery &q)
    {
        return SampleSet::generate(q.report_T, q.sample_seed ^ 0x9e3779b97f4a7c15ull);
    }

    /// Bisection on eta along the profile ray (alpha, 1 - alpha).
    inline ParetoPoint pareto_point(const DerivedChannel &dc, const ParetoQuery &q, const SystemParams &params,
                                    const SampleSet &s, const Anchors &anchors, const SampleSet &report)
    {
        q.validate();
        const double alpha = clamp_alpha(q.alpha);
        ParetoPoint pt;
        pt.alpha = alpha;
        if (!(anchors.eta_pt > 0.0) || !(anchors.eta_ris > 0.0))
            throw std::runtime_error("pareto_point: anchors unavailable");

        std::vector<std::pair<double, BeamformingSolution>> pool;
        auto test = [&](double eta)
        {
            std::vector<BeamformingSolution> warm;
            for (const auto &[e, sol] : pool)
                if (e >= eta)
                    warm.push_back(sol);
            FeasibilityResult r = check_feasibility(dc, alpha, eta, s, params, anchors, warm, q.kappas);
            if (r.has_solution)
                pool.emplace_back(eta, r.solution);
            return r;
        };

        double lo = 0.0;
        double hi = std::min(anchors.eta_pt / alpha, anchors.eta_ris / (1.0 - alpha));
        BeamformingSolution best = anchors.ris.solution;
        bool best_short = true;
        for (int grow = 0; grow < 40; ++grow)
        {
            const auto r = test(hi);
            if (!r.feasible)
                break;
            lo = hi;
            best = r.solution;
            best_short = r.short_circuit;
            hi *= 1.05;
        }
        while (pt.bisection_steps < q.max_depth && !(lo > 0.0 && (hi - lo) / lo < q.epsilon_bisect))
        {
            const double mid = 0.5 * (lo + hi);
            const auto r = test(mid);
            ++pt.bisection_steps;
            if (r.feasible)
            {
                lo = mid;
                best = r.solution;
                best_short = r.short_circuit;
            }
            else
                hi = mid;
        }

        pt.eta_star = lo;
        pt.eta_lower = lo;
        pt.eta_upper = hi;
        pt.solution = best;
        pt.solution.unit_modulus = detail::unit_modulus(best.phi);
        pt.relaxed = !pt.solution.unit_modulus;
        pt.short_circuit = best_short;
        pt.ee_pair = ee_pair_samples(dc, best, s, params);
        pt.ee_pair_report = ee_pair_samples(dc, best, report, params);
        pt.ee_pair_upper = ee_pair_upper(dc, best, params);
        if (lo > 0.0)
            pt.on_ray = pt.ee_pair.ee_pt <= 1.02 * alpha * lo && pt.ee_pair.ee_ris <= 1.02 * (1.0 - alpha) * lo;
        return pt;
    }

    inline ParetoPoint pareto_point(const DerivedChannel &dc, const ParetoQuery &q, const SystemParams &params)
    {
        q.validate();
        const SampleSet s = SampleSet::generate(q.T, q.sample_seed);
        const Anchors anchors = make_anchors(dc, params, s, q.anchor_options);
        return pareto_point(dc, q, params, s, anchors, report_samples(q));
    }

    /// One boundary point per alpha (sorted), all on the same sample set; failures are recorded per point.
    inline std::vector<ParetoPoint> pareto_boundary(const DerivedChannel &dc, std::vector<double> alpha_grid,
                                                    const SystemParams &params, const ParetoQuery &q,
                                                    unsigned threads = 1)
    {
        for (double a : alpha_grid)
            if (!(a > 0.0 && a < 1.0))
                throw std::invalid_argument("pareto_boundary: alpha values must lie in (0, 1)");
        std::sort(alpha_grid.begin(), alpha_grid.end());
        const SampleSet s = SampleSet::generate(q.T, q.sample_seed);
        const SampleSet report = report_samples(q);
        const Anchors anchors = make_anchors(dc, params, s, q.anchor_options);

        std::vector<ParetoPoint> out(alpha_grid.size());
        parallel_for(alpha_grid.size(), threads, [&](std::size_t i)
                     {
                         ParetoQuery qi = q;
                         qi.alpha = alpha_grid[i];
                         try
                         {
                             out[i] = pareto_point(dc, qi, params, s, anchors, report);
                         }
                         catch (const std::exception &e)
                         {
                             out[i].alpha = clamp_alpha(alpha_grid[i]);
                             out[i].error = e.what();
                         } });
        return out;
    }

    /// PT-rate-max benchmark: the PT EE alternation with the power pinned to Pmax.
    inline IndividualResult rate_max_benchmark(const DerivedChannel &dc, const SystemParams &params,
                                               const SampleSet &s, AoOptions opt = {})
    {
        opt.pin_power_to_max = true;
        return max_ee_pt(dc, params, s, opt);
    }
}
