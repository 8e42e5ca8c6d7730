// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "numerics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace sree
{
    /// constant + Re(gradient^H z)
    struct AffineForm
    {
        double constant = 0.0;
        ComplexVec gradient;

        double operator()(const ComplexVec &z) const { return constant + gradient.dot(z).real(); }
    };

    /// First-order lower bound of |h^H x|^2 = x^H (h h^H) x at x_k:
    /// x_k^H H x_k + 2 Re[x_k^H H (x - x_k)].
    inline AffineForm sca_quadratic_lb(const ComplexVec &h, const ComplexVec &x_k)
    {
        if (h.size() != x_k.size())
            throw std::invalid_argument("sca_quadratic_lb: dimension mismatch");
        const cplx u = h.dot(x_k);
        return {-std::norm(u), 2.0 * u * h};
    }

    /// max objective(z) over a ball (transmit) or per-coordinate modulus bounds (phase), optionally subject to
    /// rate_scale * sum_t log2(rate_terms[t](z)) >= power_weight * ||z||^2 + rate_rhs.
    struct ConvexSubproblem
    {
        enum class Kind
        {
            transmit,
            phase
        };

        Kind kind = Kind::transmit;
        AffineForm objective;
        double radius = 0.0; // transmit: ||z|| <= radius
        RealVec modulus;     // phase: |z_n| <= modulus(n)
        std::vector<AffineForm> rate_terms;
        double rate_scale = 0.0;
        double power_weight = 0.0;
        double rate_rhs = 0.0;
        ComplexVec start; // feasible expansion point

        bool has_rate() const { return !rate_terms.empty(); }
        Eigen::Index size() const { return start.size(); }

        double rate_slack(const ComplexVec &z) const
        {
            if (!has_rate())
                return 0.0;
            double s = 0.0;
            for (const auto &a : rate_terms)
            {
                const double v = a(z);
                if (!(v > 0.0))
                    return -std::numeric_limits<double>::infinity();
                s += std::log2(v);
            }
            return rate_scale * s - power_weight * z.squaredNorm() - rate_rhs;
        }

        /// Largest violation of the set constraints at z (<= 0 when feasible).
        double max_violation(const ComplexVec &z) const
        {
            double v = -std::numeric_limits<double>::infinity();
            if (kind == Kind::transmit)
                v = z.norm() - radius;
            else
                for (Eigen::Index n = 0; n < z.size(); ++n)
                    v = std::max(v, std::abs(z(n)) - modulus(n));
            if (has_rate())
                v = std::max(v, -rate_slack(z));
            return v;
        }
    };

    class SubproblemInfeasible : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    struct ConvexOptions
    {
        double gap_tol = 1e-9;       // relative to |c| * scale
        double domain_floor = 1e-9;  // rate_terms[t](z) >= domain_floor
        double barrier_growth = 10.0;
        int max_newton = 2000;
    };

    struct ConvexResult
    {
        ComplexVec z;
        double objective = 0.0;
        double duality_gap = 0.0;  // absolute bound on optimum - objective
        double kkt_residual = 0.0; // ||grad f0 + sum lambda_i grad f_i|| / ||grad f0||
        double max_violation = 0.0;
        int newton_steps = 0;
    };

    namespace detail
    {
        inline RealVec to_real(const ComplexVec &z)
        {
            RealVec x(2 * z.size());
            x.head(z.size()) = z.real();
            x.tail(z.size()) = z.imag();
            return x;
        }

        inline ComplexVec to_complex(const RealVec &x)
        {
            const Eigen::Index k = x.size() / 2;
            ComplexVec z(k);
            for (Eigen::Index i = 0; i < k; ++i)
                z(i) = cplx(x(i), x(k + i));
            return z;
        }

        /// Log-barrier model of a ConvexSubproblem in real coordinates. In phase 1 an extra slack s is
        /// appended and subtracted from every set/rate constraint; domain constraints stay hard.
        class BarrierModel
        {
        public:
            BarrierModel(const ConvexSubproblem &p, double floor) : p_(p), floor_(floor)
            {
                k_ = p.size();
                d_ = 2 * k_;
                for (const auto &a : p.rate_terms)
                    g_.push_back(to_real(a.gradient));
                c_ = to_real(p.objective.gradient);
            }

            Eigen::Index dim() const { return d_; }
            const RealVec &objective_gradient() const { return c_; }

            int constraint_count() const
            {
                const int set = p_.kind == ConvexSubproblem::Kind::transmit ? 1 : int(k_);
                return set + (p_.has_rate() ? 1 + int(g_.size()) : 0);
            }

            struct Local
            {
                bool inside = false;
                double value = 0.0;
                RealVec grad;
                RealMat hess;
                std::vector<double> f;         // constraint values (shifted)
                std::vector<RealVec> f_grad;   // their gradients (augmented)
            };

            /// Barrier value/derivatives at y = (x[, s]).
            Local evaluate(const RealVec &y, bool phase1, bool derivatives) const
            {
                const Eigen::Index n = d_ + (phase1 ? 1 : 0);
                const RealVec x = y.head(d_);
                const double s = phase1 ? y(d_) : 0.0;
                Local out;
                if (derivatives)
                {
                    out.grad = RealVec::Zero(n);
                    out.hess = RealMat::Zero(n, n);
                }

                auto add = [&](double f, const RealVec &df, const RealMat *d2f, double d2_scalar, bool relaxed) -> bool
                {
                    const double v = relaxed ? f - s : f;
                    if (!(v < 0.0))
                        return false;
                    out.value -= std::log(-v);
                    if (derivatives)
                    {
                        RealVec gv = RealVec::Zero(n);
                        gv.head(d_) = df;
                        if (phase1 && relaxed)
                            gv(d_) = -1.0;
                        out.grad += gv / (-v);
                        out.hess += gv * gv.transpose() / (v * v);
                        if (d2f)
                            out.hess.topLeftCorner(d_, d_) += *d2f / (-v);
                        if (d2_scalar != 0.0)
                            out.hess.topLeftCorner(d_, d_).diagonal().array() += d2_scalar / (-v);
                        out.f.push_back(v);
                        out.f_grad.push_back(gv);
                    }
                    return true;
                };

                if (p_.kind == ConvexSubproblem::Kind::transmit)
                {
                    if (!add(x.squaredNorm() - p_.radius * p_.radius, 2.0 * x, nullptr, 2.0, true))
                        return out;
                }
                else
                {
                    for (Eigen::Index i = 0; i < k_; ++i)
                    {
                        RealVec df = RealVec::Zero(d_);
                        df(i) = 2.0 * x(i);
                        df(k_ + i) = 2.0 * x(k_ + i);
                        const double f = x(i) * x(i) + x(k_ + i) * x(k_ + i) - p_.modulus(i) * p_.modulus(i);
                        if (derivatives)
                        {
                            RealMat d2 = RealMat::Zero(d_, d_);
                            d2(i, i) = 2.0;
                            d2(k_ + i, k_ + i) = 2.0;
                            if (!add(f, df, &d2, 0.0, true))
                                return out;
                        }
                        else if (!add(f, df, nullptr, 0.0, true))
                            return out;
                    }
                }

                if (p_.has_rate())
                {
                    const double scale = p_.rate_scale / std::numbers::ln2;
                    double sum_log = 0.0;
                    RealVec dr = 2.0 * p_.power_weight * x;
                    RealMat d2r = RealMat::Zero(d_, d_);
                    for (std::size_t t = 0; t < g_.size(); ++t)
                    {
                        const double a = p_.rate_terms[t].constant + g_[t].dot(x);
                        if (!add(floor_ - a, -g_[t], nullptr, 0.0, false))
                            return out;
                        sum_log += std::log(a);
                        if (derivatives)
                        {
                            dr -= scale * g_[t] / a;
                            d2r += scale * g_[t] * g_[t].transpose() / (a * a);
                        }
                    }
                    if (derivatives)
                        d2r.diagonal().array() += 2.0 * p_.power_weight;
                    const double fr = p_.power_weight * x.squaredNorm() + p_.rate_rhs - scale * sum_log;
                    if (!add(fr, dr, derivatives ? &d2r : nullptr, 0.0, true))
                        return out;
                }
                out.inside = true;
                return out;
            }

        private:
            const ConvexSubproblem &p_;
            double floor_;
            Eigen::Index k_ = 0, d_ = 0;
            std::vector<RealVec> g_;
            RealVec c_;
        };

        /// Minimizes t * lin^T y + barrier(y) by damped Newton until the squared Newton decrement drops
        /// below tol (or stops improving); returns steps taken.
        inline int center(const BarrierModel &m, RealVec &y, const RealVec &lin, double t, bool phase1, int budget,
                          double tol, const std::function<bool(const RealVec &)> &stop_early = nullptr)
        {
            int steps = 0;
            double last = std::numeric_limits<double>::infinity();
            int stalled = 0;
            for (; steps < budget; ++steps)
            {
                const auto e = m.evaluate(y, phase1, true);
                if (!e.inside)
                    throw std::logic_error("barrier: iterate left the domain");
                const RealVec g = t * lin + e.grad;
                RealMat h = e.hess;
                Eigen::LDLT<RealMat> ldlt(h);
                RealVec dy = ldlt.solve(-g);
                if (ldlt.info() != Eigen::Success || !dy.allFinite() || g.dot(dy) >= 0.0)
                {
                    h.diagonal().array() += 1e-12 * std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
                    dy = h.ldlt().solve(-g);
                }
                const double decrement = -g.dot(dy);
                if (!(decrement > tol))
                    break;
                // quadratic convergence has stopped: round-off floor
                if (decrement < 1e-8 && decrement > 0.5 * last)
                {
                    if (++stalled >= 2)
                        break;
                }
                else
                    stalled = 0;
                last = decrement;

                double step = 1.0;
                RealVec trial;
                bool accepted = false;
                for (int ls = 0; ls < 80; ++ls, step *= 0.5)
                {
                    trial = y + step * dy;
                    const auto et = m.evaluate(trial, phase1, false);
                    if (!et.inside)
                        continue;
                    // quadratic region: take the (domain-safe) Newton step
                    if (decrement < 0.25)
                    {
                        accepted = true;
                        break;
                    }
                    const double change = t * lin.dot(trial - y) + (et.value - e.value);
                    if (change <= -0.25 * step * decrement)
                    {
                        accepted = true;
                        break;
                    }
                }
                if (!accepted)
                    break;
                y = trial;
                if (stop_early && stop_early(y))
                    return steps + 1;
            }
            return steps;
        }
    }

    /// Log-barrier interior-point solver with a slack phase 1. Throws SubproblemInfeasible when the
    /// constraints have no strictly feasible point.
    inline ConvexResult solve_convex(const ConvexSubproblem &p, const ConvexOptions &opt = {})
    {
        const Eigen::Index k = p.size();
        if (k == 0 || p.objective.gradient.size() != k)
            throw std::invalid_argument("solve_convex: dimension mismatch");
        double scale = 0.0;
        if (p.kind == ConvexSubproblem::Kind::transmit)
        {
            if (!(p.radius > 0.0))
                throw std::invalid_argument("solve_convex: radius must be positive");
            scale = p.radius;
        }
        else
        {
            if (p.modulus.size() != k || !(p.modulus.minCoeff() > 0.0))
                throw std::invalid_argument("solve_convex: modulus bounds must be positive");
            scale = p.modulus.maxCoeff();
        }
        for (const auto &a : p.rate_terms)
            if (a.gradient.size() != k)
                throw std::invalid_argument("solve_convex: rate term dimension mismatch");
        for (const auto &a : p.rate_terms)
            if (!(a(p.start) > opt.domain_floor))
                throw std::invalid_argument("solve_convex: start point outside the rate-term domain");

        detail::BarrierModel model(p, opt.domain_floor);
        const Eigen::Index d = model.dim();
        const int m = model.constraint_count();
        ConvexResult res;

        // phase 1: minimize a common slack s until every set/rate constraint holds with margin
        RealVec x = detail::to_real(p.start);
        {
            const double margin = 1e-6 * std::min(1.0, scale * scale);
            RealVec y(d + 1);
            y.head(d) = x;
            y(d) = -margin;
            if (!model.evaluate(y, true, false).inside)
            {
                y(d) = 1.0;
                for (int grow = 0; !model.evaluate(y, true, false).inside; ++grow)
                {
                    if (grow > 2000)
                        throw SubproblemInfeasible("solve_convex: cannot bracket the phase-1 slack");
                    y(d) = 2.0 * y(d) + 1.0;
                }
                RealVec lin = RealVec::Zero(d + 1);
                lin(d) = 1.0;
                auto done = [&](const RealVec &v) { return v(d) < -margin; };
                double t = 1.0;
                for (int outer = 0; outer < 60 && !done(y); ++outer)
                {
                    res.newton_steps += detail::center(model, y, lin, t, true, opt.max_newton, 1e-12, done);
                    if ((m + 1) / t < 1e-3 * margin)
                        break;
                    t *= opt.barrier_growth;
                }
                if (!(y(d) < 0.0) || !model.evaluate(y.head(d).eval(), false, false).inside)
                    throw SubproblemInfeasible("solve_convex: no strictly feasible point");
            }
            x = y.head(d);
        }

        const double cnorm = p.objective.gradient.norm();
        if (cnorm == 0.0)
        {
            res.z = detail::to_complex(x);
            res.objective = p.objective(res.z);
            res.max_violation = p.max_violation(res.z);
            return res;
        }

        // phase 2 on the normalized objective -Re(c^H z) / (|c| scale)
        const RealVec lin = -model.objective_gradient() / (cnorm * scale);
        double t = double(m);
        for (int outer = 0; outer < 200; ++outer)
        {
            const bool last = double(m) / t < opt.gap_tol;
            res.newton_steps += detail::center(model, x, lin, t, false, opt.max_newton, last ? 1e-24 : 1e-12);
            if (last)
                break;
            t *= opt.barrier_growth;
        }

        const auto e = model.evaluate(x, false, true);
        RealVec r = lin;
        double lam_max = 0.0;
        for (std::size_t i = 0; i < e.f.size(); ++i)
        {
            r += e.f_grad[i] / (t * -e.f[i]);
            lam_max = std::max(lam_max, 1.0 / (t * -e.f[i]));
        }
        // least-squares multipliers on the active set, dropping negative ones
        std::vector<std::size_t> active;
        for (std::size_t i = 0; i < e.f.size(); ++i)
            if (1.0 / (t * -e.f[i]) > 1e-8 * lam_max)
                active.push_back(i);
        while (!active.empty())
        {
            RealMat a(x.size(), Eigen::Index(active.size()));
            for (std::size_t j = 0; j < active.size(); ++j)
                a.col(Eigen::Index(j)) = e.f_grad[active[j]];
            const RealVec lam = a.colPivHouseholderQr().solve(-lin);
            Eigen::Index worst;
            if (lam.minCoeff(&worst) < 0.0)
            {
                active.erase(active.begin() + worst);
                continue;
            }
            const RealVec polished = lin + a * lam;
            if (polished.norm() < r.norm())
                r = polished;
            break;
        }
        res.z = detail::to_complex(x);
        res.objective = p.objective(res.z);
        res.duality_gap = double(m) / t * cnorm * scale;
        res.kkt_residual = r.norm() / lin.norm();
        res.max_violation = p.max_violation(res.z);
        return res;
    }
}
