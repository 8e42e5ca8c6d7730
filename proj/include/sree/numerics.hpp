// SPDX-License-Identifier: Apache-2.0
//
// sree - energy-efficiency region toolkit for RIS-based symbiotic radio
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <utility>

namespace sree
{
    using cplx = std::complex<double>;
    using ComplexVec = Eigen::VectorXcd;
    using ComplexMat = Eigen::MatrixXcd;
    using RealVec = Eigen::VectorXd;
    using RealMat = Eigen::MatrixXd;

    /// Thrown when a correlation matrix has an eigenvalue below -1e-10.
    class NotPositiveSemidefinite : public std::domain_error
    {
    public:
        using std::domain_error::domain_error;
    };

    inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
    inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
    inline double watt_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }

    // ------------------------------------------------------------------------
    // Random streams

    /// Deterministic random stream keyed by (seed, stream id). One stream per
    /// Monte-Carlo trial; a stream must not be shared between threads.
    class RngStream
    {
    public:
        explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
            : seed_(seed), stream_id_(stream_id)
        {
            std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                              static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32),
                              0x5eedu};
            engine_.seed(seq);
        }

        std::uint64_t seed() const { return seed_; }
        std::uint64_t stream_id() const { return stream_id_; }

        double normal() { return normal_(engine_); }
        double uniform() { return uniform_(engine_); }

        /// Standard circularly-symmetric complex Gaussian, E|z|^2 = 1.
        cplx complex_normal()
        {
            const double re = normal_(engine_);
            const double im = normal_(engine_);
            return {re * std::numbers::sqrt2 / 2.0, im * std::numbers::sqrt2 / 2.0};
        }

        /// e^{j u}, u uniform on [0, 2 pi)
        cplx unit_phase() { return std::polar(1.0, 2.0 * std::numbers::pi * uniform()); }

        ComplexVec complex_normal_vec(Eigen::Index n)
        {
            ComplexVec v(n);
            for (Eigen::Index i = 0; i < n; ++i)
                v(i) = complex_normal();
            return v;
        }

        std::mt19937_64 &engine() { return engine_; }

    private:
        std::uint64_t seed_;
        std::uint64_t stream_id_;
        std::mt19937_64 engine_;
        std::normal_distribution<double> normal_{0.0, 1.0};
        std::uniform_real_distribution<double> uniform_{0.0, 1.0};
    };

    /// mean + cov_factor * u with u ~ CN(0, I).
    inline ComplexVec sample_cn(const ComplexVec &mean, const ComplexMat &cov_factor, RngStream &rng)
    {
        if (cov_factor.rows() != mean.size())
            throw std::invalid_argument("sample_cn: covariance factor rows must match mean size");
        ComplexVec u = rng.complex_normal_vec(cov_factor.cols());
        return mean + cov_factor * u;
    }

    // ------------------------------------------------------------------------
    // Special functions

    /// Principal branch of the Lambert-W function, Halley iteration.
    inline double lambert_w0(double x)
    {
        constexpr double inv_e = 1.0 / std::numbers::e;
        if (std::isnan(x))
            throw std::domain_error("lambert_w0: NaN argument");
        if (x < -inv_e)
        {
            if (x < -inv_e - 1e-15)
                throw std::domain_error("lambert_w0: argument below -1/e");
            x = -inv_e;
        }
        if (x == 0.0)
            return 0.0;
        if (std::isinf(x))
            return x;

        double w;
        if (x < -0.25)
        {
            // Series about the branch point.
            const double p = std::sqrt(std::max(0.0, 2.0 * (std::numbers::e * x + 1.0)));
            w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
        }
        else if (x < 3.0)
            w = std::log1p(x);
        else
        {
            const double l1 = std::log(x);
            const double l2 = std::log(l1);
            w = l1 - l2 + l2 / l1;
        }

        for (int it = 0; it < 100; ++it)
        {
            const double wp1 = w + 1.0;
            if (wp1 <= 0.0)
                break;
            const double ew = std::exp(w);
            const double f = w * ew - x;
            const double denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
            if (denom == 0.0)
                break;
            const double dw = f / denom;
            w -= dw;
            if (std::abs(dw) <= 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(w)))
                break;
        }
        return std::max(w, -1.0);
    }

    namespace detail
    {
        /// Exponentially scaled modified Bessel functions e^{-y} I0(y), e^{-y} I1(y), y >= 0.
        inline std::pair<double, double> bessel_i01_scaled(double y)
        {
            if (y < 0.0)
                throw std::domain_error("bessel_i01_scaled: negative argument");
            if (y <= 30.0)
            {
                const double q = 0.25 * y * y;
                double t0 = 1.0, t1 = 1.0; // k = 0 terms of I0 and 2 I1 / y
                double s0 = 1.0, s1 = 1.0;
                for (int k = 1; k < 500; ++k)
                {
                    t0 *= q / (double(k) * double(k));
                    t1 *= q / (double(k) * double(k + 1));
                    s0 += t0;
                    s1 += t1;
                    if (t0 < 1e-17 * s0 && t1 < 1e-17 * s1)
                        break;
                }
                const double scale = std::exp(-y);
                return {s0 * scale, 0.5 * y * s1 * scale};
            }

            // Hankel asymptotic expansion
            auto series = [y](double nu)
            {
                const double mu = 4.0 * nu * nu;
                double term = 1.0, sum = 1.0;
                for (int k = 1; k < 200; ++k)
                {
                    const double odd = 2.0 * k - 1.0;
                    const double next = -term * (mu - odd * odd) / (double(k) * 8.0 * y);
                    if (std::abs(next) >= std::abs(term))
                        break;
                    term = next;
                    sum += term;
                    if (std::abs(term) < 1e-17 * std::abs(sum))
                        break;
                }
                return sum;
            };
            const double pref = 1.0 / std::sqrt(2.0 * std::numbers::pi * y);
            return {pref * series(0.0), pref * series(1.0)};
        }
    }

    /// Laguerre function L_{1/2}(x) for x <= 0, via
    /// L_{1/2}(x) = e^{x/2} [ (1 - x) I0(-x/2) - x I1(-x/2) ].
    inline double laguerre_half(double x)
    {
        if (!(x <= 0.0))
            throw std::domain_error("laguerre_half: argument must be <= 0");
        const auto [i0e, i1e] = detail::bessel_i01_scaled(-0.5 * x);
        return (1.0 - x) * i0e - x * i1e;
    }

    // ------------------------------------------------------------------------
    // Linear algebra kernels

    struct EigPair
    {
        double value = 0.0;
        ComplexVec vector;
    };

    /// Largest eigenpair of a a^H + b b^H, solved on span{a, b}.
    inline EigPair top_eigpair_rank2(const ComplexVec &a, const ComplexVec &b)
    {
        const Eigen::Index m = a.size();
        if (m < 1 || b.size() != m)
            throw std::invalid_argument("top_eigpair_rank2: vectors must share a nonzero dimension");

        const double na = a.norm();
        const double nb = b.norm();
        if (na == 0.0 && nb == 0.0)
            return {0.0, ComplexVec::Unit(m, 0)};

        const bool a_major = na >= nb;
        const ComplexVec &p = a_major ? a : b;
        const ComplexVec &q = a_major ? b : a;
        const double np = a_major ? na : nb;

        const ComplexVec u1 = p / np;
        cplx proj = u1.dot(q);
        ComplexVec r = q - proj * u1;
        const cplx fix = u1.dot(r); // second Gram-Schmidt pass
        r -= fix * u1;
        proj += fix;
        const double nr = r.norm();

        // F restricted to {u1, u2}: [[np^2 + |proj|^2, proj nr], [conj, nr^2]]
        const double f11 = np * np + std::norm(proj);
        if (nr <= 1e-15 * np)
            return {f11, u1};

        const ComplexVec u2 = r / nr;
        const double f22 = nr * nr;
        const cplx f12 = proj * nr;

        const double half_diff = 0.5 * (f11 - f22);
        const double radius = std::hypot(half_diff, std::abs(f12));
        const double lambda = 0.5 * (f11 + f22) + radius;

        cplx c1, c2;
        if (f11 >= f22)
        {
            c1 = half_diff + radius; // lambda - f22
            c2 = std::conj(f12);
        }
        else
        {
            c1 = f12;
            c2 = radius - half_diff; // lambda - f11
        }
        const double cn = std::sqrt(std::norm(c1) + std::norm(c2));
        if (cn == 0.0)
            return {lambda, u1};
        ComplexVec v = (c1 / cn) * u1 + (c2 / cn) * u2;
        v.normalize();
        return {lambda, std::move(v)};
    }

    /// Hermitian square-root factor S with S S^H = R. Eigenvalues in [-1e-10, 0) are clipped.
    inline ComplexMat matrix_sqrt_psd(const ComplexMat &r)
    {
        if (r.rows() != r.cols())
            throw std::invalid_argument("matrix_sqrt_psd: matrix must be square");
        if (r.size() == 0)
            return r;
        const double asym = (r - r.adjoint()).cwiseAbs().maxCoeff();
        if (asym > 1e-12 * std::max(1.0, r.cwiseAbs().maxCoeff()))
            throw std::invalid_argument("matrix_sqrt_psd: matrix is not Hermitian");

        const ComplexMat herm = 0.5 * (r + r.adjoint());
        Eigen::SelfAdjointEigenSolver<ComplexMat> es(herm);
        if (es.info() != Eigen::Success)
            throw std::runtime_error("matrix_sqrt_psd: eigendecomposition failed");
        const RealVec &ev = es.eigenvalues();
        if (ev.minCoeff() < -1e-10)
            throw NotPositiveSemidefinite("matrix_sqrt_psd: smallest eigenvalue below -1e-10");
        const RealVec root = ev.cwiseMax(0.0).cwiseSqrt();
        return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().adjoint();
    }
}
