// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "numerics.hpp"
#include "system_params.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <utility>

namespace sree
{
    inline constexpr double speed_of_light = 299792458.0;

    using Point3 = std::array<double, 3>;

    inline double distance(const Point3 &a, const Point3 &b)
    {
        return std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    }

    struct Geometry
    {
        double d0 = 300.0;
        double theta = 20.0 * std::numbers::pi / 180.0;
        double h_pt = 50.0;
        double h_ris = 30.0;
        double fc = 3.5e9;
        double alpha_tr = 2.7;
        double alpha_ts = 2.7;
        double alpha_sr = 2.1;

        double wavelength() const { return speed_of_light / fc; }

        void validate() const
        {
            if (!(d0 > 0.0))
                throw std::invalid_argument("Geometry: d0 must be positive");
            if (!(theta > 0.0 && theta < std::numbers::pi))
                throw std::invalid_argument("Geometry: theta must lie in (0, pi)");
            if (!(fc > 0.0))
                throw std::invalid_argument("Geometry: fc must be positive");
            if (!(alpha_tr >= 2.0 && alpha_ts >= 2.0 && alpha_sr >= 2.0))
                throw std::invalid_argument("Geometry: path-loss exponents must be >= 2");
        }
    };

    struct NodePositions
    {
        Point3 pt;
        Point3 rx;
        Point3 ris;

        /// RIS-receiver distance projected onto the ground plane
        double projected_ris_rx() const { return std::hypot(ris[0] - rx[0], ris[1] - rx[1]); }
    };

    /// PT at (0, 0, h_pt), receiver at (0, d0, 0), RIS at ground range d0 from the PT
    /// and angle theta away from the receiver direction, so d1 = 2 d0 sin(theta / 2).
    inline NodePositions node_positions(const Geometry &g)
    {
        return {{0.0, 0.0, g.h_pt},
                {0.0, g.d0, 0.0},
                {g.d0 * std::sin(g.theta), g.d0 * std::cos(g.theta), g.h_ris}};
    }

    /// beta = (lambda / 4 pi)^2 d^-alpha
    inline double path_loss(double d, double alpha, double fc)
    {
        if (!(d > 0.0))
            throw std::invalid_argument("path_loss: distance must be positive");
        const double b0 = speed_of_light / fc / (4.0 * std::numbers::pi);
        return b0 * b0 * std::pow(d, -alpha);
    }

    struct PathLosses
    {
        double tr = 0.0; // PT -> receiver
        double ts = 0.0; // PT -> RIS
        double sr = 0.0; // RIS -> receiver
    };

    inline PathLosses path_losses(const Geometry &g)
    {
        const auto pos = node_positions(g);
        return {path_loss(distance(pos.pt, pos.rx), g.alpha_tr, g.fc),
                path_loss(distance(pos.pt, pos.ris), g.alpha_ts, g.fc),
                path_loss(distance(pos.ris, pos.rx), g.alpha_sr, g.fc)};
    }

    struct Correlation
    {
        enum class Kind
        {
            identity,
            exponential
        };
        Kind kind = Kind::identity;
        double r = 0.0;

        static Correlation identity() { return {}; }
        static Correlation exponential(double r) { return {Kind::exponential, r}; }

        /// R_ij = r^|i-j| for the exponential model
        ComplexMat matrix(Eigen::Index n) const
        {
            if (kind == Kind::identity)
                return ComplexMat::Identity(n, n);
            if (!(r >= 0.0 && r < 1.0))
                throw std::invalid_argument("Correlation: exponential coefficient must lie in [0, 1)");
            ComplexMat out(n, n);
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < n; ++j)
                    out(i, j) = std::pow(r, double(std::abs(i - j)));
            return out;
        }
    };

    struct ChannelConfig
    {
        double K1 = db_to_linear(2.0);
        double K2 = db_to_linear(10.0);
        std::optional<double> K3; // defaults to K2
        Correlation corr_ts;
        Correlation corr_sr;
        int M = 4;
        int N = 64;
        int ris_nx = 0; // 0: pick the most square factorization of N
        int ris_nz = 0;

        double k3() const { return K3.value_or(K2); }

        std::pair<int, int> ris_layout() const
        {
            if (ris_nx > 0 && ris_nz > 0)
            {
                if (ris_nx * ris_nz != N)
                    throw std::invalid_argument("ChannelConfig: ris_nx * ris_nz must equal N");
                return {ris_nx, ris_nz};
            }
            int nz = 1;
            for (int d = 1; d * d <= N; ++d)
                if (N % d == 0)
                    nz = d;
            return {N / nz, nz};
        }

        void validate() const
        {
            if (M < 1 || N < 1)
                throw std::invalid_argument("ChannelConfig: M and N must be >= 1");
            if (!(K1 >= 0.0 && K2 >= 0.0 && k3() >= 0.0))
                throw std::invalid_argument("ChannelConfig: Rician factors must be >= 0");
            (void)ris_layout();
        }
    };

    namespace detail
    {
        inline Point3 unit_direction(const Point3 &from, const Point3 &to)
        {
            const double d = distance(from, to);
            if (d == 0.0)
                return {0.0, 0.0, 0.0};
            return {(to[0] - from[0]) / d, (to[1] - from[1]) / d, (to[2] - from[2]) / d};
        }

        /// Half-wavelength ULA along x, centred on the node
        inline ComplexVec ula_response(int m, const Point3 &u)
        {
            ComplexVec a(m);
            for (int k = 0; k < m; ++k)
            {
                const double x = 0.5 * (k - 0.5 * (m - 1));
                a(k) = std::polar(1.0, 2.0 * std::numbers::pi * x * u[0]);
            }
            return a;
        }

        /// Half-wavelength nx-by-nz UPA on the xOz plane, element index iz * nx + ix
        inline ComplexVec upa_response(int nx, int nz, const Point3 &u)
        {
            ComplexVec a(nx * nz);
            for (int iz = 0; iz < nz; ++iz)
                for (int ix = 0; ix < nx; ++ix)
                {
                    const double x = 0.5 * (ix - 0.5 * (nx - 1));
                    const double z = 0.5 * (iz - 0.5 * (nz - 1));
                    a(iz * nx + ix) = std::polar(1.0, 2.0 * std::numbers::pi * (x * u[0] + z * u[2]));
                }
            return a;
        }

        inline double los_amplitude(double k)
        {
            return std::isinf(k) ? 1.0 : std::sqrt(k / (k + 1.0));
        }

        inline double nlos_amplitude(double k)
        {
            return std::isinf(k) ? 0.0 : std::sqrt(1.0 / (k + 1.0));
        }
    }

    struct LosComponents
    {
        ComplexVec h; // M
        ComplexMat G; // N x M
        ComplexVec f; // N
    };

    inline LosComponents los_components(const Geometry &g, const ChannelConfig &cfg)
    {
        const auto pos = node_positions(g);
        const auto [nx, nz] = cfg.ris_layout();
        const Point3 pt_rx = detail::unit_direction(pos.pt, pos.rx);
        const Point3 pt_ris = detail::unit_direction(pos.pt, pos.ris);
        const Point3 ris_rx = detail::unit_direction(pos.ris, pos.rx);
        const Point3 ris_pt = detail::unit_direction(pos.ris, pos.pt);

        LosComponents los;
        los.h = detail::ula_response(cfg.M, pt_rx).conjugate();
        los.f = detail::upa_response(nx, nz, ris_rx).conjugate();
        los.G = detail::upa_response(nx, nz, ris_pt) * detail::ula_response(cfg.M, pt_ris).transpose();
        return los;
    }

    struct ChannelRealization
    {
        ComplexVec h;
        ComplexMat G;
        ComplexVec f;
        PathLosses betas;
    };

    /// Draws Rician realizations for a fixed geometry and configuration.
    class ChannelSampler
    {
    public:
        ChannelSampler(const Geometry &g, const ChannelConfig &cfg) : cfg_(cfg)
        {
            cfg.validate();
            betas_ = path_losses(g);
            los_ = los_components(g, cfg);
            sqrt_ts_ = matrix_sqrt_psd(cfg.corr_ts.matrix(cfg.N));
            sqrt_sr_ = matrix_sqrt_psd(cfg.corr_sr.matrix(cfg.N));
            ts_identity_ = cfg.corr_ts.kind == Correlation::Kind::identity;
            sr_identity_ = cfg.corr_sr.kind == Correlation::Kind::identity;
        }

        /// Override the geometry-derived path losses.
        void set_path_losses(const PathLosses &b) { betas_ = b; }

        const PathLosses &betas() const { return betas_; }
        const LosComponents &los() const { return los_; }
        const ChannelConfig &config() const { return cfg_; }

        /// Draw order: h, G (column-major), f.
        ChannelRealization sample(RngStream &rng) const
        {
            const int m = cfg_.M, n = cfg_.N;
            const double k2 = cfg_.K2, k3 = cfg_.k3();

            ChannelRealization out;
            out.betas = betas_;

            ComplexVec h_nlos = rng.complex_normal_vec(m);
            out.h = std::sqrt(betas_.tr) *
                    (detail::los_amplitude(cfg_.K1) * los_.h + detail::nlos_amplitude(cfg_.K1) * h_nlos);

            ComplexMat g_nlos(n, m);
            for (int c = 0; c < m; ++c)
                for (int r = 0; r < n; ++r)
                    g_nlos(r, c) = rng.complex_normal();
            if (!ts_identity_)
                g_nlos = sqrt_ts_ * g_nlos;
            out.G = std::sqrt(betas_.ts) * (detail::los_amplitude(k2) * los_.G + detail::nlos_amplitude(k2) * g_nlos);

            ComplexVec f_nlos = rng.complex_normal_vec(n);
            if (!sr_identity_)
                f_nlos = sqrt_sr_ * f_nlos;
            out.f = std::sqrt(betas_.sr) * (detail::los_amplitude(k3) * los_.f + detail::nlos_amplitude(k3) * f_nlos);
            return out;
        }

    private:
        ChannelConfig cfg_;
        PathLosses betas_;
        LosComponents los_;
        ComplexMat sqrt_ts_;
        ComplexMat sqrt_sr_;
        bool ts_identity_ = true;
        bool sr_identity_ = true;
    };

    inline ChannelRealization sample_channels(const Geometry &g, const ChannelConfig &cfg, RngStream &rng)
    {
        return ChannelSampler(g, cfg).sample(rng);
    }

    /// Noise-normalized channels: h_hat = h / sigma, M_hat = sqrt(rho) diag(f^H) G / sigma.
    struct DerivedChannel
    {
        ComplexVec h_hat;
        ComplexMat M_hat;

        Eigen::Index antennas() const { return h_hat.size(); }
        Eigen::Index elements() const { return M_hat.rows(); }
    };

    inline DerivedChannel derive_normalized(const ChannelRealization &ch, const SystemParams &params)
    {
        if (!(params.noise_power_w > 0.0))
            throw std::invalid_argument("derive_normalized: noise power must be positive");
        if (!(params.reflection_efficiency > 0.0 && params.reflection_efficiency <= 1.0))
            throw std::invalid_argument("derive_normalized: rho must lie in (0, 1]");
        if (ch.G.rows() != ch.f.size() || ch.G.cols() != ch.h.size())
            throw std::invalid_argument("derive_normalized: inconsistent link dimensions");
        const double sigma = std::sqrt(params.noise_power_w);
        const double scale = std::sqrt(params.reflection_efficiency) / sigma;
        DerivedChannel dc;
        dc.h_hat = ch.h / sigma;
        dc.M_hat.resize(ch.G.rows(), ch.G.cols());
        for (Eigen::Index n = 0; n < ch.G.rows(); ++n)
            dc.M_hat.row(n) = (scale * std::conj(ch.f(n))) * ch.G.row(n);
        return dc;
    }
}
