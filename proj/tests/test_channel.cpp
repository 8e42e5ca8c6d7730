// SPDX-License-Identifier: Apache-2.0

#include <sree/channel.hpp>

#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <numbers>

using namespace sree;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("path_loss reference values")
{
    const double fc = 3.5e9;
    const double lambda = 299792458.0 / fc;
    const double b0 = std::pow(lambda / (4.0 * std::numbers::pi), 2);
    CHECK_THAT(path_loss(1.0, 2.7, fc), WithinRel(b0, 1e-14));
    CHECK_THAT(path_loss(1.0, 2.1, fc), WithinRel(b0, 1e-14));
    CHECK_THAT(10.0 * std::log10(path_loss(1.0, 2.0, fc)), WithinAbs(-43.33, 0.01));

    const double db = 20.0 * std::log10(lambda / (4.0 * std::numbers::pi)) - 27.0 * std::log10(300.0);
    CHECK_THAT(10.0 * std::log10(path_loss(300.0, 2.7, fc)), WithinAbs(db, 1e-10));
    CHECK_THROWS_AS(path_loss(0.0, 2.0, fc), std::invalid_argument);
}

TEST_CASE("node_positions")
{
    Geometry g;
    g.theta = 0.0;
    auto p = node_positions(g);
    CHECK_THAT(p.projected_ris_rx(), WithinAbs(0.0, 1e-12));

    g.theta = std::numbers::pi / 3.0;
    p = node_positions(g);
    CHECK_THAT(p.projected_ris_rx(), WithinAbs(300.0, 1e-9));

    g = Geometry{};
    p = node_positions(g);
    CHECK(p.pt == Point3{0.0, 0.0, 50.0});
    CHECK(p.rx == Point3{0.0, 300.0, 0.0});
    const double d1 = 2.0 * 300.0 * std::sin(g.theta / 2.0);
    CHECK_THAT(distance(p.ris, p.rx), WithinRel(std::sqrt(d1 * d1 + 30.0 * 30.0), 1e-12));
    CHECK_THAT(distance(p.pt, p.ris), WithinRel(std::sqrt(300.0 * 300.0 + 20.0 * 20.0), 1e-12));
    CHECK_THAT(distance(p.pt, p.rx), WithinRel(std::sqrt(300.0 * 300.0 + 50.0 * 50.0), 1e-12));
}

TEST_CASE("LoS components are unit-modulus steering vectors")
{
    ChannelConfig cfg;
    const auto los = los_components(Geometry{}, cfg);
    CHECK(los.h.size() == 4);
    CHECK(los.G.rows() == 64);
    CHECK(los.G.cols() == 4);
    CHECK((los.h.cwiseAbs().array() - 1.0).abs().maxCoeff() < 1e-14);
    CHECK((los.f.cwiseAbs().array() - 1.0).abs().maxCoeff() < 1e-14);
    CHECK((los.G.cwiseAbs().array() - 1.0).abs().maxCoeff() < 1e-14);
    CHECK(cfg.ris_layout() == std::pair<int, int>{8, 8});

    ChannelConfig odd;
    odd.N = 12;
    CHECK(odd.ris_layout() == std::pair<int, int>{4, 3});
    odd.ris_nx = 5;
    odd.ris_nz = 2;
    CHECK_THROWS_AS(odd.ris_layout(), std::invalid_argument);
}

TEST_CASE("Rician power normalization E|entry|^2 = beta")
{
    Geometry g;
    for (double k : {0.0, db_to_linear(2.0), db_to_linear(10.0), 50.0})
    {
        ChannelConfig cfg;
        cfg.M = 2;
        cfg.N = 4;
        cfg.K1 = cfg.K2 = k;
        ChannelSampler sampler(g, cfg);
        RngStream rng(17, std::uint64_t(k * 1000));
        const int draws = 100000;
        double eh = 0.0, eg = 0.0, ef = 0.0;
        ComplexMat gsum = ComplexMat::Zero(4, 2);
        for (int i = 0; i < draws; ++i)
        {
            const auto ch = sampler.sample(rng);
            eh += std::norm(ch.h(1));
            eg += std::norm(ch.G(2, 1));
            ef += std::norm(ch.f(3));
            gsum += ch.G;
        }
        const auto &b = sampler.betas();
        INFO("K = " << k);
        CHECK_THAT(eh / draws, WithinRel(b.tr, 0.03));
        CHECK_THAT(eg / draws, WithinRel(b.ts, 0.03));
        CHECK_THAT(ef / draws, WithinRel(b.sr, 0.03));
        if (k == 0.0)
            CHECK(std::abs(gsum(2, 1)) / draws <= 4.0 * std::sqrt(b.ts / draws));
    }
}

TEST_CASE("Large K approaches pure LoS")
{
    Geometry g;
    ChannelConfig cfg;
    cfg.K1 = cfg.K2 = 1e6;
    ChannelSampler sampler(g, cfg);
    RngStream r1(3, 0), r2(3, 1);
    const auto a = sampler.sample(r1);
    const auto b = sampler.sample(r2);
    const auto &los = sampler.los();
    const auto &be = sampler.betas();
    CHECK((a.h - std::sqrt(be.tr) * los.h).norm() <= 1e-2 * std::sqrt(be.tr) * los.h.norm());
    CHECK((a.G - std::sqrt(be.ts) * los.G).norm() <= 1e-2 * std::sqrt(be.ts) * los.G.norm());
    CHECK((a.f - std::sqrt(be.sr) * los.f).norm() <= 1e-2 * std::sqrt(be.sr) * los.f.norm());
    CHECK((a.G - b.G).norm() <= 1e-2 * b.G.norm());

    cfg.K1 = cfg.K2 = std::numeric_limits<double>::infinity();
    const auto c = ChannelSampler(g, cfg).sample(r1);
    CHECK((c.h - std::sqrt(be.tr) * los.h).norm() <= 1e-12 * c.h.norm());
}

TEST_CASE("Exponential correlation across RIS elements")
{
    Geometry g;
    ChannelConfig cfg;
    cfg.M = 1;
    cfg.N = 6;
    cfg.K2 = 0.0;
    cfg.K3 = 0.0;
    cfg.corr_sr = Correlation::exponential(0.7);
    cfg.corr_ts = Correlation::exponential(0.7);
    ChannelSampler sampler(g, cfg);
    RngStream rng(5, 5);
    const int draws = 100000;
    cplx cf = 0.0, cg = 0.0;
    double pf = 0.0, pg = 0.0;
    for (int i = 0; i < draws; ++i)
    {
        const auto ch = sampler.sample(rng);
        cf += ch.f(2) * std::conj(ch.f(3));
        pf += 0.5 * (std::norm(ch.f(2)) + std::norm(ch.f(3)));
        cg += ch.G(2, 0) * std::conj(ch.G(3, 0));
        pg += 0.5 * (std::norm(ch.G(2, 0)) + std::norm(ch.G(3, 0)));
    }
    CHECK_THAT(std::abs(cf) / pf, WithinRel(0.7, 0.05));
    CHECK_THAT(std::abs(cg) / pg, WithinRel(0.7, 0.05));
}

TEST_CASE("Sampling is deterministic per stream")
{
    ChannelSampler sampler(Geometry{}, ChannelConfig{});
    RngStream a(11, 4), b(11, 4);
    const auto x = sampler.sample(a);
    const auto y = sampler.sample(b);
    CHECK(x.h == y.h);
    CHECK(x.G == y.G);
    CHECK(x.f == y.f);
}

TEST_CASE("derive_normalized")
{
    SystemParams params;
    ChannelRealization ch;
    RngStream rng(8, 8);
    ch.h = rng.complex_normal_vec(3);
    ch.G = ComplexMat::Random(5, 3);
    ch.f = ComplexVec::Zero(5);
    CHECK(derive_normalized(ch, params).M_hat.norm() == 0.0);

    params.noise_power_w = 1.0;
    params.reflection_efficiency = 1.0;
    ch.f = ComplexVec::Ones(5);
    auto dc = derive_normalized(ch, params);
    CHECK((dc.M_hat - ch.G).cwiseAbs().maxCoeff() == 0.0);
    CHECK((dc.h_hat - ch.h).norm() == 0.0);

    params = SystemParams{};
    params.reflection_efficiency = 0.6;
    ch.f = rng.complex_normal_vec(5);
    dc = derive_normalized(ch, params);
    const double sigma = std::sqrt(params.noise_power_w);
    for (int n = 0; n < 5; ++n)
        for (int m = 0; m < 3; ++m)
        {
            const cplx ref = std::sqrt(0.6) * std::conj(ch.f(n)) * ch.G(n, m) / sigma;
            CHECK(std::abs(dc.M_hat(n, m) - ref) <= 1e-15 * std::abs(ref));
        }
    // row-scaled G equals diag(f^H) G
    const ComplexMat full = std::sqrt(0.6) * ch.f.adjoint().asDiagonal() * ch.G / sigma;
    CHECK((full - dc.M_hat).norm() <= 1e-14 * full.norm());
}
