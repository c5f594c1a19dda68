#include "doctest.h"

#include <cmath>
#include <numbers>

#include "brw/criterion.hpp"
#include "brw/errors.hpp"
#include "oracles.hpp"

using namespace brw;
using oracle::kH;

TEST_CASE("X for a single child at 0 is 1")
{
    const ExactLatticeR r(kH);
    for (double z : {0.5, 1.0, 7.0}) {
        CHECK(eval_X(std::vector<double>{0.0}, z, r) == doctest::Approx(1.0));
    }
    CHECK_THROWS_AS(eval_X(std::vector<double>{0.0}, 0.0, r), PreconditionError);
}

TEST_CASE("X uses a strict indicator at the killing level")
{
    const ExactLatticeR r(kH);
    // zeta = h, single child at -h lands at 0, which does not count.
    CHECK(eval_X(std::vector<double>{-kH}, kH, r) == 0.0);
    // two children at +h from zeta = h: 2 R(2h) e^{-h} / R(h) = 4 e^{-h}
    CHECK(eval_X(std::vector<double>{kH, kH}, kH, r) == doctest::Approx(4.0 * std::exp(-kH)));
}

TEST_CASE("E[X] = 1 under P_zeta on the lattice")
{
    const OffspringLaw law = OffspringLaw::lattice_binary();
    const ExactLatticeR r(kH);
    for (int k : {1, 2, 5}) {
        // exact: q R((k-1)h) e^{h} + (1-q) 2 R((k+1)h) e^{-h}, over R(kh)
        const double z = k * kH;
        const double exact = (oracle::kQ * (k > 1 ? oracle::lattice_r(z - kH) : 0.0) * std::exp(kH) +
                              (1.0 - oracle::kQ) * 2.0 * oracle::lattice_r(z + kH) * std::exp(-kH)) /
                             oracle::lattice_r(z);
        CHECK(exact == doctest::Approx(1.0).epsilon(1e-12));
        Stream s(make_stream(1, "x-test", static_cast<std::uint64_t>(k)));
        Moments m;
        for (int i = 0; i < 100000; ++i) {
            m.add(eval_X(law, z, r, s));
        }
        CHECK(m.estimate().z_score(1.0) < 4.0);
    }
}

TEST_CASE("importance-sampled X of HeavyCount is unbiased")
{
    // E[X] = E[N] * int R(zeta + x) e^{-x} 1{x > -zeta} phi(x) dx / R(zeta) for
    // any R; the integral is done by a fine midpoint rule.
    const OffspringLaw law = normalize_to_boundary(OffspringLaw::heavy_count(4.0));
    const ExactLatticeR r(0.05);
    const double zeta = 3.0;
    const auto [mu, sd] = law.gaussian_displacement();
    double integral = 0.0;
    const double lo = -zeta, hi = mu + 14.0 * sd, dx = 1e-5;
    for (double x = lo + 0.5 * dx; x < hi; x += dx) {
        const double z = (x - mu) / sd;
        integral += r(zeta + x) * std::exp(-x - 0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi)) * dx;
    }
    const double exact = law.count_table()->mean() * integral / r(zeta);
    for (double clt : {1e4, 50.0}) {
        XSamplerOptions opt;
        opt.clt_threshold = clt;
        XSampler x(law, r, zeta, opt);
        Stream s(make_stream(2, "hc-x-test", static_cast<std::uint64_t>(clt)));
        Moments m;
        for (int i = 0; i < 200000; ++i) {
            m.add(x.draw(s).x_weighted);
        }
        CHECK(m.estimate().z_score(exact) < 4.0);
    }
}

TEST_CASE("truncated moments of LatticeBinary flatten at the analytic cap")
{
    // Y (log+ Y)^2 equals (2 + sqrt 2) h^2 with probability q and 0 otherwise;
    // Z < 1 always, so the Z curve is identically 0.
    const double top = (2.0 + std::numbers::sqrt2) * kH * kH;
    MomentOptions o;
    o.draws = 100000;
    o.caps = {0.5 * top, top, 2.0 * top, 1e6};
    o.seed = 3;
    const MomentReport rep = estimate_moments(OffspringLaw::lattice_binary(), o);
    REQUIRE(rep.m_y.size() == 4);
    CHECK(rep.m_y[1].mean == rep.m_y[2].mean);
    CHECK(rep.m_y[2].mean == rep.m_y[3].mean);
    CHECK(rep.m_y[0].mean < rep.m_y[1].mean);
    CHECK(rep.m_y[3].z_score(0.5 * kH * kH) < 4.0);
    for (const auto& e : rep.m_z) {
        CHECK(e.mean == 0.0);
    }
    CHECK(rep.slope_y == 0.0);
}

TEST_CASE("truncated moments of HeavyCount(2) keep growing")
{
    MomentOptions o;
    o.draws = 200000;
    o.caps = {1e2, 1e4, 1e6, 1e8};
    o.seed = 4;
    const MomentReport rep =
        estimate_moments(normalize_to_boundary(OffspringLaw::heavy_count(2.0)), o);
    for (std::size_t i = 1; i < rep.m_y.size(); ++i) {
        CHECK(rep.m_y[i].mean >= rep.m_y[i - 1].mean);
    }
    CHECK(rep.slope_y > 0.0);
}

TEST_CASE("tail functionals of LatticeBinary")
{
    const ExactLatticeR r(kH);
    MomentOptions o;
    o.draws = 100000;
    o.seed = 5;
    const TailFunctionals tf =
        eval_tail_functionals(OffspringLaw::lattice_binary(), {0.0, 0.5, kH - 1e-9, kH + 0.01, 3.0}, 1.0, r, o);
    // F1(z) = E[Y; log Y >= z] = q (2 + sqrt 2) = 1/2 for 0 <= z <= h, 0 beyond
    CHECK(std::abs(tf.f1[0] - 0.5) <= 4.0 * tf.se_f1[0]);
    CHECK(tf.f1[0] == tf.f1[2]);
    CHECK(tf.f1[3] == 0.0);
    for (std::size_t i = 0; i < tf.f1.size(); ++i) {
        CHECK(tf.f1[i] <= 1.0);
        if (i > 0) {
            CHECK(tf.f1[i] <= tf.f1[i - 1]);
            CHECK(tf.f3[i] <= tf.f3[i - 1]);
        }
    }
}

TEST_CASE("criterion series: nonnegative summands and nondecreasing sums")
{
    const OffspringLaw law = OffspringLaw::lattice_binary();
    const ExactLatticeR r(kH);
    CriterionOptions o;
    o.horizon = 300;
    o.paths = 4;
    o.draws = 16;
    o.seed = 8;
    const CriterionReport rep = run_criterion_series(law, r, o);
    REQUIRE(rep.series.size() == 4);
    CHECK(rep.series[0].name == "truncated");
    CHECK(rep.series[1].name == "tail_y1");
    CHECK(rep.series[3].name == "tail_y8");
    for (const auto& s : rep.series) {
        for (std::size_t n = 0; n < s.summand.size(); ++n) {
            CHECK(s.summand[n] >= 0.0);
            if (n > 0) {
                CHECK(s.partial_sum[n] >= s.partial_sum[n - 1]);
            }
        }
    }
    o.workers = 3;
    CHECK(criterion_csv({rep}) == criterion_csv({run_criterion_series(law, r, o)}));
}

TEST_CASE("verdict rule")
{
    CriterionReport rep;
    SeriesTrack t;
    t.name = "truncated";
    t.series_class = SeriesClass::Plateau;
    rep.series.push_back(t);
    t.name = "tail_y1";
    rep.series.push_back(t);
    CHECK(criterion_verdict(rep) == "satisfying");
    rep.series[1].series_class = SeriesClass::Divergent;
    CHECK(criterion_verdict(rep) == "violating");
    rep.series[1].series_class = SeriesClass::Indeterminate;
    rep.series[0].series_class = SeriesClass::Indeterminate;
    CHECK(criterion_verdict(rep) == "undetermined");
    CHECK(tail_series_name(2.0) == "tail_y2");
    CHECK(tail_series_name(0.5) == "tail_y0.5");
}
