#include "doctest.h"

#include <cmath>

#include "brw/errors.hpp"
#include "brw/forest.hpp"
#include "oracles.hpp"

using namespace brw;
using oracle::kH;

TEST_CASE("W and D on a hand-built generation")
{
    Generation g;
    g.depth = 1;
    g.positions = {0.0, std::log(2.0)};
    CHECK(eval_W(g, 1.0, 0.0) == doctest::Approx(1.5));
    CHECK(eval_D(g) == doctest::Approx(0.5 * std::log(2.0)));
    // W_n(t) carries the e^{-n psi(t)} factor
    CHECK(eval_W(g, 1.0, std::log(1.5)) == doctest::Approx(1.0));
    CHECK(eval_W(g, 2.0, 0.0) == doctest::Approx(1.25));
}

TEST_CASE("truncated D counts only flagged particles")
{
    const ExactLatticeR r(kH);
    Generation g;
    g.depth = 2;
    g.positions = {kH, -kH, 2.0 * kH};
    g.above_barrier = {1, 0, 1};
    const double expected = 2.0 * std::exp(-kH) + 4.0 * std::exp(-2.0 * kH);
    CHECK(eval_D_trunc(g, r, 0.0, BarrierMode::Audit) == doctest::Approx(expected));
    CHECK_THROWS_AS(eval_D_trunc(g, r, 0.0, BarrierMode::None), PreconditionError);
}

TEST_CASE("root generation preconditions")
{
    ForestOptions o;
    o.mode = BarrierMode::Kill;
    o.beta = 0.0;
    o.start = 0.0;
    CHECK_NOTHROW(root_generation(o));
    o.start = -0.5;
    CHECK_THROWS_AS(root_generation(o), PreconditionError);
    o.beta = 1.0;
    CHECK_NOTHROW(root_generation(o));
    o.beta = -1.0;
    CHECK_THROWS_AS(root_generation(o), PreconditionError);
}

TEST_CASE("exact martingale means on LatticeBinary by lineage enumeration")
{
    // E[W_n(1)] = 1, E[D_n] = 0 and E[D_n^(0)] = R(0) e^0 = 1 for every n.
    const auto w = [](const std::vector<double>& p) { return std::exp(-p.back()); };
    const auto d = [](const std::vector<double>& p) { return p.back() * std::exp(-p.back()); };
    const auto d0 = [](const std::vector<double>& p) {
        for (double v : p) {
            if (!(v > 0.0)) {
                return 0.0;
            }
        }
        return oracle::lattice_r(p.back()) * std::exp(-p.back());
    };
    for (int n = 1; n <= 8; ++n) {
        CHECK(oracle::lattice_lineage_sum(w, n) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::abs(oracle::lattice_lineage_sum(d, n)) < 1e-12);
        CHECK(oracle::lattice_lineage_sum(d0, n) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("Monte Carlo martingale means on LatticeBinary")
{
    const OffspringLaw law = OffspringLaw::lattice_binary();
    const ExactLatticeR r(kH);
    SuiteOptions o;
    o.generations = 6;
    o.replicas = 4000;
    o.forest.mode = BarrierMode::Audit;
    o.seed = 21;
    const auto series = run_martingale_suite(law, o, &r);
    const DepthMeans m = martingale_means(series, o.generations);
    for (int n = 1; n <= o.generations; ++n) {
        CHECK(m.w1[n].z_score(1.0) < 4.0);
        CHECK(m.d[n].z_score(0.0) < 4.0);
        CHECK(m.d_beta[n].z_score(1.0) < 4.0);
    }
}

TEST_CASE("kill and audit runs with one key are coupled")
{
    const OffspringLaw law = normalize_to_boundary(OffspringLaw::binary_gaussian());
    ForestOptions audit, kill;
    audit.mode = BarrierMode::Audit;
    kill.mode = BarrierMode::Kill;
    audit.beta = kill.beta = 0.5;
    const std::uint64_t key = substream_key(3, "forest", 0);
    Generation a = root_generation(audit), k = root_generation(kill);
    for (int n = 0; n < 8; ++n) {
        a = step_generation(a, law, audit, key);
        k = step_generation(k, law, kill, key);
        std::vector<double> flagged;
        for (std::size_t i = 0; i < a.population(); ++i) {
            if (a.above_barrier[i]) {
                flagged.push_back(a.positions[i]);
            }
        }
        CHECK(flagged == k.positions);
    }
}

TEST_CASE("population cap marks the series truncated")
{
    const OffspringLaw law = normalize_to_boundary(OffspringLaw::binary_gaussian());
    ForestOptions o;
    o.cap = 100;
    const MartingaleSeries s = simulate_martingales(law, 10, o, nullptr, 77);
    CHECK(s.truncated);
    CHECK(s.records.size() == 7); // 2^6 = 64 <= 100 < 128
    CHECK(s.records.back().population == 64);
    CHECK(!s.error.empty());
}

TEST_CASE("suite output does not depend on the worker count")
{
    const OffspringLaw law = OffspringLaw::lattice_binary();
    const ExactLatticeR r(kH);
    SuiteOptions o;
    o.generations = 5;
    o.replicas = 64;
    o.forest.mode = BarrierMode::Kill;
    o.seed = 99;
    const std::string one = martingales_csv(run_martingale_suite(law, o, &r), o.seed);
    o.workers = 4;
    const std::string four = martingales_csv(run_martingale_suite(law, o, &r), o.seed);
    CHECK(one == four);
}

TEST_CASE("cascade identity: recombined D_m looks like D_{m+1}")
{
    const OffspringLaw law = OffspringLaw::lattice_binary();
    const CascadeResult c = cascade_check(law, 3, 2000, 5);
    CHECK(c.direct.size() == 2000);
    CHECK(c.p_recombined_next > 0.001);
}
