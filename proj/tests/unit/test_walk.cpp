#include "doctest.h"

#include <cmath>
#include <memory>
#include <numbers>

#include "brw/enumerate.hpp"
#include "brw/errors.hpp"
#include "brw/walk.hpp"
#include "oracles.hpp"

using namespace brw;
using oracle::kH;

TEST_CASE("step laws of the built-in families")
{
    const StepLaw lat = derive_step_law(OffspringLaw::lattice_binary());
    REQUIRE(lat.values().size() == 2);
    CHECK(lat.values()[0] == doctest::Approx(-kH));
    CHECK(lat.values()[1] == doctest::Approx(kH));
    CHECK(lat.probabilities()[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(lat.mean() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(lat.variance() == doctest::Approx(kH * kH));
    CHECK(lat.lattice_steps() == std::vector<std::int64_t>{-1, 1});

    const StepLaw g = derive_step_law(normalize_to_boundary(OffspringLaw::binary_gaussian()));
    CHECK(g.kind() == StepLaw::Kind::Gaussian);
    CHECK(g.variance() == doctest::Approx(2.0 * std::numbers::ln2).epsilon(1e-9));
}

TEST_CASE("resampled step law of LatticeBinary matches the analytic one")
{
    const OffspringLaw law = OffspringLaw::lattice_binary();
    const StepLaw r = derive_step_law(law, StepMode::Resampled);
    REQUIRE(r.values().size() == 2);
    CHECK(r.probabilities()[0] == doctest::Approx(0.5).epsilon(1e-12));
    Stream s(make_stream(1, "resampled-test", 0));
    Moments up;
    for (int i = 0; i < 40000; ++i) {
        up.add(r.sample(s) > 0.0 ? 1.0 : 0.0);
    }
    CHECK(up.estimate().z_score(0.5) < 4.0);
}

TEST_CASE("exact lattice R")
{
    const ExactLatticeR r(kH);
    CHECK(r(0.0) == 1.0);
    CHECK(r(-0.1) == 0.0);
    CHECK(r(0.5 * kH) == 2.0);
    CHECK(r(kH) == 2.0);
    CHECK(r(1.5 * kH) == 4.0);
    CHECK(r(10.0 * kH) == 20.0);
    for (double x : {0.0, 0.3, 1.0, 2.0 * kH, 7.7}) {
        CHECK(r(x) == oracle::lattice_r(x));
    }
}

TEST_CASE("harmonicity of the lattice R at x = 1.5h")
{
    // E[R(S_1 + x); S_1 + x > 0] = (R(2.5h) + R(0.5h)) / 2 = (6 + 2) / 2 = 4 = R(1.5h)
    const ExactLatticeR r(kH);
    const double x = 1.5 * kH;
    CHECK(0.5 * (r(x + kH) + r(x - kH)) == r(x));
    // and at every lattice point k h, k >= 1
    for (int k = 1; k < 50; ++k) {
        const double y = k * kH;
        CHECK(0.5 * (r(y + kH) + (y - kH > 0.0 ? r(y - kH) : 0.0)) == doctest::Approx(r(y)));
    }
}

TEST_CASE("Monte Carlo renewal table on the lattice agrees with the exact R")
{
    const StepLaw step = derive_step_law(OffspringLaw::lattice_binary());
    RenewalOptions o;
    o.excursions = 20000;
    o.grid_max = 20.0 * kH;
    o.seed = 4;
    o.budget = 1000000;
    const RenewalTable t = estimate_renewal(step, o);
    REQUIRE(t.lattice_span);
    CHECK(t.r[0] == 1.0);
    const ExactLatticeR exact(kH);
    int checked = 0;
    for (std::size_t i = 1; i < t.x.size(); ++i) {
        if (t.se_r[i] > 0.0) {
            CHECK(std::abs(t.r[i] - exact(t.x[i])) <= 4.0 * t.se_r[i]);
            ++checked;
        }
    }
    CHECK(checked > 10);
    // every R column is nondecreasing
    for (std::size_t i = 1; i < t.r.size(); ++i) {
        CHECK(t.r[i] >= t.r[i - 1]);
    }
}

TEST_CASE("renewal tables round-trip through CSV and interpolate")
{
    const StepLaw step = derive_step_law(normalize_to_boundary(OffspringLaw::binary_gaussian()));
    RenewalOptions o;
    o.excursions = 2000;
    o.seed = 2;
    o.budget = 100000;
    const RenewalTable t = estimate_renewal(step, o);
    const RenewalTable back = parse_renewal_csv(renewal_csv(t));
    REQUIRE(back.x.size() == t.x.size());
    for (std::size_t i = 0; i < t.x.size(); ++i) {
        CHECK(back.r[i] == t.r[i]);
        CHECK(back.u[i] == t.u[i]);
    }
    const auto shared = std::make_shared<const RenewalTable>(t);
    const TabulatedR strict(shared, false);
    CHECK(strict(0.0) == 1.0);
    CHECK(strict(-1.0) == 0.0);
    const double mid = 0.5 * (t.x[3] + t.x[4]);
    CHECK(strict(mid) == doctest::Approx(0.5 * (t.r[3] + t.r[4])));
    CHECK_THROWS_AS(strict(t.x_max() + 1.0), RIncompatible);
    const TabulatedR tail(shared, true);
    CHECK(tail(t.x_max() + 1.0) == doctest::Approx(t.r.back() + tail.tail_slope()));
    CHECK(tail.tail_slope() > 0.0);
}

TEST_CASE("ladder decomposition of a walk path")
{
    const StepLaw step = derive_step_law(OffspringLaw::lattice_binary());
    Stream s(make_stream(8, "ladder-test", 0));
    const LadderDecomposition d = ladder_decomposition(step, 5000, s);
    REQUIRE(!d.ascending_heights.empty());
    for (std::size_t i = 1; i < d.ascending_heights.size(); ++i) {
        CHECK(d.ascending_heights[i] > d.ascending_heights[i - 1]);
        CHECK(d.ascending_epochs[i] > d.ascending_epochs[i - 1]);
        // a +-h walk climbs its strict records one step at a time
        CHECK(d.ascending_heights[i] - d.ascending_heights[i - 1] == doctest::Approx(kH));
    }
    for (std::size_t i = 1; i < d.descending_heights.size(); ++i) {
        CHECK(d.descending_heights[i] >= d.descending_heights[i - 1]);
    }
}

TEST_CASE("harmonic check of the exact lattice R passes at every grid point")
{
    const StepLaw step = derive_step_law(OffspringLaw::lattice_binary());
    const ExactLatticeR r(kH);
    std::vector<double> grid;
    for (int i = 1; i <= 10; ++i) {
        grid.push_back(0.37 * i);
    }
    const HarmonicReport rep = check_harmonic(step, r, grid, 20000, 6);
    CHECK(rep.max_z < 4.0);
}

TEST_CASE("many-to-one: exhaustive lineage sums equal tilted walk sums")
{
    const OffspringLaw law = OffspringLaw::lattice_binary();
    const StepLaw step = derive_step_law(law);
    const std::vector<std::function<double(const std::vector<double>&)>> gs = {
        [](const std::vector<double>&) { return 1.0; },
        [](const std::vector<double>& p) { return p.back() > 0.0 ? 1.0 : 0.0; },
        [](const std::vector<double>& p) {
            double m = p[0];
            for (double v : p) {
                m = std::min(m, v);
            }
            return std::exp(-0.5 * m * m);
        },
    };
    for (const auto& g : gs) {
        const PathFunctional pg = [&](std::span<const double> s) {
            return g(std::vector<double>(s.begin(), s.end()));
        };
        for (int n = 1; n <= 5; ++n) {
            const double lineage = oracle::lattice_lineage_sum(g, n);
            const double walk = oracle::lattice_walk_sum(g, n);
            CHECK(lineage == doctest::Approx(walk).epsilon(1e-12));
            CHECK(exact_lineage_expectation(law, pg, n) == doctest::Approx(lineage).epsilon(1e-12));
            CHECK(exact_walk_expectation(step, pg, n) == doctest::Approx(walk).epsilon(1e-12));
        }
        CHECK(exact_lineage_expectation(law, pg, 3, 0.7) ==
              doctest::Approx(oracle::lattice_lineage_sum(g, 3, 0.7)).epsilon(1e-12));
    }
}

TEST_CASE("many-to-one Monte Carlo on LatticeBinary")
{
    const OffspringLaw law = OffspringLaw::lattice_binary();
    const PathFunctional g = [](std::span<const double> p) { return p.back() > 0.0 ? 1.0 : 0.0; };
    const ManyToOneResult m = verify_many_to_one(law, g, 3, 20000, 12);
    const double exact = exact_walk_expectation(derive_step_law(law), g, 3);
    CHECK(m.lhs.z_score(exact) < 4.0);
    CHECK(m.rhs.z_score(exact) < 4.0);
}

TEST_CASE("enumeration size guard")
{
    const OffspringLaw law = OffspringLaw::lattice_binary();
    const PathFunctional g = [](std::span<const double>) { return 1.0; };
    CHECK_THROWS_AS(exact_lineage_expectation(law, g, 40), EnumerationTooLarge);
}
