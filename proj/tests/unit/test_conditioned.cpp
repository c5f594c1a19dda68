#include "doctest.h"

#include <cmath>
#include <map>

#include "brw/conditioned.hpp"
#include "brw/enumerate.hpp"
#include "brw/errors.hpp"
#include "oracles.hpp"

using namespace brw;
using oracle::kH;

namespace {

const StepLaw& lattice_step()
{
    static const StepLaw s = derive_step_law(OffspringLaw::lattice_binary());
    return s;
}

} // namespace

TEST_CASE("excursions stay at or below 0 until they enter (0, inf)")
{
    const StepLaw step = derive_step_law(normalize_to_boundary(OffspringLaw::binary_gaussian()));
    Stream s(make_stream(2, "excursion-test", 0));
    for (int i = 0; i < 200; ++i) {
        const Excursion e = sample_excursion(step, 1000000, s);
        CHECK(e.path.front() == 0.0);
        CHECK(e.path.back() > 0.0);
        for (std::size_t j = 1; j < e.tau(); ++j) {
            CHECK(e.path[j] <= 0.0);
        }
        const auto nu = reverse_excursion(e);
        REQUIRE(nu.size() == e.path.size());
        CHECK(nu.front() == 0.0);
        CHECK(nu.back() == doctest::Approx(e.path.back()));
        for (std::size_t j = 0; j <= e.tau(); ++j) {
            CHECK(nu[j] == doctest::Approx(e.path.back() - e.path[e.tau() - j]));
        }
    }
}

TEST_CASE("excursion budget")
{
    Stream s(make_stream(2, "overrun-test", 0));
    bool overran = false;
    for (int i = 0; i < 200 && !overran; ++i) {
        try {
            sample_excursion(lattice_step(), 3, s);
        } catch (const ExcursionOverrun&) {
            overran = true;
        }
    }
    CHECK(overran);
}

TEST_CASE("conditioned paths are positive and built from ladder blocks")
{
    Stream s(make_stream(3, "conditioned-test", 0));
    const ConditionedPath p = sample_conditioned(lattice_step(), 2000, s);
    REQUIRE(p.values.size() == 2001);
    CHECK(p.values[0] == 0.0);
    for (std::size_t n = 1; n < p.values.size(); ++n) {
        CHECK(p.values[n] > 0.0);
        const double k = p.values[n] / kH;
        CHECK(k == doctest::Approx(std::round(k)).epsilon(1e-12));
    }
    for (std::size_t k = 0; k < p.block_ends.size(); ++k) {
        CHECK(p.values[p.block_ends[k]] == doctest::Approx(p.heights[k]));
        if (k > 0) {
            CHECK(p.block_ends[k] > p.block_ends[k - 1]);
            CHECK(p.heights[k] > p.heights[k - 1]);
        }
    }
}

TEST_CASE("exact h-transform law matches a direct path enumeration")
{
    // P(path) = 2^-N R(S_N) / R(0) for paths of the +-1 walk staying >= 1.
    for (int n = 1; n <= 8; ++n) {
        const LatticePathLaw lib = exact_h_transform_law(n);
        std::map<std::vector<std::int64_t>, double> direct;
        for (unsigned mask = 0; mask < (1u << n); ++mask) {
            std::vector<std::int64_t> path;
            std::int64_t s = 0;
            bool ok = true;
            for (int k = 0; k < n; ++k) {
                s += (mask >> k) & 1u ? 1 : -1;
                ok = ok && s > 0;
                path.push_back(s);
            }
            if (ok) {
                direct[path] = std::ldexp(1.0, -n) * 2.0 * static_cast<double>(s);
            }
        }
        double total = 0.0;
        for (const auto& [path, p] : direct) {
            total += p;
            REQUIRE(lib.count(path) == 1);
            CHECK(lib.at(path) == doctest::Approx(p).epsilon(1e-14));
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(lib.size() == direct.size());
        CHECK(total_variation(exact_tanaka_law(n), lib) <= 1e-10);
    }
}

TEST_CASE("Tanaka paths reproduce the h-transform by Monte Carlo")
{
    const ExactLatticeR r(kH);
    const PathFunctional g = [](std::span<const double> p) { return p.back() < 3.0 * kH ? 1.0 : 0.0; };
    const HTransformCheck c = verify_h_transform_mc(lattice_step(), r, 6, g, 20000, 8);
    CHECK(combined_z(c.tanaka, c.weighted) < 4.0);
    const double exact = expectation(exact_h_transform_law(6), kH, g);
    CHECK(c.tanaka.z_score(exact) < 4.0);
}

TEST_CASE("expected visits of the conditioned walk equal int f R dU")
{
    // U charges kh, k >= 0, with mass 1, so for f = 1{x <= 2h} the identity
    // gives R(0) + R(h) + R(2h) = 1 + 2 + 4 = 7. Truncated at horizon N the
    // expectation is computed exactly by propagating the chain
    // P(k -> k +- 1) = R((k +- 1) h) / (2 R(k h)).
    const std::uint64_t horizon = 400;
    std::vector<double> dist(horizon + 2, 0.0), next(horizon + 2);
    dist[0] = 1.0;
    double visits = 1.0;
    const auto rk = [](std::size_t k) { return k == 0 ? 1.0 : 2.0 * static_cast<double>(k); };
    for (std::uint64_t n = 1; n <= horizon; ++n) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t k = 0; k + 1 < dist.size(); ++k) {
            if (dist[k] == 0.0) {
                continue;
            }
            next[k + 1] += dist[k] * rk(k + 1) / (2.0 * rk(k));
            if (k >= 2) {
                next[k - 1] += dist[k] * rk(k - 1) / (2.0 * rk(k));
            }
        }
        dist.swap(next);
        visits += dist[0] + dist[1] + dist[2];
    }
    const ConditionedBatch b = sample_conditioned_paths(lattice_step(), horizon, 4000, 17);
    Moments m;
    for (const auto& p : b.paths) {
        double c = 0.0;
        for (double v : p.values) {
            c += v <= 2.0 * kH + 1e-9 ? 1.0 : 0.0;
        }
        m.add(c);
    }
    CHECK(m.estimate().z_score(visits) < 4.0);
    CHECK(visits < 7.0);
    CHECK(visits > 6.0);

    RenewalTable t;
    t.cell_width = kH;
    t.lattice_span = kH;
    for (int i = 0; i <= 10; ++i) {
        t.x.push_back(i * kH);
        t.u.push_back(i == 0 ? 1.0 : static_cast<double>(i)); // U({0}) = 1, U([0, ih)) = i
        t.u_minus.push_back(t.u.back());
        t.r.push_back(i == 0 ? 1.0 : 2.0 * i);
    }
    const double rhs = expected_sum_rhs([](double x) { return x <= 2.0 * kH + 1e-9 ? 1.0 : 0.0; }, t);
    CHECK(rhs == doctest::Approx(7.0));
}

TEST_CASE("monotone tables")
{
    CHECK_THROWS_AS(MonotoneTable({0.0, 1.0, 2.0}, {1.0, 0.5, 0.7}), NotMonotone);
    const MonotoneTable f({0.0, 1.0, 2.0}, {1.0, 0.5, 0.25});
    CHECK(f(0.0) == 1.0);
    CHECK(f(0.99) == 1.0);
    CHECK(f(1.0) == 0.5);
    CHECK(f(50.0) == 0.25);
    // int_0^1 y dy = 1/2, int_1^2 y/2 dy = 3/4
    const auto m = f.moment_integral();
    CHECK(m[0] == 0.0);
    CHECK(m[1] == doctest::Approx(0.5));
    CHECK(m[2] == doctest::Approx(1.25));
    const auto grid = MonotoneTable::geometric_grid(1e-2, 10.0, 10.0);
    CHECK(grid == std::vector<double>{0.0, 1e-2, 1e-1, 1.0, 10.0});
    const MonotoneTable parsed = parse_f_table("y,F_of_y\n0,2\n1,1\n3,0\n");
    CHECK(parsed(2.0) == 1.0);
    CHECK(parsed(3.5) == 0.0);
}

TEST_CASE("series diagnostic on constant and zero F")
{
    const ConditionedBatch b = sample_conditioned_paths(lattice_step(), 100, 3, 5);
    const MonotoneTable zero({0.0, 1.0}, {0.0, 0.0});
    const SeriesDiagnostic z = series_diagnostic(zero, b.paths);
    for (double v : z.partial_sums) {
        CHECK(v == 0.0);
    }
    CHECK(z.series_class == SeriesClass::Plateau);
    CHECK(!z.integral_divergent);

    const std::vector<double> grid = MonotoneTable::geometric_grid(1e-3, 1e6, 1.5);
    const MonotoneTable one(grid, std::vector<double>(grid.size(), 1.0));
    const SeriesDiagnostic o = series_diagnostic(one, b.paths);
    CHECK(o.partial_sums.back() == 101.0);
    CHECK(o.growth == doctest::Approx(50.0 / 51.0));
    CHECK(o.series_class == SeriesClass::Divergent);
    CHECK(o.integral_divergent);
}

TEST_CASE("growth classification thresholds")
{
    const SeriesThresholds t{0.01, 0.20};
    CHECK(classify_growth(0.005, t) == SeriesClass::Plateau);
    CHECK(classify_growth(0.1, t) == SeriesClass::Indeterminate);
    CHECK(classify_growth(0.3, t) == SeriesClass::Divergent);
    CHECK(to_string(SeriesClass::Divergent) == "divergent");
}

TEST_CASE("conditioned batches do not depend on the worker count")
{
    const ConditionedBatch a = sample_conditioned_paths(lattice_step(), 300, 12, 9, 1);
    const ConditionedBatch b = sample_conditioned_paths(lattice_step(), 300, 12, 9, 3);
    for (std::size_t i = 0; i < a.paths.size(); ++i) {
        CHECK(a.paths[i].values == b.paths[i].values);
    }
}
