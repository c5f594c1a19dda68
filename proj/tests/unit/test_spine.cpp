#include "doctest.h"

#include <cmath>

#include "brw/enumerate.hpp"
#include "brw/spine.hpp"
#include "oracles.hpp"

using namespace brw;
using oracle::kH;

TEST_CASE("enumerated spine law equals the h-transform law on the lattice")
{
    const OffspringLaw law = OffspringLaw::lattice_binary();
    for (int n = 1; n <= 6; ++n) {
        CHECK(verify_spine_law_exact(law, n).total_variation <= 1e-10);
    }
}

TEST_CASE("the lattice spine leaves 0 upwards and stays positive")
{
    // From 0 only the child at +h has positive weight R(h) e^{-h}.
    const OffspringLaw law = OffspringLaw::lattice_binary();
    const ExactLatticeR r(kH);
    Stream s(make_stream(4, "spine-test", 0));
    for (int i = 0; i < 200; ++i) {
        const SpineStep st = sample_spine_step(0.0, law, r, s);
        REQUIRE(st.chosen < st.children.size());
        CHECK(st.children[st.chosen] == doctest::Approx(kH));
        CHECK(st.children.size() == 2);
        CHECK(st.sibling_count == 1.0);
    }
    const SpineRealization sp = sample_spine(law, r, 50, 0.0, s);
    REQUIRE(sp.positions.size() == 51);
    for (std::size_t n = 1; n < sp.positions.size(); ++n) {
        CHECK(sp.positions[n] > 0.0);
        const double k = sp.positions[n] / kH;
        CHECK(k == doctest::Approx(std::round(k)).epsilon(1e-12));
    }
}

TEST_CASE("Gaussian spine steps: positivity and size-biased sibling counts")
{
    const OffspringLaw law = normalize_to_boundary(OffspringLaw::binary_gaussian());
    const ExactLatticeR fake(1.0); // any positive increasing R works for the mechanics
    Stream s(make_stream(6, "spine-gauss-test", 0));
    for (int i = 0; i < 200; ++i) {
        const SpineStep st = sample_spine_step(0.3, law, fake, s);
        CHECK(st.children.size() == 2);
        CHECK(0.3 + st.children[st.chosen] > 0.0);
    }
}

TEST_CASE("spine law Monte Carlo on the lattice matches the exact value")
{
    const OffspringLaw law = OffspringLaw::lattice_binary();
    const ExactLatticeR r(kH);
    const PathFunctional g = [](std::span<const double> p) { return p.back() <= 2.0 * kH + 1e-9 ? 1.0 : 0.0; };
    const SpineLawCheck c = verify_spine_law_mc(law, r, 5, g, 20000, 3);
    CHECK(combined_z(c.spine, c.weighted) < 4.0);
    const double exact = expectation(exact_h_transform_law(5), kH, g);
    CHECK(c.spine.z_score(exact) < 4.0);
}

TEST_CASE("density identity on the lattice")
{
    const OffspringLaw law = OffspringLaw::lattice_binary();
    const ExactLatticeR r(kH);
    const TreeFunctional g = [](const MarkedTree& t) {
        return std::exp(-0.1 * static_cast<double>(t.generations.back().population()));
    };
    for (int n = 1; n <= 3; ++n) {
        const DensityCheck d = verify_density(law, r, n, kH, g, 20000, 5);
        CHECK(combined_z(d.q_side, d.p_side) < 4.0);
    }
}

TEST_CASE("Q-trees carry a spine whose line stays positive")
{
    const OffspringLaw law = OffspringLaw::lattice_binary();
    const ExactLatticeR r(kH);
    const MarkedTree t = sample_q_tree(law, r, 4, 0.0, 123);
    REQUIRE(t.generations.size() == 5);
    for (std::size_t n = 1; n < t.generations.size(); ++n) {
        std::size_t flagged = 0;
        for (auto f : t.generations[n].above_barrier) {
            flagged += f;
        }
        CHECK(flagged >= 1);
    }
}

TEST_CASE("spine samples do not depend on the worker count")
{
    const OffspringLaw law = OffspringLaw::lattice_binary();
    const ExactLatticeR r(kH);
    const auto a = spine_csv(sample_spines(law, r, 8, 16, 0.0, 3, 1));
    const auto b = spine_csv(sample_spines(law, r, 8, 16, 0.0, 3, 4));
    CHECK(a == b);
}
