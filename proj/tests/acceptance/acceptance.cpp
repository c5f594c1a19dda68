// Acceptance checks 1-10. Prints one PASS/FAIL line per check and exits
// nonzero if any selected check fails.
//
//   brw_acceptance --brwsim PATH [--only N]... [--work DIR]

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "brw/app.hpp"
#include "brw/conditioned.hpp"
#include "brw/criterion.hpp"
#include "brw/csv.hpp"
#include "brw/enumerate.hpp"
#include "brw/forest.hpp"
#include "brw/model.hpp"
#include "brw/rng.hpp"
#include "brw/spine.hpp"
#include "brw/stats.hpp"
#include "brw/walk.hpp"

namespace fs = std::filesystem;
using namespace brw;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

std::string g4(double v)
{
    std::ostringstream o;
    o.precision(4);
    o << v;
    return o.str();
}

OffspringLaw binary_gaussian() { return normalize_to_boundary(OffspringLaw::binary_gaussian()); }

RHandle gaussian_r(const OffspringLaw& law)
{
    RenewalConfig rc;
    rc.excursions = 200000;
    rc.budget = 1000000;
    return build_renewal(law, rc, 7, 1);
}

// 1. boundary normalization of BinaryGaussian and sigma^2 by Monte Carlo
void check_normalization(Outcome& o)
{
    const OffspringLaw law = binary_gaussian();
    const LaplaceValue l = law.laplace(1.0);
    o.require(std::abs(l.psi) <= 1e-9, "|Psi(1)| <= 1e-9");
    o.require(std::abs(l.psi_prime) <= 1e-9, "|Psi'(1)| <= 1e-9");
    Stream s = make_stream(1, "acceptance.sigma2", 0);
    Moments m;
    for (int i = 0; i < 1000000; ++i) {
        double v2 = 0.0;
        for (double v : sample_offspring(law, s)) {
            v2 += v * v * std::exp(-v);
        }
        m.add(v2);
    }
    const Estimate e = m.estimate();
    const double target = 2.0 * std::log(2.0);
    const double z = e.z_score(target);
    o.require(z <= 3.0, "sigma^2 within 3 SE");
    o.detail << "Psi(1)=" << g4(l.psi) << " Psi'(1)=" << g4(l.psi_prime) << " sigma2=" << g4(e.mean)
             << "+-" << g4(e.se) << " vs 2ln2 (z=" << g4(z) << ")";
}

// 2. many-to-one on LatticeBinary against exhaustive enumeration
void check_many_to_one(Outcome& o)
{
    const OffspringLaw law = OffspringLaw::lattice_binary();
    const StepLaw step = derive_step_law(law);
    const std::vector<std::pair<std::string, PathFunctional>> gs{
        {"last_positive", [](std::span<const double> p) { return p.back() > 0.0 ? 1.0 : 0.0; }},
        {"min_gauss",
         [](std::span<const double> p) {
             double m = 0.0;
             for (double v : p) {
                 m = std::min(m, v);
             }
             return std::exp(-0.5 * m * m);
         }},
        {"tanh_sum",
         [](std::span<const double> p) {
             double s = 0.0;
             for (double v : p) {
                 s += v;
             }
             return 1.0 + std::tanh(s);
         }},
    };
    double worst = 0.0;
    std::uint64_t seed = 20;
    for (const auto& [name, g] : gs) {
        for (int n = 1; n <= 3; ++n) {
            const double lineage = exact_lineage_expectation(law, g, n);
            const double walk = exact_walk_expectation(step, g, n);
            o.require(std::abs(lineage - walk) <= 1e-12 * std::max(1.0, std::abs(lineage)),
                      name + " exact sides agree");
            const ManyToOneResult r = verify_many_to_one(law, g, n, 100000, seed++);
            const double z_mc = combined_z(r.lhs, r.rhs);
            const double z_l = r.lhs.z_score(lineage);
            const double z_r = r.rhs.z_score(lineage);
            worst = std::max({worst, z_mc, z_l, z_r});
            o.require(z_mc <= 4.0 && z_l <= 4.0 && z_r <= 4.0,
                      name + " n=" + std::to_string(n));
        }
    }
    o.detail << "9 (g, n) pairs, max z=" << g4(worst);
}

// 3. Monte Carlo renewal table against the exact lattice R
void check_renewal(Outcome& o)
{
    const OffspringLaw law = OffspringLaw::lattice_binary();
    const double h = *law.lattice_span();
    RenewalOptions ro;
    ro.excursions = 1000000;
    ro.seed = 3;
    const RenewalTable t = estimate_renewal(derive_step_law(law), ro);
    const ExactLatticeR exact(h);
    o.require(t.r[0] == 1.0, "R(0) = 1");
    double worst = 0.0;
    std::size_t cells = 0;
    for (std::size_t i = 1; i < t.x.size(); ++i) {
        const double d = std::abs(t.r[i] - exact(t.x[i]));
        const double z = t.se_r[i] > 0.0 ? d / t.se_r[i] : (d == 0.0 ? 0.0 : INFINITY);
        worst = std::max(worst, z);
        ++cells;
    }
    o.require(worst <= 4.0, "every cell within 4 SE");
    o.detail << cells << " cells up to x=" << g4(t.x_max()) << ", max z=" << g4(worst)
             << ", excursions cut at the step budget: " << t.overruns;
}

// 4. harmonicity of R for both built-in laws
void check_harmonicity(Outcome& o)
{
    {
        const OffspringLaw law = OffspringLaw::lattice_binary();
        const double h = *law.lattice_span();
        const ExactLatticeR r(h);
        std::vector<double> grid;
        for (int i = 1; i <= 50; ++i) {
            grid.push_back(0.37 * h * i);
        }
        const HarmonicReport rep = check_harmonic(derive_step_law(law), r, grid, 100000, 41);
        o.require(rep.points.size() == 50 && rep.max_z <= 4.0, "LatticeBinary within 4 SE");
        o.detail << "LatticeBinary max z=" << g4(rep.max_z)
                 << " max rel dev=" << g4(rep.max_relative_deviation);
    }
    {
        const OffspringLaw law = binary_gaussian();
        const RHandle r = gaussian_r(law);
        std::vector<double> grid;
        for (int i = 1; i <= 50; ++i) {
            grid.push_back(0.25 * i);
        }
        const HarmonicReport rep = check_harmonic(derive_step_law(law), *r, grid, 100000, 42);
        o.require(rep.points.size() == 50 && rep.max_z <= 4.0, "BinaryGaussian within 4 SE");
        o.detail << "; BinaryGaussian max z=" << g4(rep.max_z)
                 << " max rel dev=" << g4(rep.max_relative_deviation);
    }
}

// 5. Tanaka's construction against the h-transform, exactly
void check_tanaka(Outcome& o)
{
    double worst = 0.0;
    for (int n = 1; n <= 8; ++n) {
        worst = std::max(worst, total_variation(exact_tanaka_law(n), exact_h_transform_law(n)));
    }
    o.require(worst <= 1e-10, "TV <= 1e-10");
    o.detail << "N=1..8, max TV=" << g4(worst);
}

// 6. martingale means on BinaryGaussian
void check_martingales(Outcome& o)
{
    const OffspringLaw law = binary_gaussian();
    const RHandle r = gaussian_r(law);
    constexpr int kDepth = 15;
    SuiteOptions so;
    so.generations = kDepth;
    so.replicas = 100000;
    so.forest.mode = BarrierMode::Audit;
    so.forest.beta = 0.0;
    so.seed = 3;
    const auto series = run_martingale_suite(law, so, r.get());
    std::uint64_t truncated = 0;
    for (const auto& s : series) {
        truncated += s.truncated ? 1 : 0;
    }
    o.require(truncated == 0, "no truncated replicas");
    const DepthMeans m = martingale_means(series, kDepth);
    double zw = 0.0, zd = 0.0, zb = 0.0;
    int nw = 0, nd = 0, nb = 0;
    for (int n = 0; n <= kDepth; ++n) {
        const double w = m.w1[n].z_score(1.0);
        const double d = m.d[n].z_score(0.0);
        const double b = m.d_beta[n].z_score(1.0);
        if (w > zw) { zw = w; nw = n; }
        if (d > zd) { zd = d; nd = n; }
        if (b > zb) { zb = b; nb = n; }
    }
    o.require(zw <= 4.0, "W_n(1) mean 1");
    o.require(zd <= 4.0, "D_n mean 0");
    o.require(zb <= 4.0, "D_n^(0) mean 1");
    o.detail << "max z: W " << g4(zw) << " (n=" << nw << "), D " << g4(zd) << " (n=" << nd
             << "), D^(0) " << g4(zb) << " (n=" << nb << ")";
}

// 7. density of Q_a with respect to P_a and the spine marginal
void check_density(Outcome& o)
{
    const OffspringLaw law = binary_gaussian();
    const RHandle r = gaussian_r(law);
    const std::vector<std::pair<std::string, TreeFunctional>> gs{
        {"min_above_-1",
         [](const MarkedTree& t) {
             for (double v : t.generations.back().positions) {
                 if (!(v > -1.0)) {
                     return 0.0;
                 }
             }
             return 1.0;
         }},
        {"tanh_first_generation",
         [](const MarkedTree& t) {
             double s = 0.0;
             for (double v : t.generations[1].positions) {
                 s += v;
             }
             return std::tanh(s);
         }},
        {"fraction_above_barrier",
         [](const MarkedTree& t) {
             const Generation& g = t.generations.back();
             double kept = 0.0;
             for (auto f : g.above_barrier) {
                 kept += f;
             }
             return g.population() == 0 ? 0.0 : kept / static_cast<double>(g.population());
         }},
    };
    double worst = 0.0;
    std::uint64_t seed = 70;
    for (int n = 1; n <= 4; ++n) {
        for (const auto& [name, g] : gs) {
            const DensityCheck d = verify_density(law, *r, n, 0.5, g, 100000, seed++);
            const double z = combined_z(d.q_side, d.p_side);
            worst = std::max(worst, z);
            o.require(z <= 4.0, name + " n=" + std::to_string(n));
        }
    }
    o.detail << "12 (G, n) pairs, max z=" << g4(worst) << "; KS p at N=10:";
    for (std::uint64_t seed2 = 1; seed2 <= 3; ++seed2) {
        const MarginalCheck m = spine_marginal_vs_conditioned(law, *r, 10, 10000, seed2);
        o.require(m.p_value > 0.01, "KS seed " + std::to_string(seed2));
        o.detail << " " << g4(m.p_value);
    }
}

// 8. integral test along conditioned walks
void check_integral_test(Outcome& o)
{
    const OffspringLaw law = OffspringLaw::lattice_binary();
    const StepLaw step = derive_step_law(law);
    const auto grid = MonotoneTable::geometric_grid(1e-3, 1e9, 1.001);
    const auto f3 = MonotoneTable::from_function([](double y) { return std::pow(1.0 + y, -3.0); }, grid);
    const auto f15 = MonotoneTable::from_function([](double y) { return std::pow(1.0 + y, -1.5); }, grid);
    o.detail << "growth (1+y)^-3 / (1+y)^-1.5:";
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const ConditionedBatch b = sample_conditioned_paths(step, 100000, 1024, seed);
        const SeriesDiagnostic d3 = series_diagnostic(f3, b.paths);
        const SeriesDiagnostic d15 = series_diagnostic(f15, b.paths);
        o.require(d3.series_class == SeriesClass::Plateau, "convergent F, seed " + std::to_string(seed));
        o.require(d15.series_class == SeriesClass::Divergent, "divergent F, seed " + std::to_string(seed));
        o.detail << " " << g4(d3.growth) << "/" << g4(d15.growth);
    }
}

// 9. dichotomy: criterion series for four laws on three seeds
void check_dichotomy(Outcome& o)
{
    struct Case {
        std::string name;
        OffspringLaw law;
        std::string expected;
    };
    const std::vector<Case> cases{
        {"BinaryGaussian", binary_gaussian(), "satisfying"},
        {"LatticeBinary", OffspringLaw::lattice_binary(), "satisfying"},
        {"HeavyCount(2)", normalize_to_boundary(OffspringLaw::heavy_count(2.0)), "violating"},
        {"HeavyCount(4)", normalize_to_boundary(OffspringLaw::heavy_count(4.0)), "satisfying"},
    };
    for (const auto& c : cases) {
        RenewalConfig rc;
        rc.excursions = 200000;
        rc.budget = 1000000;
        const RHandle r = build_renewal(c.law, rc, 7, 1);
        o.detail << (&c == &cases.front() ? "" : "; ") << c.name << ":";
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            CriterionOptions co;
            co.horizon = 10000;
            co.paths = 32;
            co.draws = 64;
            co.seed = seed;
            const CriterionReport rep = run_criterion_series(c.law, *r, co);
            const std::string verdict = criterion_verdict(rep);
            const SeriesTrack& trunc = rep.find("truncated");
            if (c.expected == "violating") {
                bool all_tails = true;
                for (double y : co.y_values) {
                    all_tails = all_tails &&
                        rep.find(tail_series_name(y)).series_class == SeriesClass::Divergent;
                }
                o.require(all_tails, c.name + " tail series grow, seed " + std::to_string(seed));
                double lo = INFINITY;
                for (double y : co.y_values) {
                    lo = std::min(lo, rep.find(tail_series_name(y)).growth);
                }
                o.detail << " " << verdict << "(min tail growth " << g4(lo) << ")";
            } else {
                if (c.name != "HeavyCount(4)") {
                    o.require(trunc.series_class == SeriesClass::Plateau,
                              c.name + " truncated series plateaus, seed " + std::to_string(seed));
                }
                o.detail << " " << verdict << "(truncated growth " << g4(trunc.growth) << ")";
            }
            o.require(verdict == c.expected, c.name + " verdict, seed " + std::to_string(seed));
        }
    }
}

// 10. byte-identical CSVs across reruns and worker counts
std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void check_determinism(Outcome& o, const std::string& brwsim, const fs::path& work)
{
    if (brwsim.empty()) {
        o.require(false, "--brwsim not given");
        return;
    }
    fs::remove_all(work);
    fs::create_directories(work);
    const fs::path bg = work / "bg.json";
    const fs::path lat = work / "lattice.json";
    std::ofstream(bg) << R"({"family": "BinaryGaussian", "params": {}, "normalize": true})";
    std::ofstream(lat) << R"({"family": "LatticeBinary", "params": {}, "normalize": true})";
    const fs::path cfg = work / "config.json";
    std::ofstream(cfg) << R"({"renewal": {"excursions": 20000, "budget": 1000000},
 "dichotomy": {"moment_draws": 20000, "caps": [10, 100, 1000]}})";

    const std::string bgs = bg.string(), lats = lat.string();
    const std::vector<std::pair<std::string, std::string>> suites{
        {"simulate", "simulate --law " + bgs + " --generations 6 --replicas 300 --barrier 0"},
        {"renewal", "renewal --law " + bgs},
        {"conditioned", "conditioned --law " + lats + " --horizon 3000 --paths 16"},
        {"spine", "spine --law " + bgs + " --horizon 6 --replicas 400 --start 0.5"},
        {"criterion", "criterion --law " + bgs + " --horizon 300 --paths 8 --draws 8"},
        {"dichotomy", "dichotomy --law-a " + lats + " --law-b " + bgs +
                          " --horizon 200 --paths 4 --draws 8 --generations 4 --replicas 40"},
    };
    const std::vector<std::pair<std::string, unsigned>> runs{{"a", 1}, {"b", 1}, {"c", 8}};
    std::size_t files = 0;
    for (const auto& [suite, args] : suites) {
        for (const auto& [tag, workers] : runs) {
            const fs::path out = work / suite / tag;
            const std::string cmd = "\"" + brwsim + "\" --seed 11 --workers " +
                                    std::to_string(workers) + " --config \"" + cfg.string() +
                                    "\" --out \"" + out.string() + "\" " + args + " > \"" +
                                    (work / (suite + "_" + tag + ".log")).string() + "\" 2>&1";
            o.require(std::system(cmd.c_str()) == 0, suite + " run " + tag + " exited nonzero");
        }
        std::vector<fs::path> csvs;
        for (const auto& e : fs::directory_iterator(work / suite / "a")) {
            if (e.path().extension() == ".csv") {
                csvs.push_back(e.path().filename());
            }
        }
        o.require(!csvs.empty(), suite + " wrote CSVs");
        for (const auto& name : csvs) {
            const std::string a = slurp(work / suite / "a" / name);
            o.require(a == slurp(work / suite / "b" / name), suite + "/" + name.string() + " rerun");
            o.require(a == slurp(work / suite / "c" / name),
                      suite + "/" + name.string() + " 1 vs 8 workers");
            ++files;
        }
    }
    o.detail << suites.size() << " suites, " << files << " CSVs compared over 3 runs each";
}

struct Criterion {
    int id;
    std::string title;
    double limit_seconds;
    std::function<void(Outcome&)> run;
};

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"acceptance checks"};
    std::string brwsim;
    std::vector<int> only;
    std::string work = (fs::temp_directory_path() / "brw_acceptance").string();
    app.add_option("--brwsim", brwsim, "path of the brwsim executable");
    app.add_option("--only", only, "run only these criteria");
    app.add_option("--work", work, "scratch directory for criterion 10");
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> all{
        {1, "boundary normalization", 60, check_normalization},
        {2, "many-to-one", 300, check_many_to_one},
        {3, "renewal exactness", 300, check_renewal},
        {4, "harmonicity", 300, check_harmonicity},
        {5, "Tanaka vs h-transform", 120, check_tanaka},
        {6, "martingale suite", 900, check_martingales},
        {7, "density identity", 600, check_density},
        {8, "integral test", 300, check_integral_test},
        {9, "dichotomy", 1800, check_dichotomy},
        {10, "determinism", 600, [&](Outcome& o) { check_determinism(o, brwsim, work); }},
    };
    const std::set<int> selected(only.begin(), only.end());
    int failures = 0;
    for (const auto& c : all) {
        if (!selected.empty() && !selected.count(c.id)) {
            continue;
        }
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.run(o);
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        o.require(dt < c.limit_seconds, "runtime under " + g4(c.limit_seconds) + " s");
        std::cout << "criterion " << c.id << " (" << c.title << "): " << (o.pass ? "PASS" : "FAIL")
                  << " | " << o.detail.str() << " | " << g4(dt) << " s" << std::endl;
        failures += o.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
