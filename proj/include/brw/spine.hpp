#pragma once

// The branching random walk under the changed measure Q_a: a distinguished
// line of descent (the spine) with size-biased offspring, selected among its
// siblings with probability proportional to R(V(u)) e^{-V(u)} over children
// that stay above 0.

#include <cstdint>
#include <functional>
#include <vector>

#include "brw/conditioned.hpp"
#include "brw/forest.hpp"
#include "brw/model.hpp"
#include "brw/walk.hpp"

namespace brw {

struct SpineStep {
    std::vector<double> children;  ///< displacements of every child, spine included
    std::size_t chosen = 0;        ///< index of the spine child in `children`
    double sibling_count = 0.0;    ///< number of non-spine children
    bool siblings_stored = true;   ///< false when the count was too large to materialize
    std::uint64_t rejections = 0;  ///< proposals rejected before acceptance
};

/// One step of the spine from position v >= 0. Finite-support laws use
/// rejection from P with envelope max_atoms sum_u R(v + D_u) e^{-D_u} 1{v + D_u > 0};
/// the Gaussian families draw the spine displacement first from the density
/// proportional to R(v + x) 1{v + x > 0} times the step density, then its siblings.
SpineStep sample_spine_step(double v, const OffspringLaw& law, const RenewalFunction& r,
                            Stream& s);

struct SpineRealization {
    std::vector<double> positions;     ///< V(w_0) = a, ..., V(w_N)
    std::vector<double> sibling_counts;///< per step
    std::vector<std::vector<double>> siblings; ///< per step, empty when not stored
    std::uint64_t rejections = 0;
};

SpineRealization sample_spine(const OffspringLaw& law, const RenewalFunction& r, int horizon,
                              double start, Stream& s);

/// Spines 0..P-1 on substreams (seed, "spine", p).
std::vector<SpineRealization> sample_spines(const OffspringLaw& law, const RenewalFunction& r,
                                            int horizon, std::uint64_t replicas, double start,
                                            std::uint64_t seed, unsigned workers = 1);

std::string spine_csv(const std::vector<SpineRealization>& spines);

struct SpineLawCheck {
    double total_variation = 0.0; ///< exact mode
    Estimate spine;               ///< Monte Carlo mode: E_Q[g(V(w_0..N))]
    Estimate weighted;            ///< E[g(S) R(S_N); min S > 0] / R(a)
};

/// Exact comparison of the enumerated spine law with the h-transform law
/// (lattice laws only).
SpineLawCheck verify_spine_law_exact(const OffspringLaw& law, int horizon);

/// Monte Carlo comparison for any law; g receives V(w_0) .. V(w_N).
SpineLawCheck verify_spine_law_mc(const OffspringLaw& law, const RenewalFunction& r, int horizon,
                                  const PathFunctional& g, std::uint64_t replicas,
                                  std::uint64_t seed, unsigned workers = 1);

/// Generations 0..n of a tree: positions and whether each particle's line
/// stayed above 0.
struct MarkedTree {
    std::vector<Generation> generations;
};

using TreeFunctional = std::function<double(const MarkedTree&)>;

/// Tree of n generations under Q_a: the spine with size-biased offspring,
/// every other particle reproducing under P.
MarkedTree sample_q_tree(const OffspringLaw& law, const RenewalFunction& r, int n, double start,
                         std::uint64_t key, std::uint64_t cap = 5000000);

/// Tree of n generations under P_a with barrier flags at 0.
MarkedTree sample_p_tree(const OffspringLaw& law, int n, double start, std::uint64_t key,
                         std::uint64_t cap = 5000000);

struct DensityCheck {
    Estimate q_side; ///< E_Q[G]
    Estimate p_side; ///< E_P[G D_n^(0)] / (R(a) e^{-a})
};

DensityCheck verify_density(const OffspringLaw& law, const RenewalFunction& r, int n,
                            double start, const TreeFunctional& g, std::uint64_t replicas,
                            std::uint64_t seed, unsigned workers = 1);

struct MarginalCheck {
    std::vector<double> conditioned; ///< zeta_N samples
    std::vector<double> spine;       ///< V(w_N) samples
    double ks = 0.0;
    double p_value = 1.0;
};

MarginalCheck spine_marginal_vs_conditioned(const OffspringLaw& law, const RenewalFunction& r,
                                            int horizon, std::uint64_t replicas,
                                            std::uint64_t seed, unsigned workers = 1,
                                            std::uint64_t permutations = 199);

} // namespace brw
