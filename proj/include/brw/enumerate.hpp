#pragma once

// Exhaustive enumeration for finite-support laws. These give exact values
// that the Monte Carlo routines are checked against.

#include <cstdint>
#include <map>
#include <vector>

#include "brw/model.hpp"
#include "brw/walk.hpp"

namespace brw {

/// Hard limit on the number of paths or outcomes a single enumeration visits.
inline constexpr std::uint64_t kMaxEnumeration = 10000000;

/// E_a[e^{S_n - a} g(S_1, ..., S_n)] summed over every step sequence of a
/// finite step law.
double exact_walk_expectation(const StepLaw& step, const PathFunctional& g, int n,
                              double start = 0.0);

/// E_a[sum_{|u|=n} g(V(u_1), ..., V(u_n))] by enumerating every line of
/// descent of a finite-support law (atom and child index at each generation).
double exact_lineage_expectation(const OffspringLaw& law, const PathFunctional& g, int n,
                                 double start = 0.0);

/// A path law on the lattice: key = (zeta_1, ..., zeta_N) in units of the
/// span, value = probability.
using LatticePathLaw = std::map<std::vector<std::int64_t>, double>;

/// Law of (zeta_1..zeta_N) under the h-transform
/// P(path) = prod p(steps) R(S_N) / R(0) 1{S_k > 0, k = 1..N}
/// for the simple +-h walk, with the exact lattice R.
LatticePathLaw exact_h_transform_law(int horizon);

/// Law of the same path under Tanaka's construction, summed over every
/// decomposition into reversed excursions.
LatticePathLaw exact_tanaka_law(int horizon);

/// Law of (V(w_1)..V(w_N)) for the spine of a finite-support lattice law
/// started at 0, from the size-biased offspring law and spine selection.
LatticePathLaw exact_spine_law(const OffspringLaw& law, const RenewalFunction& r, int horizon);

/// h-transform law of a general finite lattice step law with renewal function r.
LatticePathLaw exact_h_transform_law(const StepLaw& step, const RenewalFunction& r, int horizon);

/// Total-variation distance between two path laws.
double total_variation(const LatticePathLaw& p, const LatticePathLaw& q);

/// Sum of g over a path law (g receives zeta_0 = 0, zeta_1, ..., in real units).
double expectation(const LatticePathLaw& law, double span, const PathFunctional& g);

} // namespace brw
