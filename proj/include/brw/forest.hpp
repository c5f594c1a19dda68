#pragma once

// Generation-by-generation simulation of the branching random walk.
//
// Every particle carries a 64-bit label; its offspring are drawn from the
// stream (replica key, label), and child i of a particle labelled p gets
// label child_label(p, i). A particle's offspring therefore do not depend on
// which other particles exist, so a barrier run and a barrier-free run with
// the same replica key are coupled pathwise.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "brw/model.hpp"
#include "brw/walk.hpp"

namespace brw {

enum class BarrierMode {
    None,  ///< no barrier
    Kill,  ///< children at or below -beta are discarded at birth
    Audit, ///< nothing is killed; a flag records min_k V(u_k) > -beta
};

struct ForestOptions {
    BarrierMode mode = BarrierMode::None;
    double beta = 0.0;
    std::uint64_t cap = 5000000;
    double start = 0.0; ///< V(root) = a
};

struct Generation {
    int depth = 0;
    std::vector<double> positions;
    std::vector<std::uint64_t> labels;
    std::vector<std::uint8_t> above_barrier; ///< filled in Audit mode only

    std::size_t population() const noexcept { return positions.size(); }
};

/// The root generation; barrier modes need start >= -beta (the root itself
/// is not tested against the barrier).
Generation root_generation(const ForestOptions& options);

/// Advances one generation. Throws PopulationCapExceeded (carrying the depth
/// of `gen`) if the next generation would exceed options.cap.
Generation step_generation(const Generation& gen, const OffspringLaw& law,
                           const ForestOptions& options, std::uint64_t replica_key);

/// W_n(t) = sum e^{-t V(u) - n psi_t}.
double eval_W(const Generation& gen, double t, double psi_t);
/// D_n = sum V(u) e^{-V(u)}.
double eval_D(const Generation& gen);
/// D_n^(beta) = sum R(V(u) + beta) e^{-V(u)} over particles that stayed above
/// -beta. Requires a Kill or Audit generation built with the same beta.
double eval_D_trunc(const Generation& gen, const RenewalFunction& r, double beta,
                    BarrierMode mode);

struct MartingaleRecord {
    int n = 0;
    std::uint64_t population = 0;
    double w1 = 0.0;
    double d = 0.0;
    double d_beta = 0.0; ///< NaN when no barrier is tracked
};

struct MartingaleSeries {
    std::uint64_t replica = 0;
    std::uint64_t key = 0;
    std::vector<MartingaleRecord> records;
    bool truncated = false; ///< population cap or child limit hit; records stop at the last full depth
    std::string error;
};

/// One replica of W_n(1), D_n and D_n^(beta) for n = 0..generations.
/// With mode Kill the W and D columns refer to the killed population.
MartingaleSeries simulate_martingales(const OffspringLaw& law, int generations,
                                      const ForestOptions& options, const RenewalFunction* r,
                                      std::uint64_t replica_key);

struct SuiteOptions {
    int generations = 10;
    std::uint64_t replicas = 1000;
    ForestOptions forest;
    std::uint64_t seed = 0;
    unsigned workers = 1;
};

/// Replicas 0..R-1 with keys substream_key(seed, "forest", r), in replica order.
std::vector<MartingaleSeries> run_martingale_suite(const OffspringLaw& law,
                                                   const SuiteOptions& options,
                                                   const RenewalFunction* r);

std::string martingales_csv(const std::vector<MartingaleSeries>& series, std::uint64_t seed);

/// Per-depth mean of a column with its standard error over replicas that
/// reached the depth.
struct DepthMeans {
    std::vector<Estimate> w1, d, d_beta;
};
DepthMeans martingale_means(const std::vector<MartingaleSeries>& series, int generations);

struct CascadeResult {
    std::vector<double> direct;      ///< A: D_m from fresh roots
    std::vector<double> recombined;  ///< B: sum_{|u|=1} e^{-V(u)} D_m^(u)
    std::vector<double> next_depth;  ///< C: D_{m+1} from fresh roots
    double ks_direct_recombined = 0.0;
    double ks_baseline = 0.0;        ///< KS(A, C)
    double ks_recombined_next = 0.0; ///< KS(B, C)
    double p_recombined_next = 1.0;  ///< permutation p-value of KS(B, C)
};

CascadeResult cascade_check(const OffspringLaw& law, int m, std::uint64_t replicas,
                            std::uint64_t seed, unsigned workers = 1,
                            std::uint64_t permutations = 199, std::uint64_t cap = 5000000);

} // namespace brw
