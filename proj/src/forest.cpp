#include "brw/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "brw/csv.hpp"
#include "brw/errors.hpp"
#include "brw/parallel.hpp"
#include "brw/rng.hpp"
#include "brw/stats.hpp"

namespace brw {

namespace {

constexpr std::uint64_t kRootLabel = 0x5eedULL;

// W_n(1), D_n and D_n^(beta) in one pass, sharing e^{-V(u)}.
void evaluate_record(const Generation& gen, double psi1, const RenewalFunction* r,
                     const ForestOptions& options, MartingaleRecord& rec)
{
    const bool audit = options.mode == BarrierMode::Audit;
    const double w_scale = std::exp(-static_cast<double>(gen.depth) * psi1);
    CompensatedSum w, d, db;
    for (std::size_t i = 0; i < gen.population(); ++i) {
        const double v = gen.positions[i];
        const double e = std::exp(-v);
        w += e * w_scale;
        d += v * e;
        if (r && (!audit || gen.above_barrier[i])) {
            if (v + options.beta > r->coverage()) {
                throw RIncompatible(v + options.beta, r->coverage());
            }
            db += (*r)(v + options.beta) * e;
        }
    }
    rec.w1 = w.value();
    rec.d = d.value();
    rec.d_beta = r ? db.value() : std::numeric_limits<double>::quiet_NaN();
}

} // namespace

Generation root_generation(const ForestOptions& options)
{
    if (options.mode != BarrierMode::None && options.start < -options.beta) {
        throw PreconditionError("barrier runs need a start position at or above -beta");
    }
    if (options.beta < 0.0) {
        throw PreconditionError("beta must be >= 0");
    }
    Generation g;
    g.positions.push_back(options.start);
    g.labels.push_back(kRootLabel);
    if (options.mode == BarrierMode::Audit) {
        g.above_barrier.push_back(1);
    }
    return g;
}

Generation step_generation(const Generation& gen, const OffspringLaw& law,
                           const ForestOptions& options, std::uint64_t replica_key)
{
    Generation next;
    next.depth = gen.depth + 1;
    const auto span = law.lattice_span();
    const bool audit = options.mode == BarrierMode::Audit;
    const bool kill = options.mode == BarrierMode::Kill;
    const double floor_level = -options.beta;
    std::vector<double> kids;
    const std::size_t guess = std::min<std::size_t>(
        options.cap, static_cast<std::size_t>(law.mean_count() * gen.population()) + 16);
    next.positions.reserve(guess);
    next.labels.reserve(guess);
    if (audit) {
        next.above_barrier.reserve(guess);
    }
    for (std::size_t p = 0; p < gen.population(); ++p) {
        Stream s(replica_key, gen.labels[p]);
        law.sample(s, kids);
        if (next.population() + kids.size() > options.cap) {
            throw PopulationCapExceeded(gen.depth, next.population() + kids.size(),
                                        options.cap);
        }
        const double here = gen.positions[p];
        const bool parent_flag = audit ? gen.above_barrier[p] != 0 : true;
        for (std::size_t i = 0; i < kids.size(); ++i) {
            double x = here + kids[i];
            if (span) {
                x = options.start + std::round((x - options.start) / *span) * *span;
            }
            const bool above = x > floor_level;
            if (kill && !above) {
                continue;
            }
            next.positions.push_back(x);
            next.labels.push_back(child_label(gen.labels[p], i));
            if (audit) {
                next.above_barrier.push_back(parent_flag && above ? 1 : 0);
            }
        }
    }
    return next;
}

double eval_W(const Generation& gen, double t, double psi_t)
{
    CompensatedSum s;
    const double shift = static_cast<double>(gen.depth) * psi_t;
    for (double v : gen.positions) {
        s += std::exp(-t * v - shift);
    }
    return s.value();
}

double eval_D(const Generation& gen)
{
    CompensatedSum s;
    for (double v : gen.positions) {
        s += v * std::exp(-v);
    }
    return s.value();
}

double eval_D_trunc(const Generation& gen, const RenewalFunction& r, double beta,
                    BarrierMode mode)
{
    if (mode == BarrierMode::None) {
        throw PreconditionError("D^(beta) needs a generation simulated with a barrier");
    }
    CompensatedSum s;
    for (std::size_t i = 0; i < gen.population(); ++i) {
        if (mode == BarrierMode::Audit && !gen.above_barrier[i]) {
            continue;
        }
        const double v = gen.positions[i];
        if (v + beta > r.coverage()) {
            throw RIncompatible(v + beta, r.coverage());
        }
        s += r(v + beta) * std::exp(-v);
    }
    return s.value();
}

MartingaleSeries simulate_martingales(const OffspringLaw& law, int generations,
                                      const ForestOptions& options, const RenewalFunction* r,
                                      std::uint64_t replica_key)
{
    MartingaleSeries out;
    out.key = replica_key;
    const double psi1 = law.laplace(1.0).psi;
    const bool tracked = options.mode != BarrierMode::None && r != nullptr;
    Generation gen = root_generation(options);
    for (int n = 0;; ++n) {
        MartingaleRecord rec;
        rec.n = n;
        rec.population = gen.population();
        evaluate_record(gen, psi1, tracked ? r : nullptr, options, rec);
        out.records.push_back(rec);
        if (n == generations) {
            break;
        }
        try {
            gen = step_generation(gen, law, options, replica_key);
        } catch (const PopulationCapExceeded& e) {
            out.truncated = true;
            out.error = e.what();
            break;
        } catch (const OffspringTooLarge& e) {
            out.truncated = true;
            out.error = e.what();
            break;
        }
    }
    return out;
}

std::vector<MartingaleSeries> run_martingale_suite(const OffspringLaw& law,
                                                   const SuiteOptions& options,
                                                   const RenewalFunction* r)
{
    std::vector<MartingaleSeries> out(options.replicas);
    parallel_for(options.replicas, options.workers, [&](std::size_t i) {
        out[i] = simulate_martingales(law, options.generations, options.forest, r,
                                      substream_key(options.seed, "forest", i));
        out[i].replica = i;
    });
    return out;
}

std::string martingales_csv(const std::vector<MartingaleSeries>& series, std::uint64_t seed)
{
    CsvWriter w{"replica", "seed", "n", "population", "W_n_t1", "D_n", "D_n_beta"};
    for (const auto& s : series) {
        for (const auto& rec : s.records) {
            w.field(s.replica).field(seed).field(rec.n).field(rec.population);
            w.field(rec.w1).field(rec.d).field(rec.d_beta);
            w.end_row();
        }
    }
    return w.str();
}

DepthMeans martingale_means(const std::vector<MartingaleSeries>& series, int generations)
{
    DepthMeans out;
    for (int n = 0; n <= generations; ++n) {
        Moments w, d, db;
        for (const auto& s : series) {
            if (static_cast<int>(s.records.size()) <= n) {
                continue;
            }
            const auto& rec = s.records[static_cast<std::size_t>(n)];
            w.add(rec.w1);
            d.add(rec.d);
            if (!std::isnan(rec.d_beta)) {
                db.add(rec.d_beta);
            }
        }
        out.w1.push_back(w.estimate());
        out.d.push_back(d.estimate());
        out.d_beta.push_back(db.estimate());
    }
    return out;
}

namespace {

double simulate_D(const OffspringLaw& law, int depth, std::uint64_t key, std::uint64_t cap)
{
    ForestOptions opt;
    opt.cap = cap;
    Generation g = root_generation(opt);
    for (int n = 0; n < depth; ++n) {
        g = step_generation(g, law, opt, key);
    }
    return eval_D(g);
}

} // namespace

CascadeResult cascade_check(const OffspringLaw& law, int m, std::uint64_t replicas,
                            std::uint64_t seed, unsigned workers, std::uint64_t permutations,
                            std::uint64_t cap)
{
    if (m < 1) {
        throw PreconditionError("cascade depth must be >= 1");
    }
    CascadeResult out;
    out.direct.resize(replicas);
    out.recombined.resize(replicas);
    out.next_depth.resize(replicas);
    parallel_for(replicas, workers, [&](std::size_t r) {
        out.direct[r] = simulate_D(law, m, substream_key(seed, "cascade.direct", r), cap);
        out.next_depth[r] = simulate_D(law, m + 1, substream_key(seed, "cascade.next", r), cap);

        Stream root = make_stream(seed, "cascade.root", r);
        const auto first = law.sample(root);
        CompensatedSum b;
        for (std::size_t i = 0; i < first.size(); ++i) {
            const std::uint64_t sub = substream_key(substream_key(seed, "cascade.subtree", r), "child", i);
            b += std::exp(-first[i]) * simulate_D(law, m, sub, cap);
        }
        out.recombined[r] = b.value();
    });
    out.ks_direct_recombined = ks_statistic(out.direct, out.recombined);
    out.ks_baseline = ks_statistic(out.direct, out.next_depth);
    Stream perm = make_stream(seed, "cascade.permutation", 0);
    const KsResult bc = ks_permutation_test(out.recombined, out.next_depth, permutations, perm);
    out.ks_recombined_next = bc.statistic;
    out.p_recombined_next = bc.p_value;
    return out;
}

} // namespace brw
