#include "brw/spine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "brw/csv.hpp"
#include "brw/enumerate.hpp"
#include "brw/errors.hpp"
#include "brw/parallel.hpp"

namespace brw {

namespace {

constexpr std::uint64_t kBlock = 1024;

class SpineSampler {
public:
    SpineSampler(const OffspringLaw& law, const RenewalFunction& r)
        : law_(law), r_(r), span_(law.lattice_span())
    {
        if (law.finite_support()) {
            atoms_ = law.atoms();
            double acc = 0.0;
            for (const auto& a : atoms_) {
                acc += a.probability;
                cdf_.push_back(acc);
            }
            cdf_.back() = 1.0;
        } else {
            sigma_ = std::sqrt(law.sigma2());
            c2_ = r.envelope_upper();
            std::tie(mu_, sd_) = law.gaussian_displacement();
        }
    }

    SpineStep step(double v, Stream& s) const
    {
        if (v < 0.0) {
            throw PreconditionError("the spine lives on [0, inf)");
        }
        return law_.finite_support() ? step_finite(v, s) : step_gaussian(v, s);
    }

    /// Moves v by d, staying on the lattice through `origin` when there is one.
    double advance(double v, double d, double origin) const
    {
        const double x = v + d;
        return span_ ? origin + std::round((x - origin) / *span_) * *span_ : x;
    }

private:
    SpineStep step_finite(double v, Stream& s) const
    {
        std::vector<double> mass(atoms_.size(), 0.0);
        double envelope = 0.0;
        for (std::size_t i = 0; i < atoms_.size(); ++i) {
            for (double d : atoms_[i].displacements) {
                if (v + d > 0.0) {
                    mass[i] += r_(v + d) * std::exp(-d);
                }
            }
            envelope = std::max(envelope, mass[i]);
        }
        if (!(envelope > 0.0)) {
            throw PreconditionError("no offspring outcome can carry the spine from " + fmt17(v));
        }
        SpineStep out;
        for (;;) {
            const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), s.uniform());
            const auto i = static_cast<std::size_t>(
                std::min<std::ptrdiff_t>(it - cdf_.begin(),
                                         static_cast<std::ptrdiff_t>(cdf_.size()) - 1));
            if (s.uniform() * envelope < mass[i]) {
                out.children = atoms_[i].displacements;
                double u = s.uniform() * mass[i];
                out.chosen = out.children.size() - 1;
                for (std::size_t c = 0; c < out.children.size(); ++c) {
                    const double d = out.children[c];
                    const double w = v + d > 0.0 ? r_(v + d) * std::exp(-d) : 0.0;
                    if (w > 0.0 && u < w) {
                        out.chosen = c;
                        break;
                    }
                    u -= w;
                }
                break;
            }
            ++out.rejections;
        }
        out.sibling_count = static_cast<double>(out.children.size() - 1);
        return out;
    }

    SpineStep step_gaussian(double v, Stream& s) const
    {
        SpineStep out;
        const double w_normal = 1.0 + v;
        const double w_tail = sigma_ / std::sqrt(2.0 * std::numbers::pi);
        double d = 0.0;
        for (;;) {
            d = s.uniform() * (w_normal + w_tail) < w_normal
                    ? sigma_ * s.normal()
                    : sigma_ * std::sqrt(2.0 * s.exponential());
            const double y = v + d;
            if (y > 0.0 && s.uniform() * c2_ * (1.0 + v + std::max(d, 0.0)) < r_(y)) {
                break;
            }
            ++out.rejections;
        }
        out.children.push_back(d);
        out.chosen = 0;
        if (law_.family() == Family::BinaryGaussian) {
            out.children.push_back(mu_ + sd_ * s.normal());
            out.sibling_count = 1.0;
            return out;
        }
        const double log_count = law_.count_table()->sample_size_biased_log(s);
        if (log_count > std::log(kMaxMaterializedChildren)) {
            out.sibling_count = std::exp(log_count) - 1.0;
            out.siblings_stored = false;
            return out;
        }
        const auto count = static_cast<std::size_t>(std::llround(std::exp(log_count)));
        for (std::size_t i = 1; i < count; ++i) {
            out.children.push_back(mu_ + sd_ * s.normal());
        }
        out.sibling_count = static_cast<double>(count - 1);
        return out;
    }

    const OffspringLaw& law_;
    const RenewalFunction& r_;
    std::optional<double> span_;
    std::vector<TableAtom> atoms_;
    std::vector<double> cdf_;
    double sigma_ = 0.0;
    double c2_ = 0.0;
    double mu_ = 0.0;
    double sd_ = 0.0;
};

SpineRealization run_spine(const SpineSampler& sampler, int horizon, double start, Stream& s)
{
    SpineRealization out;
    out.positions.push_back(start);
    double v = start;
    for (int n = 0; n < horizon; ++n) {
        SpineStep st = sampler.step(v, s);
        v = sampler.advance(v, st.children[st.chosen], start);
        out.positions.push_back(v);
        out.sibling_counts.push_back(st.sibling_count);
        out.rejections += st.rejections;
        if (st.siblings_stored) {
            st.children.erase(st.children.begin() + static_cast<std::ptrdiff_t>(st.chosen));
            out.siblings.push_back(std::move(st.children));
        } else {
            out.siblings.emplace_back();
        }
    }
    return out;
}

} // namespace

SpineStep sample_spine_step(double v, const OffspringLaw& law, const RenewalFunction& r,
                            Stream& s)
{
    return SpineSampler(law, r).step(v, s);
}

SpineRealization sample_spine(const OffspringLaw& law, const RenewalFunction& r, int horizon,
                              double start, Stream& s)
{
    return run_spine(SpineSampler(law, r), horizon, start, s);
}

std::vector<SpineRealization> sample_spines(const OffspringLaw& law, const RenewalFunction& r,
                                            int horizon, std::uint64_t replicas, double start,
                                            std::uint64_t seed, unsigned workers)
{
    const SpineSampler sampler(law, r);
    std::vector<SpineRealization> out(replicas);
    parallel_for(replicas, workers, [&](std::size_t i) {
        Stream s = make_stream(seed, "spine", i);
        out[i] = run_spine(sampler, horizon, start, s);
    });
    return out;
}

std::string spine_csv(const std::vector<SpineRealization>& spines)
{
    CsvWriter w{"replica", "n", "spine_position", "n_siblings"};
    for (std::size_t i = 0; i < spines.size(); ++i) {
        const auto& sp = spines[i];
        for (std::size_t n = 0; n < sp.positions.size(); ++n) {
            w.field(static_cast<std::uint64_t>(i)).field(static_cast<std::uint64_t>(n));
            w.field(sp.positions[n]).field(n == 0 ? 0.0 : sp.sibling_counts[n - 1]);
            w.end_row();
        }
    }
    return w.str();
}

SpineLawCheck verify_spine_law_exact(const OffspringLaw& law, int horizon)
{
    if (law.family() != Family::LatticeBinary) {
        throw PreconditionError("exact spine law comparison needs the lattice law");
    }
    const ExactLatticeR r(*law.lattice_span());
    const StepLaw step = derive_step_law(law);
    SpineLawCheck out;
    out.total_variation = total_variation(exact_spine_law(law, r, horizon),
                                          exact_h_transform_law(step, r, horizon));
    return out;
}

SpineLawCheck verify_spine_law_mc(const OffspringLaw& law, const RenewalFunction& r, int horizon,
                                  const PathFunctional& g, std::uint64_t replicas,
                                  std::uint64_t seed, unsigned workers)
{
    const SpineSampler sampler(law, r);
    const StepLaw step = derive_step_law(law);
    const std::uint64_t blocks = (replicas + kBlock - 1) / kBlock;
    std::vector<Moments> spine(blocks), weighted(blocks);
    parallel_for(blocks, workers, [&](std::size_t b) {
        Stream ss = make_stream(seed, "spine_law.spine", b);
        Stream ws = make_stream(seed, "spine_law.walk", b);
        const std::uint64_t hi = std::min(replicas, (b + 1) * kBlock);
        std::vector<double> walk(static_cast<std::size_t>(horizon) + 1);
        for (std::uint64_t i = b * kBlock; i < hi; ++i) {
            spine[b].add(g(run_spine(sampler, horizon, 0.0, ss).positions));
            bool positive = true;
            for (int n = 1; n <= horizon; ++n) {
                walk[n] = walk[n - 1] + step.sample(ws);
                positive = positive && walk[n] > 0.0;
            }
            weighted[b].add(positive ? g(walk) * r(walk.back()) / r(0.0) : 0.0);
        }
    });
    Moments a, c;
    for (std::uint64_t b = 0; b < blocks; ++b) {
        a.merge(spine[b]);
        c.merge(weighted[b]);
    }
    SpineLawCheck out;
    out.spine = a.estimate();
    out.weighted = c.estimate();
    return out;
}

MarkedTree sample_q_tree(const OffspringLaw& law, const RenewalFunction& r, int n, double start,
                         std::uint64_t key, std::uint64_t cap)
{
    if (start < 0.0) {
        throw PreconditionError("Q_a needs a >= 0");
    }
    const SpineSampler sampler(law, r);
    const auto span = law.lattice_span();
    Stream spine_stream(mix64(key ^ 0x5b1ee5ULL), 0);
    MarkedTree tree;
    Generation g;
    g.positions = {start};
    g.labels = {0x5eedULL};
    g.above_barrier = {1};
    std::size_t spine_index = 0;
    std::vector<double> kids;
    for (int depth = 0; depth < n; ++depth) {
        Generation next;
        next.depth = depth + 1;
        std::size_t next_spine = 0;
        for (std::size_t p = 0; p < g.population(); ++p) {
            std::size_t chosen = kids.size();
            if (p == spine_index) {
                SpineStep st = sampler.step(g.positions[p], spine_stream);
                if (!st.siblings_stored) {
                    throw OffspringTooLarge(st.sibling_count + 1.0);
                }
                kids = std::move(st.children);
                chosen = st.chosen;
            } else {
                Stream s(key, g.labels[p]);
                law.sample(s, kids);
            }
            if (next.population() + kids.size() > cap) {
                throw PopulationCapExceeded(depth, next.population() + kids.size(), cap);
            }
            for (std::size_t i = 0; i < kids.size(); ++i) {
                double x = g.positions[p] + kids[i];
                if (span) {
                    x = start + std::round((x - start) / *span) * *span;
                }
                if (i == chosen) {
                    next_spine = next.population();
                }
                next.positions.push_back(x);
                next.labels.push_back(child_label(g.labels[p], i));
                next.above_barrier.push_back(g.above_barrier[p] && x > 0.0 ? 1 : 0);
            }
        }
        tree.generations.push_back(std::move(g));
        g = std::move(next);
        spine_index = next_spine;
    }
    tree.generations.push_back(std::move(g));
    return tree;
}

MarkedTree sample_p_tree(const OffspringLaw& law, int n, double start, std::uint64_t key,
                         std::uint64_t cap)
{
    ForestOptions opt;
    opt.mode = BarrierMode::Audit;
    opt.beta = 0.0;
    opt.start = start;
    opt.cap = cap;
    MarkedTree tree;
    tree.generations.push_back(root_generation(opt));
    for (int d = 0; d < n; ++d) {
        tree.generations.push_back(step_generation(tree.generations.back(), law, opt, key));
    }
    return tree;
}

DensityCheck verify_density(const OffspringLaw& law, const RenewalFunction& r, int n,
                            double start, const TreeFunctional& g, std::uint64_t replicas,
                            std::uint64_t seed, unsigned workers)
{
    const double norm = r(start) * std::exp(-start);
    std::vector<double> q(replicas), p(replicas);
    parallel_for(replicas, workers, [&](std::size_t i) {
        q[i] = g(sample_q_tree(law, r, n, start, substream_key(seed, "density.q", i)));
        const MarkedTree t = sample_p_tree(law, n, start, substream_key(seed, "density.p", i));
        p[i] = g(t) * eval_D_trunc(t.generations.back(), r, 0.0, BarrierMode::Audit) / norm;
    });
    Moments mq, mp;
    for (std::uint64_t i = 0; i < replicas; ++i) {
        mq.add(q[i]);
        mp.add(p[i]);
    }
    return {mq.estimate(), mp.estimate()};
}

MarginalCheck spine_marginal_vs_conditioned(const OffspringLaw& law, const RenewalFunction& r,
                                            int horizon, std::uint64_t replicas,
                                            std::uint64_t seed, unsigned workers,
                                            std::uint64_t permutations)
{
    MarginalCheck out;
    if (horizon == 0) {
        out.conditioned.assign(replicas, 0.0);
        out.spine.assign(replicas, 0.0);
        return out;
    }
    const StepLaw step = derive_step_law(law);
    const auto batch = sample_conditioned_paths(step, static_cast<std::uint64_t>(horizon),
                                                replicas, seed, workers);
    for (const auto& p : batch.paths) {
        out.conditioned.push_back(p.values.back());
    }
    for (const auto& sp : sample_spines(law, r, horizon, replicas, 0.0, seed, workers)) {
        out.spine.push_back(sp.positions.back());
    }
    Stream perm = make_stream(seed, "spine.permutation", 0);
    const KsResult ks = ks_permutation_test(out.conditioned, out.spine, permutations, perm);
    out.ks = ks.statistic;
    out.p_value = ks.p_value;
    return out;
}

} // namespace brw
