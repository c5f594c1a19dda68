#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "brw/rng.hpp"
#include "brw/walk.hpp"

namespace brw::detail {

/// Integer-lattice step sampler; the symmetric +-1 walk uses one bit per step.
class LatticeSampler {
public:
    explicit LatticeSampler(const StepLaw& step) : steps_(step.lattice_steps())
    {
        const auto& p = step.probabilities();
        simple_ = steps_.size() == 2 && steps_[0] == -1 && steps_[1] == 1 &&
                  std::abs(p[0] - 0.5) <= 1e-12 && std::abs(p[1] - 0.5) <= 1e-12;
        double acc = 0.0;
        for (double q : p) {
            acc += q;
            cdf_.push_back(acc);
        }
        cdf_.back() = 1.0;
    }

    bool simple() const noexcept { return simple_; }

    std::int64_t operator()(Stream& s)
    {
        if (simple_) {
            if (bits_left_ == 0) {
                bits_ = s();
                bits_left_ = 64;
            }
            const std::int64_t v = (bits_ & 1u) ? 1 : -1;
            bits_ >>= 1;
            --bits_left_;
            return v;
        }
        const double u = s.uniform();
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        const auto idx = std::min<std::ptrdiff_t>(it - cdf_.begin(),
                                                  static_cast<std::ptrdiff_t>(cdf_.size()) - 1);
        return steps_[static_cast<std::size_t>(idx)];
    }

private:
    std::vector<std::int64_t> steps_;
    std::vector<double> cdf_;
    bool simple_ = false;
    std::uint64_t bits_ = 0;
    int bits_left_ = 0;
};

} // namespace brw::detail
