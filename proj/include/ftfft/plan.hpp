#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "ftfft/planner.hpp"
#include "ftfft/signal.hpp"

namespace ftfft {

enum class TwiddleMode { Direct, Recurrence, Precomputed };

inline std::string_view to_string(TwiddleMode m) {
    switch (m) {
        case TwiddleMode::Direct: return "direct";
        case TwiddleMode::Recurrence: return "recurrence";
        case TwiddleMode::Precomputed: return "precomputed";
    }
    return "direct";
}

struct Stage {
    std::size_t dim = 0;
    std::size_t thread_radix = 0;
    TwiddleMode twiddle_mode = TwiddleMode::Direct;

    friend bool operator==(const Stage&, const Stage&) = default;
};

struct FftPlan {
    std::size_t n = 0;
    std::vector<Stage> stages;
    std::size_t bs = 1;
    Precision precision = Precision::FP64;

    /// Product of the dims of stages before `stage`.
    std::size_t span_before(std::size_t stage) const {
        std::size_t l = 1;
        for (std::size_t k = 0; k < stage; ++k) l *= stages[k].dim;
        return l;
    }

    PlanParams params() const {
        PlanParams p;
        for (std::size_t k = 0; k < stages.size(); ++k) {
            p.dims[k] = stages[k].dim;
            p.radices[k] = stages[k].thread_radix;
        }
        p.bs = bs;
        return p;
    }
};

/// Single precision evaluates block-level twiddles with trig calls; double
/// precision reads a precomputed table.
constexpr TwiddleMode default_twiddle_mode(Precision p) {
    return p == Precision::FP32 ? TwiddleMode::Direct : TwiddleMode::Precomputed;
}

inline FftPlan plan_from_params(const PlanParams& params, Precision precision) {
    FftPlan plan;
    plan.n = params.size();
    plan.bs = params.bs;
    plan.precision = precision;
    for (std::size_t k = 0; k < params.stage_count(); ++k)
        plan.stages.push_back({params.dims[k], params.radices[k], default_twiddle_mode(precision)});
    return plan;
}

inline FftPlan make_plan(std::size_t n, Precision precision, std::size_t max_tile = kDefaultMaxTile,
                         std::size_t batch = 0) {
    return plan_from_params(select_parameters(n, batch, max_tile), precision);
}

}  // namespace ftfft
