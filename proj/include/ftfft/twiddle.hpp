#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "ftfft/plan.hpp"
#include "ftfft/planner.hpp"

namespace ftfft {

inline constexpr std::size_t kDefaultRenormInterval = 16;
inline constexpr std::size_t kMaxThreadRadix = 32;

/// Executable form of an unrolled tile: bit-reversed loads followed by
/// in-register radix-2 butterflies with constant twiddles.
template <class T>
class Codelet {
public:
    struct Butterfly {
        unsigned a;
        unsigned b;
        std::complex<T> w;
    };

    Codelet() = default;

    explicit Codelet(std::size_t radix) : radix_(radix) {
        const auto ops = unroll_tile(radix);
        for (const auto& op : ops) {
            if (op.kind == OpKind::Load) load_src_[op.reg] = static_cast<unsigned>(op.index);
            if (op.kind == OpKind::Butterfly) {
                const double angle = -2.0 * std::numbers::pi * static_cast<double>(op.twiddle) / static_cast<double>(radix);
                butterflies_.push_back({static_cast<unsigned>(op.a), static_cast<unsigned>(op.b),
                                        std::complex<T>(static_cast<T>(std::cos(angle)), static_cast<T>(std::sin(angle)))});
            }
        }
    }

    std::size_t radix() const { return radix_; }
    std::size_t butterfly_count() const { return butterflies_.size(); }

    /// out = DFT_radix(in). `in` and `out` may alias.
    void apply(const std::complex<T>* in, std::complex<T>* out) const {
        std::array<std::complex<T>, kMaxThreadRadix> reg;
        for (std::size_t i = 0; i < radix_; ++i) reg[i] = in[load_src_[i]];
        for (const auto& bf : butterflies_) {
            const std::complex<T> t = reg[bf.b] * bf.w;
            reg[bf.b] = reg[bf.a] - t;
            reg[bf.a] += t;
        }
        for (std::size_t i = 0; i < radix_; ++i) out[i] = reg[i];
    }

    void apply(std::span<const std::complex<T>> in, std::span<std::complex<T>> out) const {
        if (in.size() != radix_ || out.size() != radix_) throw std::invalid_argument("codelet: tile size mismatch");
        apply(in.data(), out.data());
    }

private:
    std::size_t radix_ = 0;
    std::array<unsigned, kMaxThreadRadix> load_src_{};
    std::vector<Butterfly> butterflies_;
};

/// Powers w^p, p < count, of w = e^{-2 pi i / m}.
template <class T>
std::vector<std::complex<T>> twiddle_factors(std::size_t m, std::size_t count, TwiddleMode mode,
                                             std::size_t renorm_interval = kDefaultRenormInterval) {
    if (m == 0) throw std::invalid_argument("twiddle base must be positive");
    std::vector<std::complex<T>> f(count);
    const auto direct = [m](std::size_t p) {
        const double angle = -2.0 * std::numbers::pi * static_cast<double>(p % m) / static_cast<double>(m);
        return std::complex<T>(static_cast<T>(std::cos(angle)), static_cast<T>(std::sin(angle)));
    };
    switch (mode) {
        case TwiddleMode::Direct:
            for (std::size_t p = 0; p < count; ++p) f[p] = direct(p);
            break;
        case TwiddleMode::Precomputed:
            for (std::size_t p = 0; p < count; ++p) {
                const long double angle =
                    -2.0L * std::numbers::pi_v<long double> * static_cast<long double>(p % m) / static_cast<long double>(m);
                f[p] = std::complex<T>(static_cast<T>(std::cos(angle)), static_cast<T>(std::sin(angle)));
            }
            break;
        case TwiddleMode::Recurrence: {
            if (renorm_interval == 0) throw std::invalid_argument("renorm_interval must be positive");
            // w_{p+1} = w_p + w_p * z with z = w - 1 = (-2 sin^2(theta/2), -sin theta); the
            // small increment keeps rounding drift far below the one-step product form.
            const double theta = 2.0 * std::numbers::pi / static_cast<double>(m);
            const double s = std::sin(theta / 2.0);
            const std::complex<T> z(static_cast<T>(-2.0 * s * s), static_cast<T>(-std::sin(theta)));
            std::complex<T> w;
            for (std::size_t p = 0; p < count; ++p) {
                if (p % renorm_interval == 0)
                    w = direct(p);
                else
                    w += w * z;
                f[p] = w;
            }
            break;
        }
    }
    return f;
}

template <class T>
struct StageTwiddles {
    std::vector<std::complex<T>> outer;  // w_{L*dim}^p for p < L*dim, L = span before the stage
    std::vector<std::complex<T>> tile;   // w_dim^p for p < dim
    std::vector<std::size_t> substep_radices;
    TwiddleMode mode = TwiddleMode::Direct;
};

/// Splits a tile of size dim into thread-radix substeps, remainder last.
inline std::vector<std::size_t> substep_radices(std::size_t dim, std::size_t radix) {
    if (radix < 2 || dim % radix != 0) throw std::invalid_argument("thread radix must divide its stage dim");
    std::vector<std::size_t> out;
    std::size_t rest = dim;
    while (rest % radix == 0 && rest >= radix) {
        out.push_back(radix);
        rest /= radix;
    }
    if (rest > 1) out.push_back(rest);
    return out;
}

template <class T>
struct TwiddleTable {
    std::size_t n = 0;
    std::size_t renorm_interval = kDefaultRenormInterval;
    std::vector<StageTwiddles<T>> stages;
    std::array<Codelet<T>, 6> codelets;  // indexed by log2(radix), radix 2..32

    const Codelet<T>& codelet(std::size_t radix) const { return codelets[log2_exact(radix)]; }
};

/// Builds the per-stage tables. `mode` overrides each stage's own twiddle mode.
template <class T>
TwiddleTable<T> build_twiddles(const FftPlan& plan, std::optional<TwiddleMode> mode = std::nullopt,
                               std::size_t renorm_interval = kDefaultRenormInterval) {
    if (plan.stages.empty()) throw std::invalid_argument("plan has no stages");
    TwiddleTable<T> table;
    table.n = plan.n;
    table.renorm_interval = renorm_interval;
    for (std::size_t r = 2; r <= kMaxThreadRadix; r *= 2) table.codelets[log2_exact(r)] = Codelet<T>(r);
    for (std::size_t k = 0; k < plan.stages.size(); ++k) {
        const Stage& st = plan.stages[k];
        const std::size_t outer_base = plan.span_before(k) * st.dim;
        StageTwiddles<T> tw;
        tw.mode = mode.value_or(st.twiddle_mode);
        tw.outer = twiddle_factors<T>(outer_base, outer_base, tw.mode, renorm_interval);
        tw.tile = twiddle_factors<T>(st.dim, st.dim, tw.mode, renorm_interval);
        tw.substep_radices = substep_radices(st.dim, st.thread_radix);
        table.stages.push_back(std::move(tw));
    }
    return table;
}

}  // namespace ftfft
