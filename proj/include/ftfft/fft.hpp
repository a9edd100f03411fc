#pragma once

// Tiled mixed-radix Stockham FFT.
//
// A plan factors n = N1 * N2 (* N3). Stage k is one sweep over the buffer: every
// tile gathers N_k elements at stride n / (L * N_k) (L = product of earlier
// dims), multiplies by the block twiddles w_{L N_k}^{j s}, transforms the tile
// with radix-n_k codelets in local scratch and scatters at stride L. Outputs land
// in natural order after the last stage, so there is no permutation pass.
//
// Guards observe the data stream for checksum encoding; injectors corrupt it.
// Both compile away when the null types are used.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "ftfft/plan.hpp"
#include "ftfft/signal.hpp"
#include "ftfft/twiddle.hpp"

namespace ftfft {

/// Full sweeps over the signal buffer.
struct PassCounter {
    std::size_t reads = 0;
    std::size_t writes = 0;

    std::size_t total() const { return reads + writes; }
    friend bool operator==(const PassCounter&, const PassCounter&) = default;
};

/// One radix-rho substep of a tile, column-major: column c holds the rho inputs
/// (x) or outputs (y) of one codelet application.
template <class T>
struct SubstepView {
    std::size_t stage = 0;
    std::size_t signal = 0;
    std::size_t radix = 0;
    std::size_t columns = 0;
    bool first = false;
    bool last = false;
    std::span<std::complex<T>> x;
    std::span<std::complex<T>> y;
    const Codelet<T>* codelet = nullptr;
};

template <class T>
struct NullGuard {
    static constexpr bool watches_passes = false;
    static constexpr bool watches_substeps = false;
    void on_load(std::size_t, std::size_t, std::size_t, const std::complex<T>&) {}
    void on_store(std::size_t, std::size_t, std::size_t, const std::complex<T>&) {}
    void encode_substep(const SubstepView<T>&) {}
    void verify_substep(SubstepView<T>&) {}
};

template <class T>
struct NoInjection {
    static constexpr bool active = false;
    void on_input(std::size_t, std::size_t, std::complex<T>&) {}
    void on_output(std::size_t, std::size_t, std::size_t, std::complex<T>&) {}
};

// ---------------------------------------------------------------------------
// O(N^2) reference

template <class T>
Signal<T> dft_reference(std::span<const std::complex<T>> x, bool inverse = false) {
    const std::size_t n = x.size();
    if (n == 0) return {};
    std::vector<std::complex<double>> w(n);
    const long double sign = inverse ? 1.0L : -1.0L;
    for (std::size_t p = 0; p < n; ++p) {
        const long double a = sign * 2.0L * std::numbers::pi_v<long double> * static_cast<long double>(p) /
                              static_cast<long double>(n);
        w[p] = {static_cast<double>(std::cos(a)), static_cast<double>(std::sin(a))};
    }
    Signal<T> y(n);
    for (std::size_t j = 0; j < n; ++j) {
        double re = 0.0, im = 0.0;
        std::size_t p = 0;
        for (std::size_t k = 0; k < n; ++k) {
            const double xr = x[k].real(), xi = x[k].imag();
            re += xr * w[p].real() - xi * w[p].imag();
            im += xr * w[p].imag() + xi * w[p].real();
            p += j;
            if (p >= n) p %= n;
        }
        if (inverse) {
            re /= static_cast<double>(n);
            im /= static_cast<double>(n);
        }
        y[j] = {static_cast<T>(re), static_cast<T>(im)};
    }
    return y;
}

template <class T>
Signal<T> dft_reference(const Signal<T>& x, bool inverse = false) {
    return dft_reference(std::span<const std::complex<T>>(x), inverse);
}

// ---------------------------------------------------------------------------
// Stage execution

namespace detail {

template <class T>
struct TileScratch {
    std::vector<std::complex<T>> a, b, x, y;
    explicit TileScratch(std::size_t dim) : a(dim), b(dim), x(dim), y(dim) {}
};

struct TileCoord {
    std::size_t signal;
    std::size_t q;     // tile row within the stage
    std::size_t j;     // position within the previous transform length
    std::size_t span;  // L
    std::size_t m;     // n / (L * dim)
    std::size_t dim;

    std::size_t input_index(std::size_t s) const { return (q + s * m) * span + j; }
    std::size_t output_index(std::size_t v) const { return q * span * dim + j + span * v; }
};

/// Transforms scratch.a (tile input, natural order) in place.
template <class T, class Guard, class Injector>
void run_tile(const TwiddleTable<T>& tw, std::size_t stage, const TileCoord& tc, TileScratch<T>& s, Guard& guard,
              Injector& inj) {
    const StageTwiddles<T>& st = tw.stages[stage];
    const std::size_t dim = tc.dim;
    const std::size_t substeps = st.substep_radices.size();
    std::size_t inner_span = 1;
    for (std::size_t t = 0; t < substeps; ++t) {
        const std::size_t rho = st.substep_radices[t];
        const std::size_t inner_m = dim / (inner_span * rho);
        const std::size_t cols = dim / rho;
        const std::size_t tw_step = dim / (inner_span * rho);
        const bool first = t == 0;
        const bool last = t + 1 == substeps;

        for (std::size_t qi = 0; qi < inner_m; ++qi)
            for (std::size_t ji = 0; ji < inner_span; ++ji) {
                std::complex<T>* col = s.x.data() + (qi * inner_span + ji) * rho;
                for (std::size_t e = 0; e < rho; ++e) {
                    const std::complex<T> v = s.a[(qi + e * inner_m) * inner_span + ji];
                    col[e] = ji == 0 ? v : v * st.tile[ji * e * tw_step];
                }
            }

        SubstepView<T> view{stage, tc.signal, rho, cols, first, last, s.x, s.y, &tw.codelet(rho)};
        if constexpr (Guard::watches_substeps) guard.encode_substep(view);

        if constexpr (Injector::active) {
            if (stage == 0 && first)
                for (std::size_t c = 0; c < cols; ++c)
                    for (std::size_t e = 0; e < rho; ++e)
                        inj.on_input(tc.signal, tc.input_index(c + e * inner_m), s.x[c * rho + e]);
        }

        const Codelet<T>& cl = tw.codelet(rho);
        for (std::size_t c = 0; c < cols; ++c) cl.apply(s.x.data() + c * rho, s.y.data() + c * rho);

        if constexpr (Injector::active) {
            if (last)
                for (std::size_t c = 0; c < cols; ++c)
                    for (std::size_t v = 0; v < rho; ++v)
                        inj.on_output(stage, tc.signal, tc.output_index(c + inner_span * v), s.y[c * rho + v]);
        }

        if constexpr (Guard::watches_substeps) guard.verify_substep(view);

        for (std::size_t qi = 0; qi < inner_m; ++qi)
            for (std::size_t ji = 0; ji < inner_span; ++ji) {
                const std::complex<T>* col = s.y.data() + (qi * inner_span + ji) * rho;
                for (std::size_t v = 0; v < rho; ++v) s.b[qi * inner_span * rho + ji + inner_span * v] = col[v];
            }
        std::swap(s.a, s.b);
        inner_span *= rho;
    }
}

inline constexpr std::size_t kTileBlock = 8;

}  // namespace detail

/// One read sweep and one write sweep over `in`/`out`, which hold whole signals
/// of length plan.n back to back.
template <class T, class Guard, class Injector>
void stage_pass(const FftPlan& plan, std::size_t stage, const TwiddleTable<T>& tw,
                std::span<const std::complex<T>> in, std::span<std::complex<T>> out, PassCounter& counter,
                bool inverse, Guard& guard, Injector& inj) {
    const std::size_t n = plan.n;
    if (stage >= plan.stages.size()) throw std::invalid_argument("stage index out of range");
    if (in.size() != out.size() || in.size() % n != 0 || in.empty())
        throw std::invalid_argument("plan/input size mismatch");
    const std::size_t dim = plan.stages[stage].dim;
    const std::size_t span = plan.span_before(stage);
    const std::size_t m = n / (span * dim);
    const bool last_stage = stage + 1 == plan.stages.size();
    const std::vector<std::complex<T>>& outer = tw.stages[stage].outer;
    const T scale = static_cast<T>(1.0 / static_cast<double>(n));

    const std::size_t block = std::min(detail::kTileBlock, span);
    std::vector<detail::TileScratch<T>> tiles(block, detail::TileScratch<T>(dim));

    for (std::size_t sig = 0; sig < in.size() / n; ++sig) {
        const std::complex<T>* src = in.data() + sig * n;
        std::complex<T>* dst = out.data() + sig * n;
        for (std::size_t q = 0; q < m; ++q)
            for (std::size_t j0 = 0; j0 < span; j0 += block) {
                const std::size_t jb = std::min(block, span - j0);
                for (std::size_t s = 0; s < dim; ++s)
                    for (std::size_t jj = 0; jj < jb; ++jj) {
                        const std::size_t j = j0 + jj;
                        const std::size_t idx = (q + s * m) * span + j;
                        std::complex<T> v = src[idx];
                        if constexpr (Guard::watches_passes) guard.on_load(stage, sig, idx, v);
                        if (stage == 0 && inverse) v = std::conj(v);
                        if (j != 0 && s != 0) v *= outer[j * s];
                        tiles[jj].a[s] = v;
                    }
                for (std::size_t jj = 0; jj < jb; ++jj)
                    detail::run_tile(tw, stage, detail::TileCoord{sig, q, j0 + jj, span, m, dim}, tiles[jj], guard,
                                     inj);
                for (std::size_t v = 0; v < dim; ++v)
                    for (std::size_t jj = 0; jj < jb; ++jj) {
                        const std::size_t idx = q * span * dim + j0 + jj + span * v;
                        std::complex<T> val = tiles[jj].a[v];
                        if (last_stage && inverse) val = std::conj(val) * scale;
                        if constexpr (Guard::watches_passes) guard.on_store(stage, sig, idx, val);
                        dst[idx] = val;
                    }
            }
    }
    ++counter.reads;
    ++counter.writes;
}

template <class T>
void stage_pass(const FftPlan& plan, std::size_t stage, const TwiddleTable<T>& tw,
                std::span<const std::complex<T>> in, std::span<std::complex<T>> out, PassCounter& counter,
                bool inverse = false) {
    NullGuard<T> g;
    NoInjection<T> i;
    stage_pass(plan, stage, tw, in, out, counter, inverse, g, i);
}

/// Runs every stage of `plan` over `in` (one or more whole signals) into `out`.
template <class T, class Guard, class Injector>
void execute(const FftPlan& plan, const TwiddleTable<T>& tw, std::span<const std::complex<T>> in,
             std::span<std::complex<T>> out, bool inverse, PassCounter& counter, Guard& guard, Injector& inj) {
    if (tw.n != plan.n || tw.stages.size() != plan.stages.size())
        throw std::invalid_argument("twiddle table does not match plan");
    if (in.size() != out.size() || in.empty() || in.size() % plan.n != 0)
        throw std::invalid_argument("plan/input size mismatch");
    const std::size_t stages = plan.stages.size();
    std::vector<std::complex<T>> t0, t1;
    if (stages > 1) t0.resize(in.size());
    if (stages > 2) t1.resize(in.size());
    std::span<const std::complex<T>> cur = in;
    for (std::size_t k = 0; k < stages; ++k) {
        std::span<std::complex<T>> dst = k + 1 == stages ? out : (k % 2 == 0 ? std::span(t0) : std::span(t1));
        stage_pass(plan, k, tw, cur, dst, counter, inverse, guard, inj);
        cur = dst;
    }
}

template <class T>
SignalBatch<T> fft_execute(const FftPlan& plan, const TwiddleTable<T>& tw, const SignalBatch<T>& input,
                           bool inverse = false, PassCounter* counter = nullptr) {
    if (input.n() != plan.n) throw std::invalid_argument("plan/input size mismatch");
    SignalBatch<T> out(input.n(), input.count());
    PassCounter local;
    NullGuard<T> g;
    NoInjection<T> i;
    execute(plan, tw, input.data(), out.data(), inverse, counter ? *counter : local, g, i);
    return out;
}

template <class T>
Signal<T> fft_execute(const FftPlan& plan, const TwiddleTable<T>& tw, std::span<const std::complex<T>> input,
                      bool inverse = false, PassCounter* counter = nullptr) {
    if (input.size() != plan.n) throw std::invalid_argument("plan/input size mismatch");
    Signal<T> out(input.size());
    PassCounter local;
    NullGuard<T> g;
    NoInjection<T> i;
    execute(plan, tw, input, std::span<std::complex<T>>(out), inverse, counter ? *counter : local, g, i);
    return out;
}

/// Convenience transform with a default plan for the signal's length.
template <class T>
Signal<T> fft(const Signal<T>& x, bool inverse = false) {
    const FftPlan plan = make_plan(x.size(), precision_of<T>());
    const TwiddleTable<T> tw = build_twiddles<T>(plan);
    return fft_execute(plan, tw, std::span<const std::complex<T>>(x), inverse);
}

}  // namespace ftfft
