#pragma once

// Checksum-based fault tolerance for batched FFTs.
//
// One-sided: per-signal left checksum (e^T W) x vs e^T y; a mismatch triggers a
// recompute of that signal.
//
// Two-sided (group): a group of bs signals is also combined on the right,
// s0 = sum_b x_b and s1 = sum_b (b+1) x_b, and the outputs likewise into r0/r1.
// The left checksum says which signal is wrong; fft(s0) minus the other outputs
// rebuilds it without touching the inputs again. Corrections are deferred until
// the next fault or the end of the run.
//
// Two-sided (thread): the same row/column checks applied to every radix-r
// codelet batch inside the tiles, correcting the tile before it is stored.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ftfft/fft.hpp"
#include "ftfft/plan.hpp"
#include "ftfft/signal.hpp"
#include "ftfft/twiddle.hpp"

namespace ftfft {

enum class EncodingKind { Wang, Jou, Ones, Linear };
enum class Scheme { None, OneSided, TwoSidedThread, TwoSidedGroup };
enum class ChecksumSide { Input, Output };

inline std::string_view to_string(EncodingKind k) {
    switch (k) {
        case EncodingKind::Wang: return "wang";
        case EncodingKind::Jou: return "jou";
        case EncodingKind::Ones: return "ones";
        case EncodingKind::Linear: return "linear";
    }
    return "wang";
}

inline EncodingKind parse_encoding(std::string_view s) {
    if (s == "wang") return EncodingKind::Wang;
    if (s == "jou") return EncodingKind::Jou;
    if (s == "ones") return EncodingKind::Ones;
    if (s == "linear") return EncodingKind::Linear;
    throw std::invalid_argument("unknown encoding '" + std::string(s) + "'");
}

inline std::string_view to_string(Scheme s) {
    switch (s) {
        case Scheme::None: return "none";
        case Scheme::OneSided: return "one_sided";
        case Scheme::TwoSidedThread: return "two_sided_thread";
        case Scheme::TwoSidedGroup: return "two_sided_group";
    }
    return "none";
}

inline Scheme parse_scheme(std::string_view s) {
    if (s == "none") return Scheme::None;
    if (s == "one_sided" || s == "one-sided") return Scheme::OneSided;
    if (s == "two_sided_thread" || s == "two-sided-thread" || s == "thread") return Scheme::TwoSidedThread;
    if (s == "two_sided_group" || s == "two-sided-group" || s == "group") return Scheme::TwoSidedGroup;
    throw std::invalid_argument("unknown scheme '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Encodings

template <class T>
struct EncodingVector {
    EncodingKind kind = EncodingKind::Ones;
    Signal<T> values;       // e
    Signal<T> etw;          // e^T W, forward transform
    Signal<T> etw_inverse;  // e^T W^{-1}
    bool requires_variant_input = false;

    std::size_t size() const { return values.size(); }
    const Signal<T>& input_weights(bool inverse) const { return inverse ? etw_inverse : etw; }
};

namespace detail {

template <class T>
Signal<T> transform_weights(const Signal<double>& values, bool inverse) {
    const std::size_t len = values.size();
    Signal<double> w;
    if (is_power_of_two(len) && len >= 2 && len <= kMaxSignalLength) {
        const FftPlan plan = make_plan(len, Precision::FP64);
        const TwiddleTable<double> tw = build_twiddles<double>(plan);
        w = fft_execute(plan, tw, std::span<const std::complex<double>>(values), inverse);
        if (len <= 1024) {
            const Signal<double> check = dft_reference(values, inverse);
            if (relative_l2(w, check) > 1e-12) throw std::logic_error("encoding image disagrees with the O(N^2) oracle");
        }
    } else {
        w = dft_reference(values, inverse);
    }
    Signal<T> out(len);
    for (std::size_t k = 0; k < len; ++k) out[k] = {static_cast<T>(w[k].real()), static_cast<T>(w[k].imag())};
    return out;
}

}  // namespace detail

/// Builds e and its transform-side image. W is symmetric, so e^T W = (W e)^T.
template <class T>
EncodingVector<T> make_encoding(EncodingKind kind, std::size_t len) {
    if (len < 1) throw std::invalid_argument("encoding length must be positive");
    Signal<double> v(len);
    for (std::size_t k = 0; k < len; ++k) {
        switch (kind) {
            case EncodingKind::Wang: {
                const double a = -2.0 * std::numbers::pi * static_cast<double>(k % 3) / 3.0;
                v[k] = {std::cos(a), std::sin(a)};
                break;
            }
            case EncodingKind::Jou: {
                // 1 / w_N^{-k} = w_N^k
                const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
                v[k] = {std::cos(a), std::sin(a)};
                break;
            }
            case EncodingKind::Ones: v[k] = 1.0; break;
            case EncodingKind::Linear: v[k] = static_cast<double>(k + 1); break;
        }
    }
    EncodingVector<T> enc;
    enc.kind = kind;
    enc.requires_variant_input = kind == EncodingKind::Jou;
    enc.values.resize(len);
    for (std::size_t k = 0; k < len; ++k) enc.values[k] = {static_cast<T>(v[k].real()), static_cast<T>(v[k].imag())};
    enc.etw = detail::transform_weights<T>(v, false);
    enc.etw_inverse = detail::transform_weights<T>(v, true);
    return enc;
}

/// Process-wide cache; entries are immutable once built.
template <class T>
const EncodingVector<T>& shared_encoding(EncodingKind kind, std::size_t len) {
    static std::mutex mu;
    static std::map<std::pair<int, std::size_t>, std::unique_ptr<EncodingVector<T>>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[{static_cast<int>(kind), len}];
    if (!slot) slot = std::make_unique<EncodingVector<T>>(make_encoding<T>(kind, len));
    return *slot;
}

/// x'_k = 2 x_k + x_{(k+1) mod n}
template <class T>
Signal<T> jou_variant_input(std::span<const std::complex<T>> x) {
    const std::size_t n = x.size();
    if (n < 2) throw std::invalid_argument("variant input needs at least two samples");
    Signal<T> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = T(2) * x[k] + x[(k + 1) % n];
    return out;
}

template <class T>
Signal<T> jou_variant_input(const Signal<T>& x) {
    return jou_variant_input(std::span<const std::complex<T>>(x));
}

template <class T>
std::complex<double> widen(std::complex<T> v) {
    return {static_cast<double>(v.real()), static_cast<double>(v.imag())};
}

/// Input side: (e^T W) x. Output side: e^T y. Accumulated in double.
template <class T>
std::complex<double> left_checksum(std::span<const std::complex<T>> x, const EncodingVector<T>& enc,
                                   ChecksumSide side, bool inverse = false) {
    if (x.size() != enc.size()) throw std::invalid_argument("checksum: length mismatch");
    const Signal<T>& w = side == ChecksumSide::Input ? enc.input_weights(inverse) : enc.values;
    std::complex<double> acc{};
    for (std::size_t k = 0; k < x.size(); ++k) acc += widen(w[k]) * widen(x[k]);
    return acc;
}

template <class T>
std::complex<double> left_checksum(const Signal<T>& x, const EncodingVector<T>& enc, ChecksumSide side,
                                   bool inverse = false) {
    return left_checksum(std::span<const std::complex<T>>(x), enc, side, inverse);
}

// ---------------------------------------------------------------------------
// Detection

struct DetectionConfig {
    double delta = 1e-4;
    double abs_floor = 0.0;
    double l1_floor_scale = 0.0;  // floor also covers this multiple of ||x||_1

    double floor_for(double l1) const { return std::max(abs_floor, l1_floor_scale * l1); }
    /// Smallest error magnitude that counts as a fault for a signal of this l1 norm.
    double significance(double l1) const { return delta * floor_for(l1); }
};

/// The floor tracks the typical magnitude of a checksum of random data, so a
/// checksum that cancels to near zero by chance does not inflate the ratio.
inline constexpr double kDefaultFloorScale = 1.0;

template <class T>
DetectionConfig make_detection_config(double delta) {
    if (!(delta > 0)) throw std::invalid_argument("delta must be positive");
    return {delta, 0.0, kDefaultFloorScale};
}

/// |c_in - c_out| / max(|c_in|, floor); +inf when anything is non-finite.
inline double relative_discrepancy(std::complex<double> c_in, std::complex<double> c_out, double floor) {
    const double inf = std::numeric_limits<double>::infinity();
    if (!std::isfinite(c_in.real()) || !std::isfinite(c_in.imag()) || !std::isfinite(c_out.real()) ||
        !std::isfinite(c_out.imag()))
        return inf;
    const double num = std::abs(c_in - c_out);
    const double den = std::max(std::abs(c_in), floor);
    if (den == 0.0) return num == 0.0 ? 0.0 : inf;
    const double r = num / den;
    return std::isnan(r) ? inf : r;
}

struct PendingFault {
    std::size_t signal_idx = 0;
    std::complex<double> detected_discrepancy;
};

/// Running checksums of one group of bs signals. Scalar checksums accumulate
/// in double whatever the transform precision.
template <class T>
struct ChecksumState {
    std::size_t n = 0;
    std::size_t group_size = 0;
    bool two_sided = true;
    Signal<T> s0, s1;  // right-side input combinations (unit / linear weights)
    Signal<T> r0, r1;  // right-side output combinations
    Signal<double> c_in;   // (e^T W) x_b
    Signal<double> c_out;  // e^T y_b
    std::vector<double> l1;
    std::optional<PendingFault> pending;

    ChecksumState() = default;
    ChecksumState(std::size_t n_, std::size_t bs, bool two = true)
        : n(n_), group_size(bs), two_sided(two), c_in(bs), c_out(bs), l1(bs, 0.0) {
        if (two) {
            s0.assign(n, {});
            s1.assign(n, {});
            r0.assign(n, {});
            r1.assign(n, {});
        }
    }

    void accumulate_input(std::size_t local, std::size_t idx, const std::complex<T>& v, const Signal<T>& etw) {
        if (two_sided) {
            s0[idx] += v;
            s1[idx] += static_cast<T>(local + 1) * v;
        }
        const std::complex<double> w = widen(v);
        c_in[local] += widen(etw[idx]) * w;
        l1[local] += std::abs(w);
    }

    void accumulate_output(std::size_t local, std::size_t idx, const std::complex<T>& v, const Signal<T>& e) {
        if (two_sided) {
            r0[idx] += v;
            r1[idx] += static_cast<T>(local + 1) * v;
        }
        c_out[local] += widen(e[idx]) * widen(v);
    }
};

/// Standalone encoding of a group's inputs (bs signals back to back).
template <class T>
ChecksumState<T> encode_group(std::span<const std::complex<T>> inputs, std::size_t n, const EncodingVector<T>& enc,
                              bool inverse = false, bool two_sided = true) {
    if (n == 0 || inputs.size() % n != 0) throw std::invalid_argument("group length mismatch");
    if (enc.size() != n) throw std::invalid_argument("encoding length mismatch");
    ChecksumState<T> st(n, inputs.size() / n, two_sided);
    const Signal<T>& w = enc.input_weights(inverse);
    for (std::size_t b = 0; b < st.group_size; ++b)
        for (std::size_t k = 0; k < n; ++k) st.accumulate_input(b, k, inputs[b * n + k], w);
    return st;
}

struct FlaggedSignal {
    std::size_t group = 0;
    std::size_t signal = 0;
    double discrepancy = 0.0;
    std::complex<double> epsilon;  // c_out - c_in
};

enum class CorrectionTrigger { SecondFault, EpochEnd, Immediate, Recompute };

inline std::string_view to_string(CorrectionTrigger t) {
    switch (t) {
        case CorrectionTrigger::SecondFault: return "second_fault";
        case CorrectionTrigger::EpochEnd: return "epoch_end";
        case CorrectionTrigger::Immediate: return "immediate";
        case CorrectionTrigger::Recompute: return "recompute";
    }
    return "immediate";
}

struct CorrectionEvent {
    std::size_t group = 0;
    std::size_t signal = 0;
    std::size_t detected_at_group = 0;
    CorrectionTrigger trigger = CorrectionTrigger::Immediate;
    std::optional<std::size_t> quotient_index;
};

struct DetectionReport {
    Scheme scheme = Scheme::None;
    double delta = 0.0;
    std::size_t groups = 0;
    std::vector<FlaggedSignal> flagged;
    std::vector<std::size_t> corrected;      // global signal indices
    std::vector<std::size_t> unrecoverable;  // group indices
    std::vector<CorrectionEvent> events;
    std::vector<double> discrepancy;  // largest discrepancy seen per signal
    std::size_t recompute_count = 0;
    std::size_t correction_ffts = 0;
    PassCounter passes;

    bool any_unrecoverable() const { return !unrecoverable.empty(); }
    bool is_corrected(std::size_t signal) const {
        return std::find(corrected.begin(), corrected.end(), signal) != corrected.end();
    }
};

namespace detail {

template <class T>
void classify(const ChecksumState<T>& st, const DetectionConfig& cfg, std::size_t group, DetectionReport& rep,
              std::vector<std::size_t>& flagged_local) {
    flagged_local.clear();
    for (std::size_t l = 0; l < st.group_size; ++l) {
        const std::size_t sig = group * st.group_size + l;
        const double rel = relative_discrepancy(st.c_in[l], st.c_out[l], cfg.floor_for(st.l1[l]));
        if (sig < rep.discrepancy.size()) rep.discrepancy[sig] = std::max(rep.discrepancy[sig], rel);
        if (rel > cfg.delta) {
            rep.flagged.push_back({group, sig, rel, st.c_out[l] - st.c_in[l]});
            flagged_local.push_back(l);
        }
    }
}

}  // namespace detail

/// Compares each signal's input-side checksum with e^T y of `outputs` (the
/// group's bs outputs back to back). Fills state.c_out.
template <class T>
DetectionReport detect(ChecksumState<T>& state, std::span<const std::complex<T>> outputs, const EncodingVector<T>& enc,
                       const DetectionConfig& cfg) {
    if (outputs.size() != state.n * state.group_size) throw std::invalid_argument("group length mismatch");
    for (std::size_t l = 0; l < state.group_size; ++l)
        state.c_out[l] = left_checksum(outputs.subspan(l * state.n, state.n), enc, ChecksumSide::Output);
    DetectionReport rep;
    rep.delta = cfg.delta;
    rep.groups = 1;
    rep.discrepancy.assign(state.group_size, 0.0);
    std::vector<std::size_t> flagged;
    detail::classify(state, cfg, 0, rep, flagged);
    if (flagged.size() > 1) rep.unrecoverable.push_back(0);
    return rep;
}

/// Right-side disagreement of a group: u0 = fft(s0) - sum_b y_b, u1 = fft(s1) - sum_b (b+1) y_b.
template <class T>
struct CorrectionVectors {
    Signal<T> u0, u1;
    Signal<T> fs0;
};

template <class T>
CorrectionVectors<T> correction_vectors(const ChecksumState<T>& st, std::span<const std::complex<T>> outputs,
                                        const FftPlan& plan, const TwiddleTable<T>& tw, bool inverse = false) {
    if (!st.two_sided) throw std::invalid_argument("correction needs the right-side checksums");
    CorrectionVectors<T> cv;
    cv.fs0 = fft_execute(plan, tw, std::span<const std::complex<T>>(st.s0), inverse);
    const Signal<T> fs1 = fft_execute(plan, tw, std::span<const std::complex<T>>(st.s1), inverse);
    cv.u0 = cv.fs0;
    cv.u1 = fs1;
    for (std::size_t b = 0; b < st.group_size; ++b)
        for (std::size_t k = 0; k < st.n; ++k) {
            const std::complex<T> y = outputs[b * st.n + k];
            cv.u0[k] -= y;
            cv.u1[k] -= static_cast<T>(b + 1) * y;
        }
    return cv;
}

/// index = round(u1[k*] / u0[k*]) - 1 at the dominant entry of u0. Empty when the
/// entry is below the floor or the quotient is not close to an integer in range.
template <class T>
std::optional<std::size_t> locate_quotient(std::span<const std::complex<T>> u0, std::span<const std::complex<T>> u1,
                                           double abs_floor, std::size_t count) {
    if (u0.size() != u1.size() || u0.empty()) return std::nullopt;
    std::size_t best = 0;
    double best_mag = -1.0;
    for (std::size_t k = 0; k < u0.size(); ++k) {
        const double m = std::abs(widen(u0[k]));
        if (std::isfinite(m) && m > best_mag) {
            best_mag = m;
            best = k;
        }
    }
    if (!(best_mag > abs_floor)) return std::nullopt;
    const std::complex<double> q = widen(u1[best]) / widen(u0[best]);
    if (!std::isfinite(q.real()) || !std::isfinite(q.imag())) return std::nullopt;
    const double nearest = std::round(q.real());
    if (std::abs(q.real() - nearest) > 0.25 || std::abs(q.imag()) > 0.25) return std::nullopt;
    if (nearest < 1.0 || nearest > static_cast<double>(count)) return std::nullopt;
    return static_cast<std::size_t>(nearest) - 1;
}

template <class T>
std::optional<std::size_t> locate_quotient(const Signal<T>& u0, const Signal<T>& u1, double abs_floor,
                                           std::size_t count) {
    return locate_quotient(std::span<const std::complex<T>>(u0), std::span<const std::complex<T>>(u1), abs_floor,
                           count);
}

struct CorrectionOutcome {
    bool ok = false;
    double residual = 0.0;
    std::optional<std::size_t> quotient_index;
};

/// Rebuilds signal `flagged` of the group as fft(s0) - sum_{b != flagged} y_b,
/// which equals y_flagged + u0 without the cancellation of huge corrupted values.
template <class T>
CorrectionOutcome correct_group(const ChecksumState<T>& st, std::span<std::complex<T>> outputs, std::size_t flagged,
                                const FftPlan& plan, const TwiddleTable<T>& tw, const EncodingVector<T>& enc,
                                const DetectionConfig& cfg, bool inverse = false) {
    if (flagged >= st.group_size) throw std::invalid_argument("flagged index out of range");
    if (outputs.size() != st.n * st.group_size) throw std::invalid_argument("group length mismatch");
    CorrectionOutcome out;
    const CorrectionVectors<T> cv = correction_vectors(st, std::span<const std::complex<T>>(outputs), plan, tw, inverse);
    out.quotient_index = locate_quotient(cv.u0, cv.u1, cfg.significance(st.l1[flagged]), st.group_size);

    Signal<T> rebuilt = cv.fs0;
    for (std::size_t b = 0; b < st.group_size; ++b) {
        if (b == flagged) continue;
        for (std::size_t k = 0; k < st.n; ++k) rebuilt[k] -= outputs[b * st.n + k];
    }
    std::copy(rebuilt.begin(), rebuilt.end(), outputs.begin() + static_cast<std::ptrdiff_t>(flagged * st.n));
    const std::complex<double> c_out = left_checksum(std::span<const std::complex<T>>(rebuilt), enc, ChecksumSide::Output);
    out.residual = relative_discrepancy(st.c_in[flagged], c_out, cfg.floor_for(st.l1[flagged]));
    out.ok = out.residual <= cfg.delta;
    if (out.quotient_index && *out.quotient_index != flagged) out.ok = false;
    return out;
}

// ---------------------------------------------------------------------------
// Element level (one radix-r codelet batch)

template <class T>
struct ElementChecksums {
    std::size_t radix = 0;
    std::size_t columns = 0;
    Signal<double> row_in;  // (e^T W) x_c per column
    Signal<T> col_in;   // sum_c x_c
    Signal<T> col_lin;  // sum_c (c+1) x_c, only with linear column weights
    std::vector<double> l1;
};

struct ElementFlag {
    std::size_t column = 0;
    std::optional<std::size_t> row;
    double discrepancy = 0.0;
    std::complex<double> epsilon;
};

struct ElementReport {
    std::vector<ElementFlag> flagged;
    bool corrected = false;
    bool unrecoverable = false;
    double max_discrepancy = 0.0;
};

template <class T>
void element_encode(std::span<const std::complex<T>> x, std::size_t radix, std::size_t columns,
                    const EncodingVector<T>& row_enc, ElementChecksums<T>& out, bool linear_columns = false) {
    if (x.size() != radix * columns || row_enc.size() != radix) throw std::invalid_argument("tile shape mismatch");
    out.radix = radix;
    out.columns = columns;
    out.row_in.assign(columns, {});
    out.col_in.assign(radix, {});
    out.col_lin.assign(linear_columns ? radix : 0, {});
    out.l1.assign(columns, 0.0);
    for (std::size_t c = 0; c < columns; ++c) {
        const std::complex<T>* col = x.data() + c * radix;
        std::complex<double> acc{};
        double l1 = 0.0;
        for (std::size_t e = 0; e < radix; ++e) {
            acc += widen(row_enc.etw[e]) * widen(col[e]);
            out.col_in[e] += col[e];
            if (linear_columns) out.col_lin[e] += static_cast<T>(c + 1) * col[e];
            l1 += static_cast<double>(std::abs(col[e]));
        }
        out.row_in[c] = acc;
        out.l1[c] = l1;
    }
}

/// Row checks flag a column, the column check gives the disagreement vector; a
/// single flagged column is rebuilt as W(X e) - sum of the other columns.
template <class T>
ElementReport element_verify(const ElementChecksums<T>& ck, const Codelet<T>& codelet, std::span<std::complex<T>> y,
                             const EncodingVector<T>& row_enc, const DetectionConfig& cfg) {
    const std::size_t r = ck.radix;
    const std::size_t cols = ck.columns;
    if (y.size() != r * cols || codelet.radix() != r) throw std::invalid_argument("tile shape mismatch");
    ElementReport rep;
    std::vector<std::size_t> flagged;
    std::vector<std::complex<double>> row_disc(cols);
    for (std::size_t c = 0; c < cols; ++c) {
        std::complex<double> out{};
        for (std::size_t v = 0; v < r; ++v) out += widen(row_enc.values[v]) * widen(y[c * r + v]);
        const double rel = relative_discrepancy(ck.row_in[c], out, cfg.floor_for(ck.l1[c]));
        rep.max_discrepancy = std::max(rep.max_discrepancy, rel);
        row_disc[c] = ck.row_in[c] - out;
        if (rel > cfg.delta) {
            flagged.push_back(c);
            rep.flagged.push_back({c, std::nullopt, rel, -row_disc[c]});
        }
    }
    if (flagged.empty()) return rep;
    if (flagged.size() > 1) {
        rep.unrecoverable = true;
        return rep;
    }
    const std::size_t j = flagged.front();
    const double floor = cfg.floor_for(ck.l1[j]);

    std::array<std::complex<T>, kMaxThreadRadix> wxe{};
    codelet.apply(ck.col_in.data(), wxe.data());
    std::array<std::complex<T>, kMaxThreadRadix> d = wxe;
    for (std::size_t c = 0; c < cols; ++c)
        for (std::size_t v = 0; v < r; ++v) d[v] -= y[c * r + v];

    // Row location and the consistency of the two disagreements.
    std::complex<double> col_side{};
    bool finite = true;
    double best = -1.0;
    std::size_t best_row = 0;
    for (std::size_t v = 0; v < r; ++v) {
        const std::complex<double> dv = widen(d[v]);
        finite = finite && std::isfinite(dv.real()) && std::isfinite(dv.imag());
        col_side += widen(row_enc.values[v]) * dv;
        if (std::abs(dv) > best) {
            best = std::abs(dv);
            best_row = v;
        }
    }
    if (finite && best > cfg.significance(ck.l1[j])) rep.flagged.front().row = best_row;
    const std::complex<double> rd = row_disc[j];
    if (finite && std::isfinite(rd.real()) && std::isfinite(rd.imag())) {
        const double scale = std::max({std::abs(rd), std::abs(ck.row_in[j]), floor});
        if (std::abs(rd - col_side) > cfg.delta * scale) {
            rep.unrecoverable = true;
            return rep;
        }
    }
    if (!ck.col_lin.empty() && finite) {
        std::array<std::complex<T>, kMaxThreadRadix> wxl{};
        codelet.apply(ck.col_lin.data(), wxl.data());
        Signal<T> u0(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(r));
        Signal<T> u1(r);
        for (std::size_t v = 0; v < r; ++v) {
            u1[v] = wxl[v];
            for (std::size_t c = 0; c < cols; ++c) u1[v] -= static_cast<T>(c + 1) * y[c * r + v];
        }
        const auto q = locate_quotient(u0, u1, cfg.significance(ck.l1[j]), cols);
        if (q && *q != j) {
            rep.unrecoverable = true;
            return rep;
        }
    }

    std::array<std::complex<T>, kMaxThreadRadix> rebuilt = wxe;
    for (std::size_t c = 0; c < cols; ++c) {
        if (c == j) continue;
        for (std::size_t v = 0; v < r; ++v) rebuilt[v] -= y[c * r + v];
    }
    std::complex<double> out{};
    for (std::size_t v = 0; v < r; ++v) out += widen(row_enc.values[v]) * widen(rebuilt[v]);
    if (relative_discrepancy(ck.row_in[j], out, floor) > cfg.delta) {
        rep.unrecoverable = true;
        return rep;
    }
    for (std::size_t v = 0; v < r; ++v) y[j * r + v] = rebuilt[v];
    rep.corrected = true;
    return rep;
}

template <class T>
struct ElementResult {
    Signal<T> y;  // r x columns, column-major
    ElementReport report;
};

/// Y = W_r X for an r x columns tile, protected by row checksums (enc_row) and a
/// unit (Ones) or unit+linear (Linear) column combination. `fault` may corrupt Y
/// between the compute and the checks. With Jou row weights the tile is
/// transformed on the variant input and the result divided back out.
template <class T>
ElementResult<T> two_sided_element(std::size_t r, std::span<const std::complex<T>> x, std::size_t columns,
                                   EncodingKind enc_row, EncodingKind enc_col, const DetectionConfig& cfg,
                                   const std::function<void(std::span<std::complex<T>>)>& fault = {}) {
    if (!is_power_of_two(r) || r < 2 || r > kMaxThreadRadix) throw std::invalid_argument("radix must be 2..32");
    if (enc_col != EncodingKind::Ones && enc_col != EncodingKind::Linear)
        throw std::invalid_argument("column encoding must be ones or linear");
    if (x.size() != r * columns) throw std::invalid_argument("tile shape mismatch");
    if (!all_finite(x)) throw std::invalid_argument("tile must be finite before injection");
    const EncodingVector<T> enc = make_encoding<T>(enc_row, r);
    const Codelet<T> codelet(r);

    Signal<T> xin(x.begin(), x.end());
    if (enc.requires_variant_input)
        for (std::size_t c = 0; c < columns; ++c) {
            const Signal<T> v = jou_variant_input(std::span<const std::complex<T>>(xin.data() + c * r, r));
            std::copy(v.begin(), v.end(), xin.begin() + static_cast<std::ptrdiff_t>(c * r));
        }

    ElementChecksums<T> ck;
    element_encode(std::span<const std::complex<T>>(xin), r, columns, enc, ck, enc_col == EncodingKind::Linear);
    ElementResult<T> res;
    res.y.resize(r * columns);
    for (std::size_t c = 0; c < columns; ++c) codelet.apply(xin.data() + c * r, res.y.data() + c * r);
    if (fault) fault(res.y);
    res.report = element_verify(ck, codelet, std::span<std::complex<T>>(res.y), enc, cfg);

    if (enc.requires_variant_input)
        for (std::size_t v = 0; v < r; ++v) {
            const double a = 2.0 * std::numbers::pi * static_cast<double>(v) / static_cast<double>(r);
            const std::complex<T> div(static_cast<T>(2.0 + std::cos(a)), static_cast<T>(std::sin(a)));
            for (std::size_t c = 0; c < columns; ++c) res.y[c * r + v] /= div;
        }
    return res;
}

// ---------------------------------------------------------------------------
// Fused guards

namespace detail {

/// Encodes inputs while stage 0 loads them and outputs while the last stage
/// stores them; no extra sweeps over the buffer.
template <class T>
class GroupGuard {
public:
    static constexpr bool watches_passes = true;
    static constexpr bool watches_substeps = false;

    GroupGuard(const FftPlan& plan, std::size_t count, std::size_t bs, const EncodingVector<T>& enc, bool two_sided,
               bool inverse)
        : bs_(bs), last_stage_(plan.stages.size() - 1), enc_(enc), etw_(enc.input_weights(inverse)) {
        for (std::size_t g = 0; g < count / bs; ++g) states_.emplace_back(plan.n, bs, two_sided);
    }

    void on_load(std::size_t stage, std::size_t sig, std::size_t idx, const std::complex<T>& v) {
        if (stage != 0) return;
        states_[sig / bs_].accumulate_input(sig % bs_, idx, v, etw_);
    }
    void on_store(std::size_t stage, std::size_t sig, std::size_t idx, const std::complex<T>& v) {
        if (stage != last_stage_) return;
        states_[sig / bs_].accumulate_output(sig % bs_, idx, v, enc_.values);
    }
    void encode_substep(const SubstepView<T>&) {}
    void verify_substep(SubstepView<T>&) {}

    std::vector<ChecksumState<T>>& states() { return states_; }

private:
    std::size_t bs_;
    std::size_t last_stage_;
    const EncodingVector<T>& enc_;
    const Signal<T>& etw_;
    std::vector<ChecksumState<T>> states_;
};

template <class T>
class ElementGuard {
public:
    static constexpr bool watches_passes = false;
    static constexpr bool watches_substeps = true;

    ElementGuard(EncodingKind kind, const DetectionConfig& cfg, DetectionReport& rep, std::size_t bs)
        : cfg_(cfg), rep_(rep), bs_(bs) {
        for (std::size_t r = 2; r <= kMaxThreadRadix; r *= 2) encodings_.push_back(&shared_encoding<T>(kind, r));
    }

    void on_load(std::size_t, std::size_t, std::size_t, const std::complex<T>&) {}
    void on_store(std::size_t, std::size_t, std::size_t, const std::complex<T>&) {}

    void encode_substep(const SubstepView<T>& v) {
        element_encode(std::span<const std::complex<T>>(v.x), v.radix, v.columns, encoding(v.radix), ck_);
    }

    void verify_substep(SubstepView<T>& v) {
        const ElementReport er = element_verify(ck_, *v.codelet, v.y, encoding(v.radix), cfg_);
        double& d = rep_.discrepancy[v.signal];
        d = std::max(d, er.max_discrepancy);
        if (er.flagged.empty()) return;
        const std::size_t group = v.signal / bs_;
        for (const auto& f : er.flagged) rep_.flagged.push_back({group, v.signal, f.discrepancy, f.epsilon});
        if (er.unrecoverable) {
            if (rep_.unrecoverable.empty() || rep_.unrecoverable.back() != group) rep_.unrecoverable.push_back(group);
        } else if (er.corrected) {
            if (!rep_.is_corrected(v.signal)) rep_.corrected.push_back(v.signal);
            rep_.events.push_back({group, v.signal, group, CorrectionTrigger::Immediate, std::nullopt});
        }
    }

private:
    const EncodingVector<T>& encoding(std::size_t r) const { return *encodings_[log2_exact(r) - 1]; }

    DetectionConfig cfg_;
    DetectionReport& rep_;
    std::size_t bs_;
    std::vector<const EncodingVector<T>*> encodings_;
    ElementChecksums<T> ck_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Protected execution

struct ProtectionConfig {
    Scheme scheme = Scheme::TwoSidedGroup;
    DetectionConfig detection;
    EncodingKind encoding = EncodingKind::Wang;
    std::size_t group_size = 0;  // 0: use plan.bs
};

template <class T>
struct ProtectedRun {
    SignalBatch<T> output;
    DetectionReport report;
};

/// Output of the fused pass of a group scheme, before any threshold is applied.
template <class T>
struct EncodedRun {
    SignalBatch<T> output;
    std::vector<ChecksumState<T>> states;
    PassCounter passes;
    std::size_t group_size = 0;
};

namespace detail {

inline std::size_t resolve_group_size(const FftPlan& plan, std::size_t count, std::size_t override_bs) {
    const std::size_t bs = override_bs ? override_bs : plan.bs;
    if (bs == 0 || count % bs != 0) throw std::invalid_argument("batch size must be divisible by the group size");
    return bs;
}

inline void mark_unrecoverable(DetectionReport& rep, std::size_t group) {
    if (std::find(rep.unrecoverable.begin(), rep.unrecoverable.end(), group) == rep.unrecoverable.end())
        rep.unrecoverable.push_back(group);
}

template <class T, class Guard, class Injector>
void run_fused(const FftPlan& plan, const TwiddleTable<T>& tw, std::span<const std::complex<T>> in,
               std::span<std::complex<T>> out, bool inverse, PassCounter& counter, Guard& guard, Injector* injector) {
    if (injector) {
        execute(plan, tw, in, out, inverse, counter, guard, *injector);
    } else {
        NoInjection<T> none;
        execute(plan, tw, in, out, inverse, counter, guard, none);
    }
}

}  // namespace detail

/// Runs the transform with the group checksums fused into the first load pass
/// and the last store pass.
template <class T, class Injector = NoInjection<T>>
EncodedRun<T> run_group_encoded(const FftPlan& plan, const TwiddleTable<T>& tw, const SignalBatch<T>& batch,
                                const EncodingVector<T>& enc, std::size_t group_size, bool two_sided,
                                bool inverse = false, Injector* injector = nullptr) {
    if (batch.n() != plan.n || enc.size() != plan.n) throw std::invalid_argument("plan/input size mismatch");
    const std::size_t bs = detail::resolve_group_size(plan, batch.count(), group_size);
    EncodedRun<T> run{SignalBatch<T>(batch.n(), batch.count()), {}, {}, bs};
    detail::GroupGuard<T> guard(plan, batch.count(), bs, enc, two_sided, inverse);
    detail::run_fused(plan, tw, batch.data(), run.output.data(), inverse, run.passes, guard, injector);
    run.states = std::move(guard.states());
    return run;
}

/// One-sided resolution: every flagged signal is recomputed from its input.
template <class T>
void resolve_one_sided(EncodedRun<T>& run, const SignalBatch<T>& input, const EncodingVector<T>& enc,
                       const DetectionConfig& cfg, const FftPlan& plan, const TwiddleTable<T>& tw, bool inverse,
                       DetectionReport& rep) {
    const std::size_t bs = run.group_size;
    std::vector<std::size_t> flagged;
    for (std::size_t grp = 0; grp < run.states.size(); ++grp) {
        const ChecksumState<T>& st = run.states[grp];
        detail::classify(st, cfg, grp, rep, flagged);
        for (std::size_t l : flagged) {
            const std::size_t sig = grp * bs + l;
            // Out-of-place execution leaves the input intact; it is the saved state.
            const Signal<T> redo = fft_execute(plan, tw, input.signal(sig), inverse);
            ++rep.recompute_count;
            std::copy(redo.begin(), redo.end(), run.output.signal(sig).begin());
            const std::complex<double> c_out = left_checksum(std::span<const std::complex<T>>(redo), enc, ChecksumSide::Output);
            const double resid = relative_discrepancy(st.c_in[l], c_out, cfg.floor_for(st.l1[l]));
            if (resid <= cfg.delta) {
                rep.corrected.push_back(sig);
                rep.events.push_back({grp, sig, grp, CorrectionTrigger::Recompute, std::nullopt});
            } else {
                detail::mark_unrecoverable(rep, grp);
            }
        }
    }
}

/// Two-sided resolution with delayed correction: groups are checked in order, a
/// detected fault stays pending and is repaired when the next fault shows up or
/// after the last group.
template <class T>
void resolve_two_sided(EncodedRun<T>& run, const EncodingVector<T>& enc, const DetectionConfig& cfg,
                       const FftPlan& plan, const TwiddleTable<T>& tw, bool inverse, DetectionReport& rep) {
    const std::size_t bs = run.group_size;
    const std::size_t n = plan.n;
    const std::size_t groups = run.states.size();
    std::optional<std::size_t> pending_group;

    auto correct = [&](std::size_t grp, std::size_t now, CorrectionTrigger trig) {
        ChecksumState<T>& st = run.states[grp];
        const std::size_t local = st.pending->signal_idx;
        auto out = run.output.data().subspan(grp * bs * n, bs * n);
        const CorrectionOutcome oc = correct_group(st, out, local, plan, tw, enc, cfg, inverse);
        rep.correction_ffts += 2;
        st.pending.reset();
        if (oc.ok) {
            rep.corrected.push_back(grp * bs + local);
            rep.events.push_back({grp, grp * bs + local, now, trig, oc.quotient_index});
        } else {
            detail::mark_unrecoverable(rep, grp);
        }
    };

    std::vector<std::size_t> flagged;
    for (std::size_t grp = 0; grp < groups; ++grp) {
        ChecksumState<T>& st = run.states[grp];
        detail::classify(st, cfg, grp, rep, flagged);
        if (flagged.size() > 1) {
            detail::mark_unrecoverable(rep, grp);
            continue;
        }
        if (flagged.size() == 1) {
            if (pending_group) correct(*pending_group, grp, CorrectionTrigger::SecondFault);
            st.pending = PendingFault{flagged.front(), rep.flagged.back().epsilon};
            pending_group = grp;
        }
    }
    if (pending_group) correct(*pending_group, groups, CorrectionTrigger::EpochEnd);
    std::sort(rep.unrecoverable.begin(), rep.unrecoverable.end());
}

inline DetectionReport make_report(Scheme scheme, const DetectionConfig& cfg, std::size_t groups, std::size_t count) {
    DetectionReport rep;
    rep.scheme = scheme;
    rep.delta = cfg.delta;
    rep.groups = groups;
    rep.discrepancy.assign(count, 0.0);
    return rep;
}

template <class T, class Injector = NoInjection<T>>
ProtectedRun<T> run_protected(const FftPlan& plan, const TwiddleTable<T>& tw, const SignalBatch<T>& batch,
                              const ProtectionConfig& cfg, bool inverse = false, Injector* injector = nullptr) {
    if (batch.n() != plan.n) throw std::invalid_argument("plan/input size mismatch");
    const std::size_t bs = detail::resolve_group_size(plan, batch.count(), cfg.group_size);
    if (cfg.encoding == EncodingKind::Jou && cfg.scheme != Scheme::None)
        throw std::invalid_argument("jou encoding is only supported by two_sided_element");

    DetectionReport rep = make_report(cfg.scheme, cfg.detection, batch.count() / bs, batch.count());
    switch (cfg.scheme) {
        case Scheme::None: {
            SignalBatch<T> out(batch.n(), batch.count());
            NullGuard<T> g;
            detail::run_fused(plan, tw, batch.data(), out.data(), inverse, rep.passes, g, injector);
            return {std::move(out), std::move(rep)};
        }
        case Scheme::TwoSidedThread: {
            SignalBatch<T> out(batch.n(), batch.count());
            detail::ElementGuard<T> g(cfg.encoding, cfg.detection, rep, bs);
            detail::run_fused(plan, tw, batch.data(), out.data(), inverse, rep.passes, g, injector);
            return {std::move(out), std::move(rep)};
        }
        case Scheme::OneSided:
        case Scheme::TwoSidedGroup: {
            const EncodingVector<T>& enc = shared_encoding<T>(cfg.encoding, plan.n);
            const bool two = cfg.scheme == Scheme::TwoSidedGroup;
            EncodedRun<T> run = run_group_encoded(plan, tw, batch, enc, bs, two, inverse, injector);
            rep.passes = run.passes;
            if (two)
                resolve_two_sided(run, enc, cfg.detection, plan, tw, inverse, rep);
            else
                resolve_one_sided(run, batch, enc, cfg.detection, plan, tw, inverse, rep);
            return {std::move(run.output), std::move(rep)};
        }
    }
    throw std::logic_error("unhandled scheme");
}

/// {scheme, delta, groups, flagged:[{group, signal, discrepancy}], corrected,
///  unrecoverable, recompute_count, pass_count}. Non-finite discrepancies are null.
inline nlohmann::json report_to_json(const DetectionReport& rep) {
    using nlohmann::json;
    json flagged = json::array();
    for (const auto& f : rep.flagged) {
        json d = std::isfinite(f.discrepancy) ? json(f.discrepancy) : json(nullptr);
        flagged.push_back({{"group", f.group}, {"signal", f.signal}, {"discrepancy", d}});
    }
    return {{"scheme", std::string(to_string(rep.scheme))},
            {"delta", rep.delta},
            {"groups", rep.groups},
            {"flagged", std::move(flagged)},
            {"corrected", rep.corrected},
            {"unrecoverable", rep.unrecoverable},
            {"recompute_count", rep.recompute_count},
            {"pass_count", rep.passes.total()}};
}

}  // namespace ftfft
