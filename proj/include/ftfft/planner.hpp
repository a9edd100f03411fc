#pragma once

// Parameter selection and kernel-descriptor emission. A descriptor is the
// interpretable form of one generated kernel: the seven launch parameters plus
// the fully unrolled op list of a thread-radix tile.

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ftfft/signal.hpp"

namespace ftfft {

inline constexpr std::size_t kDefaultMaxTile = std::size_t{1} << 13;
inline constexpr std::size_t kMinPlanSize = 2;
inline constexpr std::size_t kMaxPlanSize = std::size_t{1} << 29;
inline constexpr std::size_t kFallbackRadix = 16;
inline constexpr std::size_t kMaxGroupSize = 16;

enum class FtMode { None, OneSided, TwoSided };

inline std::string_view to_string(FtMode m) {
    switch (m) {
        case FtMode::None: return "none";
        case FtMode::OneSided: return "one_sided";
        case FtMode::TwoSided: return "two_sided";
    }
    return "none";
}

inline FtMode parse_ft_mode(std::string_view s) {
    if (s == "none") return FtMode::None;
    if (s == "one_sided" || s == "one-sided") return FtMode::OneSided;
    if (s == "two_sided" || s == "two-sided") return FtMode::TwoSided;
    throw std::invalid_argument("unknown ft mode '" + std::string(s) + "'");
}

/// Kernel launch parameters. Unused stages carry dim 0 and radix 0.
struct PlanParams {
    std::array<std::size_t, 3> dims{};
    std::array<std::size_t, 3> radices{};
    std::size_t bs = 1;

    std::size_t stage_count() const {
        return static_cast<std::size_t>(std::count_if(dims.begin(), dims.end(), [](std::size_t d) { return d != 0; }));
    }
    std::size_t size() const {
        std::size_t n = 1;
        for (std::size_t k = 0; k < stage_count(); ++k) n *= dims[k];
        return n;
    }

    friend bool operator==(const PlanParams&, const PlanParams&) = default;
};

inline void validate_size(std::size_t n) {
    if (!is_power_of_two(n)) throw std::invalid_argument("size must be a power of two");
    if (n < kMinPlanSize || n > kMaxPlanSize) throw std::invalid_argument("size out of range (2..2^29)");
}

/// Number of kernel launches for a size class: 1 up to 2^13, 2 up to 2^22, 3 beyond.
constexpr std::size_t size_class_stages(std::size_t n) {
    if (n <= (std::size_t{1} << 13)) return 1;
    if (n <= (std::size_t{1} << 22)) return 2;
    return 3;
}

namespace detail {

struct TableRow {
    unsigned log2n;
    PlanParams params;
};

// Measured kernel setups (T4).
inline const std::array<TableRow, 3>& kernel_table() {
    static const std::array<TableRow, 3> rows{{
        {10, PlanParams{{1u << 10, 0, 0}, {8, 0, 0}, 1}},
        {17, PlanParams{{1u << 8, 1u << 9, 0}, {16, 16, 0}, 8}},
        {23, PlanParams{{1u << 8, 1u << 7, 1u << 8}, {16, 16, 16}, 16}},
    }};
    return rows;
}

inline std::size_t largest_divisor_at_most(std::size_t batch, std::size_t cap) {
    for (std::size_t d = std::min(batch, cap); d > 1; --d)
        if (batch % d == 0) return d;
    return 1;
}

}  // namespace detail

/// Picks stage dims, thread radices and group size for a transform of size n.
/// batch == 0 means "not known": the table group size is kept and the fallback uses 1.
/// A known batch the table group size does not divide gets its largest divisor below it.
inline PlanParams select_parameters(std::size_t n, std::size_t batch, std::size_t max_tile = kDefaultMaxTile) {
    validate_size(n);
    if (!is_power_of_two(max_tile) || max_tile < 2) throw std::invalid_argument("max_tile must be a power of two >= 2");

    const unsigned e = log2_exact(n);
    const unsigned tile_e = log2_exact(max_tile);
    std::size_t stages = size_class_stages(n);
    stages = std::max<std::size_t>(stages, (e + tile_e - 1) / tile_e);
    if (stages > 3) throw std::invalid_argument("size needs more than three stages for this max_tile");

    for (const auto& row : detail::kernel_table()) {
        if (row.log2n != e || row.params.stage_count() != stages) continue;
        const auto& dims = row.params.dims;
        if (!std::all_of(dims.begin(), dims.end(), [&](std::size_t d) { return d <= max_tile; })) continue;
        PlanParams p = row.params;
        if (batch != 0 && batch % p.bs != 0) p.bs = detail::largest_divisor_at_most(batch, p.bs);
        return p;
    }

    // Balanced split: exponents as even as possible, later stages no smaller.
    PlanParams p;
    const unsigned base = e / static_cast<unsigned>(stages);
    const unsigned extra = e % static_cast<unsigned>(stages);
    for (std::size_t k = 0; k < stages; ++k) {
        const unsigned ek = base + (k >= stages - extra ? 1u : 0u);
        p.dims[k] = std::size_t{1} << ek;
        p.radices[k] = std::min(kFallbackRadix, p.dims[k]);
    }
    const std::size_t clamped = std::clamp<std::size_t>(batch, 1, kMaxGroupSize);
    p.bs = batch == 0 ? 1 : detail::largest_divisor_at_most(batch, clamped);
    return p;
}

// ---------------------------------------------------------------------------
// Unrolled tile ops

enum class OpKind { Load, Butterfly, Checksum, Store };

/// One entry of an unrolled tile kernel.
///  Load:      reg <- in[index]
///  Butterfly: t = reg[b] * w^twiddle; reg[b] = reg[a] - t; reg[a] += t  (w = e^{-2 pi i / radix})
///  Checksum:  phase 0 accumulates input checksums, phase 1 output checksums
///  Store:     out[index] <- reg
struct KernelOp {
    OpKind kind = OpKind::Load;
    std::size_t reg = 0;
    std::size_t index = 0;
    std::size_t a = 0;
    std::size_t b = 0;
    std::size_t twiddle = 0;
    int phase = 0;

    friend bool operator==(const KernelOp&, const KernelOp&) = default;
};

inline std::size_t bit_reverse(std::size_t v, unsigned bits) {
    std::size_t r = 0;
    for (unsigned i = 0; i < bits; ++i) {
        r = (r << 1) | (v & 1);
        v >>= 1;
    }
    return r;
}

/// Radix-2 decimation-in-time unrolling of a radix-point DFT. Loads are
/// bit-reversed so stores come out in natural order.
inline std::vector<KernelOp> unroll_tile(std::size_t radix, FtMode mode = FtMode::None) {
    if (!is_power_of_two(radix) || radix < 2 || radix > 32)
        throw std::invalid_argument("thread radix must be one of 2, 4, 8, 16, 32");
    const unsigned bits = log2_exact(radix);
    std::vector<KernelOp> ops;
    for (std::size_t i = 0; i < radix; ++i) ops.push_back({OpKind::Load, i, bit_reverse(i, bits)});
    if (mode != FtMode::None) ops.push_back({.kind = OpKind::Checksum, .phase = 0});
    for (std::size_t size = 2; size <= radix; size *= 2) {
        const std::size_t half = size / 2;
        for (std::size_t start = 0; start < radix; start += size)
            for (std::size_t k = 0; k < half; ++k)
                ops.push_back({.kind = OpKind::Butterfly,
                               .a = start + k,
                               .b = start + k + half,
                               .twiddle = k * (radix / size)});
    }
    if (mode != FtMode::None) ops.push_back({.kind = OpKind::Checksum, .phase = 1});
    for (std::size_t i = 0; i < radix; ++i) ops.push_back({OpKind::Store, i, i});
    return ops;
}

struct KernelDescriptor {
    PlanParams params;
    std::vector<KernelOp> unrolled_ops;  // tile of radix params.radices[0]
    FtMode ft_mode = FtMode::None;
};

inline KernelDescriptor emit_descriptor(const PlanParams& params, FtMode mode) {
    if (params.stage_count() == 0) throw std::invalid_argument("descriptor needs at least one stage");
    for (std::size_t k = 0; k < params.stage_count(); ++k)
        if (params.radices[k] == 0 || params.dims[k] % params.radices[k] != 0)
            throw std::invalid_argument("radix must divide its stage dim");
    return {params, unroll_tile(params.radices[0], mode), mode};
}

inline nlohmann::json op_to_json(const KernelOp& op, FtMode mode) {
    using nlohmann::json;
    switch (op.kind) {
        case OpKind::Load: return json{{"kind", "load"}, {"reg", op.reg}, {"src", op.index}};
        case OpKind::Store: return json{{"kind", "store"}, {"reg", op.reg}, {"dst", op.index}};
        case OpKind::Butterfly:
            return json{{"kind", "butterfly"}, {"a", op.a}, {"b", op.b}, {"twiddle", op.twiddle}};
        case OpKind::Checksum:
            return json{{"kind", "checksum"},
                        {"phase", op.phase == 0 ? "input" : "output"},
                        {"encode", mode == FtMode::TwoSided ? "left_right" : "left"}};
    }
    return {};
}

/// {bs, ft_mode, n, ops, stages}. nlohmann's default object keeps keys sorted,
/// so the rendering is byte-stable.
inline nlohmann::json descriptor_to_json(const KernelDescriptor& d) {
    nlohmann::json stages = nlohmann::json::array();
    for (std::size_t k = 0; k < d.params.stage_count(); ++k)
        stages.push_back({{"dim", d.params.dims[k]}, {"radix", d.params.radices[k]}});
    nlohmann::json ops = nlohmann::json::array();
    for (const auto& op : d.unrolled_ops) ops.push_back(op_to_json(op, d.ft_mode));
    return {{"n", d.params.size()},
            {"stages", std::move(stages)},
            {"bs", d.params.bs},
            {"ft_mode", std::string(to_string(d.ft_mode))},
            {"ops", std::move(ops)}};
}

inline std::string render_descriptor(const KernelDescriptor& d) { return descriptor_to_json(d).dump(2) + "\n"; }

}  // namespace ftfft
