#include <gtest/gtest.h>

#include <array>

#include "ftfft/fft.hpp"
#include "ftfft/planner.hpp"
#include "test_support.hpp"

using namespace ftfft;

namespace {

PlanParams params(std::array<std::size_t, 3> dims, std::array<std::size_t, 3> radices, std::size_t bs) {
    PlanParams p;
    p.dims = dims;
    p.radices = radices;
    p.bs = bs;
    return p;
}

/// Runs a descriptor's op list on one tile, independently of Codelet.
testing_support::CVec<double> interpret(const std::vector<KernelOp>& ops, std::size_t radix,
                                        const testing_support::CVec<double>& in) {
    testing_support::CVec<double> reg(radix), out(radix);
    for (const auto& op : ops) {
        switch (op.kind) {
            case OpKind::Load: reg[op.reg] = in[op.index]; break;
            case OpKind::Butterfly: {
                const double a = -2.0 * std::numbers::pi * static_cast<double>(op.twiddle) / static_cast<double>(radix);
                const auto t = reg[op.b] * std::complex<double>(std::cos(a), std::sin(a));
                reg[op.b] = reg[op.a] - t;
                reg[op.a] += t;
                break;
            }
            case OpKind::Checksum: break;
            case OpKind::Store: out[op.index] = reg[op.reg]; break;
        }
    }
    return out;
}

}  // namespace

TEST(Planner, TableRows) {
    EXPECT_EQ(select_parameters(1 << 10, 1), params({1024, 0, 0}, {8, 0, 0}, 1));
    EXPECT_EQ(select_parameters(1 << 17, 8), params({256, 512, 0}, {16, 16, 0}, 8));
    EXPECT_EQ(select_parameters(1 << 23, 16), params({256, 128, 256}, {16, 16, 16}, 16));
    EXPECT_EQ(select_parameters(1 << 17, 0).bs, 8u);
}

TEST(Planner, MakePlanReproducesTable) {
    const FftPlan p10 = make_plan(1 << 10, Precision::FP32);
    ASSERT_EQ(p10.stages.size(), 1u);
    EXPECT_EQ(p10.stages[0].dim, 1024u);
    EXPECT_EQ(p10.stages[0].thread_radix, 8u);
    EXPECT_EQ(p10.bs, 1u);

    const FftPlan p17 = make_plan(1 << 17, Precision::FP32);
    ASSERT_EQ(p17.stages.size(), 2u);
    EXPECT_EQ(p17.stages[0].dim, 256u);
    EXPECT_EQ(p17.stages[1].dim, 512u);
    EXPECT_EQ(p17.bs, 8u);

    const FftPlan p23 = make_plan(1 << 23, Precision::FP64);
    ASSERT_EQ(p23.stages.size(), 3u);
    EXPECT_EQ(p23.stages[0].dim, 256u);
    EXPECT_EQ(p23.stages[1].dim, 128u);
    EXPECT_EQ(p23.stages[2].dim, 256u);
    for (const auto& s : p23.stages) EXPECT_EQ(s.thread_radix, 16u);
    EXPECT_EQ(p23.bs, 16u);
}

TEST(Planner, FallbackSingleStage) {
    EXPECT_EQ(select_parameters(1 << 12, 4), params({4096, 0, 0}, {16, 0, 0}, 4));
    EXPECT_EQ(select_parameters(8, 3).radices[0], 8u);
    EXPECT_EQ(select_parameters(8, 3).bs, 3u);
    EXPECT_EQ(select_parameters(1 << 12, 100).bs, 10u);  // largest divisor of 100 up to 16
}

TEST(Planner, TableGroupSizeFollowsBatch) {
    EXPECT_EQ(select_parameters(1 << 17, 1).bs, 1u);
    EXPECT_EQ(select_parameters(1 << 17, 12).bs, 6u);
    EXPECT_EQ(select_parameters(1 << 17, 64).bs, 8u);
}

TEST(Planner, StageCountRuleAndClosure) {
    for (unsigned e = 1; e <= 29; ++e) {
        const std::size_t n = std::size_t{1} << e;
        const PlanParams p = select_parameters(n, 0);
        const std::size_t want = e <= 13 ? 1 : (e <= 22 ? 2 : 3);
        EXPECT_EQ(p.stage_count(), want) << e;
        EXPECT_EQ(p.size(), n) << e;
        for (std::size_t k = 0; k < p.stage_count(); ++k) {
            EXPECT_LE(p.dims[k], kDefaultMaxTile) << e;
            EXPECT_EQ(p.dims[k] % p.radices[k], 0u) << e;
            EXPECT_TRUE(p.radices[k] >= 2 && p.radices[k] <= 32 && is_power_of_two(p.radices[k])) << e;
            if (k > 0) {
                EXPECT_GE(p.dims[k], p.dims[k - 1] / 2) << e;
            }
        }
    }
}

TEST(Planner, BalancedSplitKeepsLaterStagesNoSmaller) {
    const PlanParams p = select_parameters(1 << 15, 0);
    EXPECT_EQ(p.dims[0], 128u);
    EXPECT_EQ(p.dims[1], 256u);
    const PlanParams q = select_parameters(std::size_t{1} << 29, 0);
    EXPECT_EQ(q.dims[0], 512u);
    EXPECT_EQ(q.dims[1], 1024u);
    EXPECT_EQ(q.dims[2], 1024u);
}

TEST(Planner, MaxTileForcesMoreStages) {
    EXPECT_EQ(select_parameters(1 << 10, 0, 32).stage_count(), 2u);
    EXPECT_EQ(select_parameters(1 << 12, 0, 16).stage_count(), 3u);
    EXPECT_THROW(select_parameters(1 << 13, 0, 16), std::invalid_argument);
}

TEST(Planner, InvalidSizes) {
    try {
        select_parameters(1000, 1);
        FAIL() << "expected throw";
    } catch (const std::invalid_argument& e) {
        EXPECT_STREQ(e.what(), "size must be a power of two");
    }
    EXPECT_THROW(select_parameters(1, 1), std::invalid_argument);
    EXPECT_THROW(select_parameters(std::size_t{1} << 30, 1), std::invalid_argument);
    EXPECT_THROW(select_parameters(0, 1), std::invalid_argument);
}

TEST(Descriptor, MinimalTile) {
    const auto ops = unroll_tile(2);
    ASSERT_EQ(ops.size(), 5u);
    EXPECT_EQ(ops[0].kind, OpKind::Load);
    EXPECT_EQ(ops[1].kind, OpKind::Load);
    EXPECT_EQ(ops[2].kind, OpKind::Butterfly);
    EXPECT_EQ(ops[3].kind, OpKind::Store);
    EXPECT_EQ(ops[4].kind, OpKind::Store);
}

TEST(Descriptor, TwoSidedChecksumPlacement) {
    const auto ops = unroll_tile(4, FtMode::TwoSided);
    std::vector<std::size_t> at;
    for (std::size_t i = 0; i < ops.size(); ++i)
        if (ops[i].kind == OpKind::Checksum) at.push_back(i);
    ASSERT_EQ(at.size(), 2u);
    EXPECT_EQ(ops[at[0] - 1].kind, OpKind::Load);
    EXPECT_EQ(ops[at[0] + 1].kind, OpKind::Butterfly);
    EXPECT_EQ(ops[at[1] - 1].kind, OpKind::Butterfly);
    EXPECT_EQ(ops[at[1] + 1].kind, OpKind::Store);
    EXPECT_EQ(ops[at[0]].phase, 0);
    EXPECT_EQ(ops[at[1]].phase, 1);
}

TEST(Descriptor, ButterflyCountAndExecution) {
    for (std::size_t r = 2; r <= 32; r *= 2) {
        for (auto mode : {FtMode::None, FtMode::OneSided, FtMode::TwoSided}) {
            const auto ops = unroll_tile(r, mode);
            const auto bf = std::count_if(ops.begin(), ops.end(), [](const KernelOp& o) { return o.kind == OpKind::Butterfly; });
            EXPECT_EQ(static_cast<std::size_t>(bf), r * log2_exact(r) / 2);
            const auto x = testing_support::random_signal<double>(r, r);
            EXPECT_LE(testing_support::rel_l2(interpret(ops, r, x), testing_support::naive_dft(x)), 1e-14) << r;
        }
    }
    EXPECT_THROW(unroll_tile(64), std::invalid_argument);
    EXPECT_THROW(unroll_tile(6), std::invalid_argument);
}

TEST(Descriptor, RenderingIsStableAndSorted) {
    const auto d = emit_descriptor(select_parameters(1 << 17, 8), FtMode::TwoSided);
    const std::string a = render_descriptor(d);
    EXPECT_EQ(a, render_descriptor(emit_descriptor(select_parameters(1 << 17, 8), FtMode::TwoSided)));
    const auto j = nlohmann::json::parse(a);
    EXPECT_EQ(j["n"], 131072);
    EXPECT_EQ(j["stages"][0]["dim"], 256);
    EXPECT_EQ(j["stages"][1]["dim"], 512);
    EXPECT_EQ(j["ft_mode"], "two_sided");
    // Top-level keys appear alphabetically in the text.
    EXPECT_LT(a.find("\"bs\""), a.find("\"ft_mode\""));
    EXPECT_LT(a.find("\"ft_mode\""), a.find("\"n\""));
    EXPECT_LT(a.find("\"n\""), a.find("\"ops\""));
    EXPECT_LT(a.find("\"ops\""), a.find("\"stages\""));
}

TEST(Descriptor, RejectsBadParams) {
    EXPECT_THROW(emit_descriptor(PlanParams{}, FtMode::None), std::invalid_argument);
    EXPECT_THROW(emit_descriptor(params({24, 0, 0}, {16, 0, 0}, 1), FtMode::None), std::invalid_argument);
}

TEST(Planner, FtModeStrings) {
    EXPECT_EQ(parse_ft_mode("two_sided"), FtMode::TwoSided);
    EXPECT_EQ(parse_ft_mode("one-sided"), FtMode::OneSided);
    EXPECT_THROW(parse_ft_mode("three_sided"), std::invalid_argument);
}
