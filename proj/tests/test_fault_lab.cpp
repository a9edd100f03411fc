#include <gtest/gtest.h>

#include <bit>
#include <cstdint>

#include "ftfft/fault_lab.hpp"
#include "test_support.hpp"

using namespace ftfft;

namespace {

CampaignConfig small_campaign() {
    CampaignConfig c;
    c.runs = 120;
    c.n = 64;
    c.batch = 4;
    c.calibration_batches = 20;
    c.bits = BitRange{20, 29};
    c.delta_grid = {1e-14, 1e-9, 1e-7, 1e-5, 1e-3, 1e-1, 1e300};
    c.seed = 5;
    return c;
}

}  // namespace

TEST(FlipBit, SignAndExponentExamples) {
    EXPECT_EQ(flip_bit(1.0f, 31), -1.0f);
    EXPECT_EQ(flip_bit(1.0f, 23), 0.5f);
    EXPECT_EQ(flip_bit(1.0, 63), -1.0);
    EXPECT_EQ(flip_bit(1.0, 52), 0.5);
    EXPECT_EQ(std::bit_cast<std::uint32_t>(flip_bit(0.0f, 0)), 1u);
    EXPECT_THROW(flip_bit(1.0f, 32), std::invalid_argument);
    EXPECT_THROW(flip_bit(1.0, 64), std::invalid_argument);
}

TEST(FlipBit, IsAnInvolution) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> d(0, 100);
    for (int i = 0; i < 1000; ++i) {
        const double v = d(rng);
        const float f = static_cast<float>(v);
        const unsigned b32 = static_cast<unsigned>(rng() % 32), b64 = static_cast<unsigned>(rng() % 64);
        EXPECT_EQ(std::bit_cast<std::uint32_t>(flip_bit(flip_bit(f, b32), b32)), std::bit_cast<std::uint32_t>(f));
        EXPECT_EQ(std::bit_cast<std::uint64_t>(flip_bit(flip_bit(v, b64), b64)), std::bit_cast<std::uint64_t>(v));
    }
}

TEST(Injector, FiresOnceAtItsSite) {
    FaultSpec in;
    in.signal = 1;
    in.element = 3;
    in.bit = 31;
    in.site = {SiteKind::Input, 0};
    FaultSpec out = in;
    out.component = Component::Imag;
    out.site = {SiteKind::AfterStage, 1};
    BitFlipInjector<float> inj({in, out});

    std::complex<float> v(2.0f, 4.0f);
    inj.on_input(0, 3, v);
    inj.on_output(1, 1, 3, v);
    EXPECT_EQ(v, std::complex<float>(2.0f, -4.0f));
    inj.on_output(0, 1, 3, v);
    inj.on_input(1, 2, v);
    EXPECT_EQ(inj.fired_count(), 1u);
    inj.on_input(1, 3, v);
    EXPECT_EQ(v, std::complex<float>(-2.0f, -4.0f));
    inj.on_input(1, 3, v);
    inj.on_output(1, 1, 3, v);
    EXPECT_EQ(v, std::complex<float>(-2.0f, -4.0f));
    EXPECT_EQ(inj.fired_count(), 2u);
}

TEST(Injector, SiteNames) {
    EXPECT_EQ(site_name({SiteKind::Input, 0}, 2), "input");
    EXPECT_EQ(site_name({SiteKind::AfterStage, 0}, 2), "stage0");
    EXPECT_EQ(site_name({SiteKind::AfterStage, 1}, 2), "output");
}

TEST(Campaign, InjectedRunCountIsExact) {
    const auto a = choose_injected_runs(2000, 0.5, 1);
    EXPECT_EQ(std::count(a.begin(), a.end(), true), 1000);
    EXPECT_EQ(a, choose_injected_runs(2000, 0.5, 1));
    EXPECT_NE(a, choose_injected_runs(2000, 0.5, 2));
    const auto b = choose_injected_runs(10, 0.3, 4);
    EXPECT_EQ(std::count(b.begin(), b.end(), true), 3);
}

TEST(Campaign, DrawFaultStaysInBounds) {
    std::mt19937_64 rng(9);
    std::size_t inputs = 0;
    for (int i = 0; i < 2000; ++i) {
        const FaultSpec f = draw_fault(static_cast<std::size_t>(i), 256, 8, 2, BitRange{25, 30}, rng);
        ASSERT_LT(f.signal, 8u);
        ASSERT_LT(f.element, 256u);
        ASSERT_GE(f.bit, 25u);
        ASSERT_LE(f.bit, 30u);
        if (f.site.kind == SiteKind::Input)
            ++inputs;
        else
            ASSERT_LT(f.site.stage, 2u);
    }
    EXPECT_GT(inputs, 500u);
    EXPECT_LT(inputs, 830u);
}

TEST(Campaign, ConfigValidation) {
    CampaignConfig c = small_campaign();
    c.inject_fraction = 1.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = small_campaign();
    c.bits = BitRange{10, 32};
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = small_campaign();
    c.delta_grid = {};
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = small_campaign();
    c.scheme = Scheme::None;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = small_campaign();
    c.n = 100;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    EXPECT_NO_THROW(small_campaign().validate());
}

TEST(Campaign, RocLimitsAndMonotone) {
    const CampaignResult r = run_campaign(small_campaign());
    ASSERT_EQ(r.roc.size(), 7u);
    EXPECT_EQ(r.records.size(), 120u);
    EXPECT_EQ(r.injected_runs(), 60u);
    EXPECT_DOUBLE_EQ(r.roc.front().false_alarm_rate, 1.0);
    EXPECT_DOUBLE_EQ(r.roc.front().detection_rate, 1.0);
    EXPECT_DOUBLE_EQ(r.roc.back().false_alarm_rate, 0.0);
    EXPECT_DOUBLE_EQ(r.roc.back().detection_rate, 0.0);
    for (std::size_t i = 1; i < r.roc.size(); ++i) {
        EXPECT_LE(r.roc[i].detection_rate, r.roc[i - 1].detection_rate) << i;
        EXPECT_LE(r.roc[i].false_alarm_rate, r.roc[i - 1].false_alarm_rate) << i;
        EXPECT_EQ(r.roc[i].subthreshold_rate, r.roc[0].subthreshold_rate);
    }
    EXPECT_GT(r.operating_delta, 0.0);
    for (const auto& rec : r.records) {
        if (!rec.injected) {
            EXPECT_FALSE(rec.corrected);
        }
        if (rec.corrected) {
            EXPECT_TRUE(rec.detected);
        }
    }
}

TEST(Campaign, DeterministicAcrossRunsAndThreads) {
    CampaignConfig c = small_campaign();
    const CampaignResult a = run_campaign(c);
    const CampaignResult b = run_campaign(c);
    c.threads = 3;
    const CampaignResult t = run_campaign(c);
    EXPECT_EQ(records_csv(a.records), records_csv(b.records));
    EXPECT_EQ(roc_csv(a.roc), roc_csv(b.roc));
    EXPECT_EQ(records_csv(a.records), records_csv(t.records));
    EXPECT_EQ(roc_csv(a.roc), roc_csv(t.roc));
    c.threads = 1;
    c.seed = 6;
    EXPECT_NE(records_csv(a.records), records_csv(run_campaign(c).records));
}

TEST(Campaign, CalibratedDeltaSitsAboveCleanNoise) {
    CampaignConfig c = small_campaign();
    const double d = calibrate_delta(c);
    EXPECT_GT(d, 0.0);
    EXPECT_LT(d, 1e-3);
    c.delta = d;
    const CampaignResult r = run_campaign(c);
    EXPECT_EQ(r.operating_delta, d);
    for (const auto& rec : r.records) {
        if (!rec.injected) {
            EXPECT_FALSE(rec.detected) << rec.run_id;
        }
    }
}

TEST(Campaign, CsvLayout) {
    RunRecord clean;
    clean.run_id = 0;
    clean.discrepancy = 1.5e-7;
    RunRecord hit;
    hit.run_id = 1;
    hit.injected = true;
    hit.fault.signal = 2;
    hit.fault.element = 17;
    hit.fault.bit = 30;
    hit.discrepancy = std::numeric_limits<double>::infinity();
    hit.detected = hit.corrected = true;
    EXPECT_EQ(records_csv({clean, hit}),
              "run_id,injected,signal_idx,element_idx,bit,discrepancy,detected_at_default_delta,corrected\n"
              "0,0,-1,-1,-1,1.500000e-07,0,-1\n"
              "1,1,2,17,30,inf,1,1\n");
    EXPECT_EQ(roc_csv({{1e-4, 1.0, 0.0, 0.5, 0.01}}),
              "delta,detection_rate,false_alarm_rate,corrected_rate,subthreshold_rate\n"
              "1.000000e-04,1.000000,0.000000,0.500000,0.010000\n");
}

TEST(Propagation, RadixTwoReferenceMatchesOracle) {
    const auto x = testing_support::random_signal<double>(64, 31);
    std::size_t calls = 0;
    const auto y = radix2_reference(x, [&](std::size_t, Signal<double>&) { ++calls; });
    EXPECT_EQ(calls, 6u);
    EXPECT_LE(testing_support::rel_l2(y, testing_support::naive_dft(x)), 1e-13);
}

TEST(Propagation, FootprintExamples) {
    EXPECT_EQ(propagation_footprint(8, {SiteKind::AfterStage, 0}, 0), 4u);
    EXPECT_EQ(propagation_footprint(8, {SiteKind::AfterStage, 2}, 5), 1u);
    EXPECT_EQ(propagation_footprint(1024, {SiteKind::Input, 0}, 123), 1024u);
}

TEST(Propagation, FootprintDoublesPerRemainingStage) {
    const std::size_t n = 64;
    for (std::size_t s = 0; s < 6; ++s)
        for (std::size_t e : {std::size_t{0}, std::size_t{17}, std::size_t{63}})
            EXPECT_EQ(propagation_footprint(n, {SiteKind::AfterStage, s}, e), std::size_t{1} << (5 - s)) << s << " " << e;
    EXPECT_THROW(propagation_footprint(n, {SiteKind::AfterStage, 6}, 0), std::invalid_argument);
    EXPECT_THROW(propagation_footprint(n, {SiteKind::Input, 0}, 64), std::invalid_argument);
}
