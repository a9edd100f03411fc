#pragma once

// Bit-flip injection, the detection campaign and its ROC, and the error
// propagation measurement on a plain radix-2 transform.

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "ftfft/abft.hpp"
#include "ftfft/fft.hpp"
#include "ftfft/plan.hpp"
#include "ftfft/signal.hpp"
#include "ftfft/twiddle.hpp"

namespace ftfft {

template <class T>
constexpr unsigned bit_width_of() {
    return sizeof(T) * 8;
}

/// Flips one bit of the IEEE-754 representation.
template <class T>
T flip_bit(T value, unsigned bit) {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
    using U = std::conditional_t<std::is_same_v<T, float>, std::uint32_t, std::uint64_t>;
    if (bit >= bit_width_of<T>()) throw std::invalid_argument("bit position out of range");
    return std::bit_cast<T>(static_cast<U>(std::bit_cast<U>(value) ^ (U{1} << bit)));
}

enum class Component { Real, Imag };
enum class SiteKind { Input, AfterStage };

/// Input: after the first load, before any arithmetic. AfterStage k: the output
/// of stage k just before it is stored; the last stage is the transform output.
struct FaultSite {
    SiteKind kind = SiteKind::Input;
    std::size_t stage = 0;

    friend bool operator==(const FaultSite&, const FaultSite&) = default;
};

struct FaultSpec {
    std::size_t run_id = 0;
    std::size_t signal = 0;
    std::size_t element = 0;
    Component component = Component::Real;
    unsigned bit = 0;
    FaultSite site;

    friend bool operator==(const FaultSpec&, const FaultSpec&) = default;
};

inline std::string site_name(const FaultSite& s, std::size_t stages) {
    if (s.kind == SiteKind::Input) return "input";
    if (s.stage + 1 == stages) return "output";
    return "stage" + std::to_string(s.stage);
}

/// Applies each spec once, when its element passes the chosen site.
template <class T>
class BitFlipInjector {
public:
    static constexpr bool active = true;

    BitFlipInjector() = default;
    explicit BitFlipInjector(std::vector<FaultSpec> specs) : specs_(std::move(specs)), fired_(specs_.size(), false) {
        for (const auto& s : specs_)
            if (s.bit >= bit_width_of<T>()) throw std::invalid_argument("bit position out of range");
    }
    explicit BitFlipInjector(const FaultSpec& spec) : BitFlipInjector(std::vector<FaultSpec>{spec}) {}

    void on_input(std::size_t signal, std::size_t idx, std::complex<T>& v) {
        for (std::size_t i = 0; i < specs_.size(); ++i) {
            const FaultSpec& s = specs_[i];
            if (!fired_[i] && s.site.kind == SiteKind::Input && s.signal == signal && s.element == idx) fire(i, v);
        }
    }

    void on_output(std::size_t stage, std::size_t signal, std::size_t idx, std::complex<T>& v) {
        for (std::size_t i = 0; i < specs_.size(); ++i) {
            const FaultSpec& s = specs_[i];
            if (!fired_[i] && s.site.kind == SiteKind::AfterStage && s.site.stage == stage && s.signal == signal &&
                s.element == idx)
                fire(i, v);
        }
    }

    std::size_t fired_count() const { return static_cast<std::size_t>(std::count(fired_.begin(), fired_.end(), true)); }
    const std::vector<FaultSpec>& specs() const { return specs_; }

private:
    void fire(std::size_t i, std::complex<T>& v) {
        const FaultSpec& s = specs_[i];
        if (s.component == Component::Real)
            v.real(flip_bit(v.real(), s.bit));
        else
            v.imag(flip_bit(v.imag(), s.bit));
        fired_[i] = true;
    }

    std::vector<FaultSpec> specs_;
    std::vector<bool> fired_;
};

// ---------------------------------------------------------------------------
// Random streams

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Independent generator for (seed, stream); streams never share state, so runs
/// can execute in any order.
inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ull)));
}

template <class T>
SignalBatch<T> random_batch(std::size_t n, std::size_t count, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    SignalBatch<T> b(n, count);
    for (auto& v : b.storage()) {
        const double re = normal(rng);
        const double im = normal(rng);
        v = {static_cast<T>(re), static_cast<T>(im)};
    }
    return b;
}

// ---------------------------------------------------------------------------
// Campaign

struct BitRange {
    unsigned lo = 0;
    unsigned hi = 0;
};

inline std::vector<double> default_delta_grid() {
    std::vector<double> g(33);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::pow(10.0, -8.0 + 8.0 * static_cast<double>(i) / 32.0);
    return g;
}

struct CampaignConfig {
    std::size_t runs = 2000;
    double inject_fraction = 0.5;
    std::size_t n = 1024;
    std::size_t batch = 16;
    Precision precision = Precision::FP32;
    Scheme scheme = Scheme::TwoSidedGroup;
    std::vector<double> delta_grid = default_delta_grid();
    std::uint64_t seed = 1;
    std::optional<BitRange> bits;  // default: the whole word
    std::optional<double> delta;   // operating threshold; default: calibrated
    std::size_t threads = 1;
    std::size_t calibration_batches = 200;
    std::optional<double> floor_scale;  // default: kDefaultFloorScale

    void validate() const {
        if (runs < 2) throw std::invalid_argument("runs must be at least 2");
        if (!(inject_fraction > 0.0 && inject_fraction < 1.0))
            throw std::invalid_argument("inject fraction must be in (0, 1)");
        if (!is_power_of_two(n) || n < 2 || n > kMaxSignalLength)
            throw std::invalid_argument("size must be a power of two");
        if (batch < 1 || batch > kMaxBatch) throw std::invalid_argument("batch must be within 1..1024");
        if (delta_grid.empty()) throw std::invalid_argument("delta grid is empty");
        for (double d : delta_grid)
            if (!(d > 0.0) || !std::isfinite(d)) throw std::invalid_argument("delta grid values must be positive");
        if (delta && !(*delta > 0.0)) throw std::invalid_argument("delta must be positive");
        const unsigned width = precision == Precision::FP32 ? 32 : 64;
        if (bits && (bits->lo > bits->hi || bits->hi >= width)) throw std::invalid_argument("bit range out of width");
        if (scheme == Scheme::None) throw std::invalid_argument("campaign needs a protection scheme");
    }
};

struct RunRecord {
    std::size_t run_id = 0;
    bool injected = false;
    FaultSpec fault;
    double discrepancy = 0.0;  // largest checksum discrepancy over the batch
    bool detected = false;     // at the operating threshold
    bool corrected = false;    // at the operating threshold
    double impact = 0.0;       // unprotected relative L2 error of the faulty signal
    bool subthreshold = false;  // impact within the transform's own accuracy tolerance
    std::vector<std::uint8_t> corrected_at;  // per grid point, for detected runs
};

struct RocPoint {
    double delta = 0.0;
    double detection_rate = 0.0;
    double false_alarm_rate = 0.0;
    double corrected_rate = 0.0;
    double subthreshold_rate = 0.0;
};

struct CampaignResult {
    double operating_delta = 0.0;
    std::vector<RunRecord> records;
    std::vector<RocPoint> roc;
    std::size_t injected_runs() const {
        return static_cast<std::size_t>(
            std::count_if(records.begin(), records.end(), [](const RunRecord& r) { return r.injected; }));
    }
};

/// Runs chosen for injection: exactly round(runs * fraction), by a seeded shuffle.
inline std::vector<bool> choose_injected_runs(std::size_t runs, double fraction, std::uint64_t seed) {
    const auto k = static_cast<std::size_t>(std::llround(static_cast<double>(runs) * fraction));
    std::vector<std::size_t> ids(runs);
    std::iota(ids.begin(), ids.end(), 0);
    std::mt19937_64 rng = stream_rng(seed, ~std::uint64_t{0});
    for (std::size_t i = runs; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(ids[i - 1], ids[j]);
    }
    std::vector<bool> out(runs, false);
    for (std::size_t i = 0; i < std::min(k, runs); ++i) out[ids[i]] = true;
    return out;
}

inline FaultSpec draw_fault(std::size_t run_id, std::size_t n, std::size_t batch, std::size_t stages, BitRange bits,
                            std::mt19937_64& rng) {
    FaultSpec f;
    f.run_id = run_id;
    f.signal = static_cast<std::size_t>(rng() % batch);
    f.element = static_cast<std::size_t>(rng() % n);
    f.component = (rng() & 1) ? Component::Imag : Component::Real;
    f.bit = bits.lo + static_cast<unsigned>(rng() % (bits.hi - bits.lo + 1));
    const std::size_t site = static_cast<std::size_t>(rng() % (stages + 1));
    f.site = site == 0 ? FaultSite{SiteKind::Input, 0} : FaultSite{SiteKind::AfterStage, site - 1};
    return f;
}

namespace detail {

template <class F>
void parallel_for(std::size_t count, std::size_t threads, F&& body) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mu;
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(error_mu);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

template <class T>
double max_signal_error(const SignalBatch<T>& a, const SignalBatch<T>& b) {
    double worst = 0.0;
    for (std::size_t s = 0; s < a.count(); ++s) {
        const Signal<T> x(a.signal(s).begin(), a.signal(s).end());
        const Signal<T> y(b.signal(s).begin(), b.signal(s).end());
        worst = std::max(worst, relative_l2(x, y));
    }
    return worst;
}

/// Threshold-independent part of a protected run: the fused pass for group
/// schemes, or an observe-only pass for the thread scheme.
template <class T>
struct CampaignContext {
    FftPlan plan;
    TwiddleTable<T> tw;
    const EncodingVector<T>* enc = nullptr;
    Scheme scheme = Scheme::TwoSidedGroup;
    std::size_t group_size = 0;
    double floor_scale = 0.0;
};

template <class T>
DetectionConfig detection_at(const CampaignContext<T>& ctx, double delta) {
    return {delta, 0.0, ctx.floor_scale};
}

template <class T>
ProtectedRun<T> protected_at(const CampaignContext<T>& ctx, const SignalBatch<T>& input, const EncodedRun<T>* encoded,
                             double delta, BitFlipInjector<T>* inj) {
    const DetectionConfig cfg = detection_at(ctx, delta);
    if (ctx.scheme == Scheme::TwoSidedThread) {
        ProtectionConfig pc{ctx.scheme, cfg, EncodingKind::Wang, ctx.group_size};
        if (inj) {
            BitFlipInjector<T> fresh(inj->specs());
            return run_protected(ctx.plan, ctx.tw, input, pc, false, &fresh);
        }
        return run_protected(ctx.plan, ctx.tw, input, pc);
    }
    EncodedRun<T> run = *encoded;
    DetectionReport rep = make_report(ctx.scheme, cfg, run.states.size(), input.count());
    rep.passes = run.passes;
    if (ctx.scheme == Scheme::TwoSidedGroup)
        resolve_two_sided(run, *ctx.enc, cfg, ctx.plan, ctx.tw, false, rep);
    else
        resolve_one_sided(run, input, *ctx.enc, cfg, ctx.plan, ctx.tw, false, rep);
    return {std::move(run.output), std::move(rep)};
}

/// Largest per-signal discrepancy; independent of the threshold.
template <class T>
double observed_discrepancy(const CampaignContext<T>& ctx, const SignalBatch<T>& input, const EncodedRun<T>* encoded,
                            BitFlipInjector<T>* inj) {
    const ProtectedRun<T> r = protected_at(ctx, input, encoded, std::numeric_limits<double>::infinity(), inj);
    double d = 0.0;
    for (double v : r.report.discrepancy) d = std::max(d, std::isnan(v) ? std::numeric_limits<double>::infinity() : v);
    return d;
}

template <class T>
CampaignContext<T> make_context(const CampaignConfig& cfg) {
    CampaignContext<T> ctx;
    ctx.plan = make_plan(cfg.n, precision_of<T>(), kDefaultMaxTile, cfg.batch);
    ctx.tw = build_twiddles<T>(ctx.plan);
    ctx.enc = &shared_encoding<T>(EncodingKind::Wang, cfg.n);
    ctx.scheme = cfg.scheme;
    ctx.group_size = cfg.batch;
    ctx.floor_scale = cfg.floor_scale.value_or(kDefaultFloorScale);
    return ctx;
}

template <class T>
std::optional<EncodedRun<T>> encode_run(const CampaignContext<T>& ctx, const SignalBatch<T>& input,
                                        BitFlipInjector<T>* inj) {
    if (ctx.scheme == Scheme::TwoSidedThread) return std::nullopt;
    const bool two = ctx.scheme == Scheme::TwoSidedGroup;
    if (inj) {
        BitFlipInjector<T> fresh(inj->specs());
        return run_group_encoded(ctx.plan, ctx.tw, input, *ctx.enc, ctx.group_size, two, false, &fresh);
    }
    return run_group_encoded(ctx.plan, ctx.tw, input, *ctx.enc, ctx.group_size, two, false,
                             static_cast<NoInjection<T>*>(nullptr));
}

inline double percentile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
}

template <class T>
double calibrate_delta_impl(const CampaignConfig& cfg, const CampaignContext<T>& ctx) {
    std::vector<double> samples(cfg.calibration_batches * cfg.batch);
    parallel_for(cfg.calibration_batches, cfg.threads, [&](std::size_t i) {
        std::mt19937_64 rng = stream_rng(cfg.seed ^ 0xCA11B4A7E5EEDull, i);
        const SignalBatch<T> input = random_batch<T>(cfg.n, cfg.batch, rng);
        const auto enc = encode_run(ctx, input, static_cast<BitFlipInjector<T>*>(nullptr));
        const ProtectedRun<T> r =
            protected_at(ctx, input, enc ? &*enc : nullptr, std::numeric_limits<double>::infinity(),
                         static_cast<BitFlipInjector<T>*>(nullptr));
        std::copy(r.report.discrepancy.begin(), r.report.discrepancy.end(),
                  samples.begin() + static_cast<std::ptrdiff_t>(i * cfg.batch));
    });
    const double p = percentile(samples, 0.999);
    return p > 0.0 ? 10.0 * p : std::numeric_limits<double>::min();
}

template <class T>
CampaignResult run_campaign_impl(const CampaignConfig& cfg) {
    const CampaignContext<T> ctx = make_context<T>(cfg);
    const BitRange bits = cfg.bits.value_or(BitRange{0, bit_width_of<T>() - 1});
    const std::vector<bool> inject = choose_injected_runs(cfg.runs, cfg.inject_fraction, cfg.seed);
    std::vector<double> grid = cfg.delta_grid;

    CampaignResult res;
    res.operating_delta = cfg.delta ? *cfg.delta : calibrate_delta_impl(cfg, ctx);
    res.records.resize(cfg.runs);
    const double tol = 10.0 * oracle_tolerance<T>();

    parallel_for(cfg.runs, cfg.threads, [&](std::size_t run_id) {
        std::mt19937_64 rng = stream_rng(cfg.seed, run_id);
        const SignalBatch<T> input = random_batch<T>(cfg.n, cfg.batch, rng);
        RunRecord rec;
        rec.run_id = run_id;
        rec.injected = inject[run_id];
        rec.corrected_at.assign(grid.size(), 0);

        std::optional<BitFlipInjector<T>> inj;
        if (rec.injected) {
            rec.fault = draw_fault(run_id, cfg.n, cfg.batch, ctx.plan.stages.size(), bits, rng);
            inj.emplace(rec.fault);
        }
        BitFlipInjector<T>* ip = inj ? &*inj : nullptr;
        const auto encoded = encode_run(ctx, input, ip);
        const EncodedRun<T>* ep = encoded ? &*encoded : nullptr;
        rec.discrepancy = observed_discrepancy(ctx, input, ep, ip);
        rec.detected = rec.discrepancy > res.operating_delta;

        if (rec.injected) {
            const SignalBatch<T> clean = fft_execute(ctx.plan, ctx.tw, input);
            SignalBatch<T> raw(cfg.n, cfg.batch);
            {
                BitFlipInjector<T> fresh(rec.fault);
                NullGuard<T> g;
                PassCounter pc;
                execute(ctx.plan, ctx.tw, input.data(), raw.data(), false, pc, g, fresh);
            }
            const Signal<T> a(raw.signal(rec.fault.signal).begin(), raw.signal(rec.fault.signal).end());
            const Signal<T> b(clean.signal(rec.fault.signal).begin(), clean.signal(rec.fault.signal).end());
            rec.impact = relative_l2(a, b);
            rec.subthreshold = rec.impact <= oracle_tolerance<T>();

            auto corrected_at = [&](double delta) {
                const ProtectedRun<T> r = protected_at(ctx, input, ep, delta, ip);
                return !r.report.any_unrecoverable() && !r.report.corrected.empty() &&
                       max_signal_error(r.output, clean) <= tol;
            };
            if (rec.detected) rec.corrected = corrected_at(res.operating_delta);
            for (std::size_t i = 0; i < grid.size(); ++i)
                if (rec.discrepancy > grid[i]) rec.corrected_at[i] = corrected_at(grid[i]) ? 1 : 0;
        }
        res.records[run_id] = std::move(rec);
    });

    // Faults that leave the output within tolerance are reported as sub-threshold
    // and kept out of the detection-rate denominator.
    std::size_t injected = 0, material = 0, clean_runs = 0, sub = 0;
    for (const auto& r : res.records) {
        if (!r.injected) {
            ++clean_runs;
            continue;
        }
        ++injected;
        (r.subthreshold ? sub : material)++;
    }
    const auto rate = [](std::size_t a, std::size_t b) {
        return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0;
    };
    for (std::size_t i = 0; i < grid.size(); ++i) {
        std::size_t det_material = 0, det = 0, fa = 0, corr = 0;
        for (const auto& r : res.records) {
            const bool hit = r.discrepancy > grid[i];
            if (!r.injected) {
                fa += hit;
                continue;
            }
            det += hit;
            det_material += hit && !r.subthreshold;
            corr += hit && r.corrected_at[i];
        }
        res.roc.push_back({grid[i], rate(det_material, material), rate(fa, clean_runs), rate(corr, det),
                           rate(sub, injected)});
    }
    return res;
}

}  // namespace detail

/// 10x the 99.9th percentile of fault-free discrepancies for the campaign's
/// size, precision and scheme.
inline double calibrate_delta(const CampaignConfig& cfg) {
    cfg.validate();
    if (cfg.precision == Precision::FP32) return detail::calibrate_delta_impl(cfg, detail::make_context<float>(cfg));
    return detail::calibrate_delta_impl(cfg, detail::make_context<double>(cfg));
}

inline CampaignResult run_campaign(const CampaignConfig& cfg) {
    cfg.validate();
    return cfg.precision == Precision::FP32 ? detail::run_campaign_impl<float>(cfg)
                                            : detail::run_campaign_impl<double>(cfg);
}

namespace detail {

inline std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6e", v);
    return buf;
}

}  // namespace detail

inline std::string roc_csv(const std::vector<RocPoint>& roc) {
    std::string out = "delta,detection_rate,false_alarm_rate,corrected_rate,subthreshold_rate\n";
    char buf[160];
    for (const auto& p : roc) {
        std::snprintf(buf, sizeof buf, "%.6e,%.6f,%.6f,%.6f,%.6f\n", p.delta, p.detection_rate, p.false_alarm_rate,
                      p.corrected_rate, p.subthreshold_rate);
        out += buf;
    }
    return out;
}

/// Fields that do not apply to runs without a fault are -1.
inline std::string records_csv(const std::vector<RunRecord>& records) {
    std::string out =
        "run_id,injected,signal_idx,element_idx,bit,discrepancy,detected_at_default_delta,corrected\n";
    for (const auto& r : records) {
        out += std::to_string(r.run_id) + ',' + (r.injected ? "1" : "0") + ',';
        if (r.injected)
            out += std::to_string(r.fault.signal) + ',' + std::to_string(r.fault.element) + ',' +
                   std::to_string(r.fault.bit) + ',';
        else
            out += "-1,-1,-1,";
        out += detail::format_number(r.discrepancy) + ',' + (r.detected ? "1" : "0") + ',' +
               (r.injected ? (r.corrected ? "1" : "0") : "-1") + '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Propagation

struct PropagationPoint {
    SiteKind kind = SiteKind::Input;
    std::size_t stage = 0;  // butterfly stage, for AfterStage
};

/// Iterative radix-2 decimation-in-time FFT, exposing the data after each
/// butterfly stage to `hook(stage, data)`.
template <class Hook>
Signal<double> radix2_reference(Signal<double> x, Hook&& hook) {
    const std::size_t n = x.size();
    if (!is_power_of_two(n) || n < 2) throw std::invalid_argument("size must be a power of two");
    const unsigned bits = log2_exact(n);
    Signal<double> a(n);
    for (std::size_t i = 0; i < n; ++i) a[bit_reverse(i, bits)] = x[i];
    std::size_t stage = 0;
    for (std::size_t size = 2; size <= n; size *= 2, ++stage) {
        const std::size_t half = size / 2;
        for (std::size_t start = 0; start < n; start += size)
            for (std::size_t k = 0; k < half; ++k) {
                const long double ang = -2.0L * std::numbers::pi_v<long double> * static_cast<long double>(k) /
                                        static_cast<long double>(size);
                const std::complex<double> w(static_cast<double>(std::cos(ang)), static_cast<double>(std::sin(ang)));
                const std::complex<double> t = a[start + k + half] * w;
                a[start + k + half] = a[start + k] - t;
                a[start + k] += t;
            }
        hook(stage, a);
    }
    return a;
}

/// Number of outputs that change when 1.0 is added to one element at `point`.
/// Input elements are indexed in natural order, stage outputs in storage order.
inline std::size_t propagation_footprint(std::size_t n, PropagationPoint point, std::size_t element,
                                         std::uint64_t seed = 1) {
    if (!is_power_of_two(n) || n < 2) throw std::invalid_argument("size must be a power of two");
    if (element >= n) throw std::invalid_argument("element out of range");
    const unsigned stages = log2_exact(n);
    if (point.kind == SiteKind::AfterStage && point.stage >= stages)
        throw std::invalid_argument("stage out of range");

    std::mt19937_64 rng = stream_rng(seed, n);
    std::normal_distribution<double> normal(0.0, 1.0);
    Signal<double> x(n);
    for (auto& v : x) {
        const double re = normal(rng);
        v = {re, normal(rng)};
    }
    const auto none = [](std::size_t, Signal<double>&) {};
    const Signal<double> clean = radix2_reference(x, none);

    Signal<double> xi = x;
    if (point.kind == SiteKind::Input) xi[element] += 1.0;
    const Signal<double> hit = radix2_reference(xi, [&](std::size_t s, Signal<double>& a) {
        if (point.kind == SiteKind::AfterStage && s == point.stage) a[element] += 1.0;
    });

    std::size_t count = 0;
    for (std::size_t k = 0; k < n; ++k)
        if (std::abs(hit[k] - clean[k]) > 1e-9) ++count;
    return count;
}

}  // namespace ftfft
