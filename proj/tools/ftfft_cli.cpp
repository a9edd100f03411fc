// ftfft: plan, transform, inject, bench, propagate.
//
// Exit codes: 0 ok, 1 usage or I/O error, 2 unrecoverable fault reported.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ftfft/ftfft.hpp"

namespace {

using namespace ftfft;
using nlohmann::json;

constexpr int kExitUnrecoverable = 2;

struct PlanArgs {
    std::size_t n = 0;
    std::size_t batch = 0;
    std::string ft_mode = "none";
    std::size_t max_tile = kDefaultMaxTile;
};

struct FaultArgs {
    std::optional<unsigned> bit;
    std::size_t signal = 0;
    std::size_t element = 0;
    std::string component = "re";
    std::string site = "output";
};

struct TransformArgs {
    std::string input, output;
    std::size_t n = 0;
    std::size_t batch = 1;
    std::string precision = "fp32";
    bool inverse = false;
    std::string scheme = "two_sided_group";
    std::optional<double> delta;
    std::uint64_t seed = 1;
    FaultArgs fault;
};

struct InjectArgs {
    std::size_t runs = 2000;
    double fraction = 0.5;
    std::size_t n = 1024;
    std::size_t batch = 16;
    std::string precision = "fp32";
    std::string scheme = "two_sided_group";
    std::string grid;
    std::uint64_t seed = 1;
    std::string roc_out = "roc.csv";
    std::string records_out = "records.csv";
    std::string bits;
    std::size_t threads = 1;
    std::optional<double> delta;
};

struct BenchArgs {
    std::string sizes = "1024,16384";
    std::string batches = "16";
    std::string schemes = "none,one_sided,two_sided_thread,two_sided_group";
    std::string precision = "fp32";
    std::size_t trials = 10;
    bool inject = false;
    double delta = 1e-4;
    std::string out;
};

struct PropagateArgs {
    std::size_t n = 8;
    std::string site;
    std::size_t element = 0;
    std::uint64_t seed = 1;
};

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::size_t parse_size(const std::string& s) {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("not an integer: '" + s + "'");
    return static_cast<std::size_t>(v);
}

/// "a,b,c" or "lo:hi:count" (log-spaced, inclusive).
std::vector<double> parse_grid(const std::string& s) {
    if (s.empty()) return default_delta_grid();
    const auto parts = split(s, ':');
    if (s.find(':') != std::string::npos) {
        if (parts.size() != 3) throw std::invalid_argument("delta grid must be 'lo:hi:count' or a comma list");
        const double lo = std::stod(parts[0]);
        const double hi = std::stod(parts[1]);
        const std::size_t count = parse_size(parts[2]);
        if (!(lo > 0) || !(hi >= lo) || count == 0) throw std::invalid_argument("invalid delta grid");
        std::vector<double> g(count);
        for (std::size_t i = 0; i < count; ++i) {
            const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
            g[i] = std::pow(10.0, std::log10(lo) + t * (std::log10(hi) - std::log10(lo)));
        }
        return g;
    }
    std::vector<double> g;
    for (const auto& p : split(s, ',')) g.push_back(std::stod(p));
    if (g.empty()) throw std::invalid_argument("invalid delta grid");
    return g;
}

BitRange parse_bits(const std::string& s) {
    const auto parts = split(s, ':');
    if (parts.size() == 1) {
        const auto b = static_cast<unsigned>(parse_size(parts[0]));
        return {b, b};
    }
    if (parts.size() != 2) throw std::invalid_argument("bits must be 'lo:hi'");
    return {static_cast<unsigned>(parse_size(parts[0])), static_cast<unsigned>(parse_size(parts[1]))};
}

FaultSite parse_site(const std::string& s, std::size_t stages) {
    if (s == "input") return {SiteKind::Input, 0};
    if (s == "output") return {SiteKind::AfterStage, stages - 1};
    if (s.rfind("stage", 0) == 0) {
        const std::size_t k = parse_size(s.substr(5));
        if (k >= stages) throw std::invalid_argument("stage out of range");
        return {SiteKind::AfterStage, k};
    }
    throw std::invalid_argument("site must be input, output or stage<k>");
}

// ---------------------------------------------------------------------------

int cmd_plan(const PlanArgs& a) {
    const PlanParams p = select_parameters(a.n, a.batch, a.max_tile);
    std::cout << render_descriptor(emit_descriptor(p, parse_ft_mode(a.ft_mode)));
    return 0;
}

template <class T>
double quick_delta(const FftPlan& plan, Scheme scheme, std::uint64_t seed) {
    CampaignConfig c;
    c.n = plan.n;
    c.batch = plan.bs;
    c.precision = precision_of<T>();
    c.scheme = scheme;
    c.seed = seed;
    const std::size_t budget = std::size_t{1} << 20;
    c.calibration_batches = std::clamp<std::size_t>(budget / (plan.n * plan.bs), 4, 64);
    return calibrate_delta(c);
}

template <class T>
int transform_impl(const TransformArgs& a) {
    const SignalBatch<T> input = read_signals<T>(a.input, a.n, a.batch);
    const FftPlan plan = make_plan(a.n, precision_of<T>(), kDefaultMaxTile, a.batch);
    const TwiddleTable<T> tw = build_twiddles<T>(plan);
    const Scheme scheme = parse_scheme(a.scheme);
    const double delta = a.delta ? *a.delta : (scheme == Scheme::None ? 1.0 : quick_delta<T>(plan, scheme, a.seed));
    const ProtectionConfig cfg{scheme, make_detection_config<T>(delta), EncodingKind::Wang, 0};

    ProtectedRun<T> res;
    if (a.fault.bit) {
        FaultSpec f;
        f.signal = a.fault.signal;
        f.element = a.fault.element;
        f.bit = *a.fault.bit;
        if (a.fault.component != "re" && a.fault.component != "im")
            throw std::invalid_argument("component must be re or im");
        f.component = a.fault.component == "re" ? Component::Real : Component::Imag;
        f.site = parse_site(a.fault.site, plan.stages.size());
        if (f.signal >= a.batch || f.element >= a.n) throw std::invalid_argument("fault target out of range");
        BitFlipInjector<T> inj(f);
        res = run_protected(plan, tw, input, cfg, a.inverse, &inj);
    } else {
        res = run_protected(plan, tw, input, cfg, a.inverse);
    }
    write_signals(a.output, res.output);
    std::cout << report_to_json(res.report).dump(2) << "\n";
    return res.report.any_unrecoverable() ? kExitUnrecoverable : 0;
}

int cmd_transform(const TransformArgs& a) {
    return parse_precision(a.precision) == Precision::FP32 ? transform_impl<float>(a) : transform_impl<double>(a);
}

int cmd_inject(const InjectArgs& a) {
    CampaignConfig c;
    c.runs = a.runs;
    c.inject_fraction = a.fraction;
    c.n = a.n;
    c.batch = a.batch;
    c.precision = parse_precision(a.precision);
    c.scheme = parse_scheme(a.scheme);
    c.delta_grid = parse_grid(a.grid);
    c.seed = a.seed;
    if (!a.bits.empty()) c.bits = parse_bits(a.bits);
    c.threads = a.threads;
    c.delta = a.delta;
    const CampaignResult r = run_campaign(c);
    write_text(a.roc_out, roc_csv(r.roc));
    write_text(a.records_out, records_csv(r.records));

    std::size_t detected = 0, corrected = 0, sub = 0;
    for (const auto& rec : r.records) {
        if (!rec.injected) continue;
        detected += rec.detected;
        corrected += rec.corrected;
        sub += rec.subthreshold;
    }
    const json summary{{"runs", c.runs},
                       {"injected", r.injected_runs()},
                       {"operating_delta", r.operating_delta},
                       {"detected", detected},
                       {"corrected", corrected},
                       {"subthreshold", sub},
                       {"roc", a.roc_out},
                       {"records", a.records_out}};
    std::cout << summary.dump(2) << "\n";
    return 0;
}

template <class T>
std::string bench_impl(const BenchArgs& a) {
    std::string out = "scheme,n,batch,trials,mean_ms,stddev_ms,pass_count,recompute_count,corrected\n";
    for (const auto& ns : split(a.sizes, ','))
        for (const auto& bs : split(a.batches, ','))
            for (const auto& sc : split(a.schemes, ',')) {
                const std::size_t n = parse_size(ns);
                const std::size_t batch = parse_size(bs);
                const Scheme scheme = parse_scheme(sc);
                const FftPlan plan = make_plan(n, precision_of<T>(), kDefaultMaxTile, batch);
                const TwiddleTable<T> tw = build_twiddles<T>(plan);
                std::mt19937_64 rng = stream_rng(1, n * 4099 + batch);
                const SignalBatch<T> input = random_batch<T>(n, batch, rng);
                const ProtectionConfig cfg{scheme, make_detection_config<T>(a.delta), EncodingKind::Wang, 0};

                std::vector<double> ms;
                DetectionReport last;
                for (std::size_t t = 0; t < a.trials; ++t) {
                    const auto t0 = std::chrono::steady_clock::now();
                    if (a.inject) {
                        // One exponent flip in the output of the first signal.
                        FaultSpec f;
                        f.element = t % n;
                        f.bit = bit_width_of<T>() - 2;
                        f.site = {SiteKind::AfterStage, plan.stages.size() - 1};
                        BitFlipInjector<T> inj(f);
                        last = run_protected(plan, tw, input, cfg, false, &inj).report;
                    } else {
                        last = run_protected(plan, tw, input, cfg).report;
                    }
                    ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
                }
                const double mean = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(ms.size());
                double var = 0.0;
                for (double v : ms) var += (v - mean) * (v - mean);
                const double sd = ms.size() > 1 ? std::sqrt(var / static_cast<double>(ms.size() - 1)) : 0.0;
                char buf[256];
                std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%zu,%.4f,%.4f,%zu,%zu,%zu\n",
                              std::string(to_string(scheme)).c_str(), n, batch, a.trials, mean, sd,
                              last.passes.total(), last.recompute_count, last.corrected.size());
                out += buf;
            }
    return out;
}

int cmd_bench(const BenchArgs& a) {
    if (a.trials == 0) throw std::invalid_argument("trials must be positive");
    const std::string csv =
        parse_precision(a.precision) == Precision::FP32 ? bench_impl<float>(a) : bench_impl<double>(a);
    if (a.out.empty())
        std::cout << csv;
    else
        write_text(a.out, csv);
    return 0;
}

int cmd_propagate(const PropagateArgs& a) {
    if (!is_power_of_two(a.n) || a.n < 2) throw std::invalid_argument("size must be a power of two");
    const std::size_t stages = log2_exact(a.n);
    std::vector<std::pair<std::string, PropagationPoint>> points;
    if (a.site.empty()) {
        points.emplace_back("input", PropagationPoint{SiteKind::Input, 0});
        for (std::size_t k = 0; k < stages; ++k)
            points.emplace_back("stage" + std::to_string(k), PropagationPoint{SiteKind::AfterStage, k});
    } else {
        const FaultSite s = parse_site(a.site, stages);
        points.emplace_back(a.site, PropagationPoint{s.kind, s.stage});
    }
    json rows = json::array();
    for (const auto& [name, p] : points) {
        const std::size_t remaining = p.kind == SiteKind::Input ? stages : stages - 1 - p.stage;
        rows.push_back({{"site", name},
                        {"remaining_stages", remaining},
                        {"corrupted", propagation_footprint(a.n, p, a.element, a.seed)}});
    }
    std::cout << json{{"n", a.n}, {"element", a.element}, {"points", rows}}.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fault-tolerant batched FFT: plans, protected transforms and fault campaigns"};
    app.require_subcommand(1);

    PlanArgs plan;
    auto* p = app.add_subcommand("plan", "Print the kernel descriptor for a transform size");
    p->add_option("--n", plan.n, "Transform size")->required();
    p->add_option("--batch", plan.batch, "Batch size (0: unknown)");
    p->add_option("--ft-mode", plan.ft_mode, "none, one_sided or two_sided");
    p->add_option("--max-tile", plan.max_tile, "Largest stage dim");

    TransformArgs tr;
    auto* t = app.add_subcommand("transform", "Transform a raw signal file");
    t->add_option("--input", tr.input, "Raw input file")->required();
    t->add_option("--output", tr.output, "Raw output file")->required();
    t->add_option("--n", tr.n, "Signal length")->required();
    t->add_option("--batch", tr.batch, "Number of signals");
    t->add_option("--precision", tr.precision, "fp32 or fp64");
    t->add_flag("--inverse", tr.inverse, "Inverse transform (scaled by 1/n)");
    t->add_option("--scheme", tr.scheme, "none, one_sided, two_sided_thread or two_sided_group");
    t->add_option("--delta", tr.delta, "Detection threshold (default: calibrated)");
    t->add_option("--seed", tr.seed, "Seed for threshold calibration");
    t->add_option("--fault-bit", tr.fault.bit, "Flip this bit of one element");
    t->add_option("--fault-signal", tr.fault.signal, "Signal of the flipped element");
    t->add_option("--fault-element", tr.fault.element, "Index of the flipped element");
    t->add_option("--fault-component", tr.fault.component, "re or im");
    t->add_option("--fault-site", tr.fault.site, "input, output or stage<k>");

    InjectArgs inj;
    auto* i = app.add_subcommand("inject", "Run a bit-flip campaign and write ROC and per-run CSVs");
    i->add_option("--runs", inj.runs, "Number of runs");
    i->add_option("--inject-fraction", inj.fraction, "Fraction of runs with a fault");
    i->add_option("--n", inj.n, "Signal length");
    i->add_option("--batch", inj.batch, "Signals per run (one checksum group)");
    i->add_option("--precision", inj.precision, "fp32 or fp64");
    i->add_option("--scheme", inj.scheme, "one_sided, two_sided_thread or two_sided_group");
    i->add_option("--delta-grid", inj.grid, "Comma list or lo:hi:count (default 1e-8:1:33)");
    i->add_option("--seed", inj.seed, "Campaign seed");
    i->add_option("--roc-out", inj.roc_out, "ROC CSV path");
    i->add_option("--records-out", inj.records_out, "Per-run CSV path");
    i->add_option("--bits", inj.bits, "Bit range lo:hi (default: whole word)");
    i->add_option("--threads", inj.threads, "Worker threads");
    i->add_option("--delta", inj.delta, "Operating threshold (default: calibrated)");

    BenchArgs bench;
    auto* b = app.add_subcommand("bench", "Time each scheme and report pass and recompute counts");
    b->add_option("--n", bench.sizes, "Comma list of sizes");
    b->add_option("--batch", bench.batches, "Comma list of batch sizes");
    b->add_option("--schemes", bench.schemes, "Comma list of schemes");
    b->add_option("--precision", bench.precision, "fp32 or fp64");
    b->add_option("--trials", bench.trials, "Trials per configuration");
    b->add_flag("--inject", bench.inject, "Flip an exponent bit in every trial");
    b->add_option("--delta", bench.delta, "Detection threshold");
    b->add_option("--out", bench.out, "CSV path (default: stdout)");

    PropagateArgs prop;
    auto* g = app.add_subcommand("propagate", "Count outputs reached by a single corrupted value");
    g->add_option("--n", prop.n, "Transform size");
    g->add_option("--site", prop.site, "input, output or stage<k> (default: all)");
    g->add_option("--element", prop.element, "Corrupted element");
    g->add_option("--seed", prop.seed, "Input seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (p->parsed()) return cmd_plan(plan);
        if (t->parsed()) return cmd_transform(tr);
        if (i->parsed()) return cmd_inject(inj);
        if (b->parsed()) return cmd_bench(bench);
        if (g->parsed()) return cmd_propagate(prop);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
