#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ftfft {

enum class Precision { FP32, FP64 };

inline std::string_view to_string(Precision p) { return p == Precision::FP32 ? "fp32" : "fp64"; }

inline Precision parse_precision(std::string_view s) {
    if (s == "fp32" || s == "float") return Precision::FP32;
    if (s == "fp64" || s == "double") return Precision::FP64;
    throw std::invalid_argument("unknown precision '" + std::string(s) + "'");
}

template <class T>
constexpr Precision precision_of() {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
    return std::is_same_v<T, float> ? Precision::FP32 : Precision::FP64;
}

/// Largest signal length accepted for execution. Plans can be made for larger sizes.
inline constexpr std::size_t kMaxSignalLength = std::size_t{1} << 22;
inline constexpr std::size_t kMaxBatch = 1024;

constexpr bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

constexpr unsigned log2_exact(std::size_t n) {
    unsigned e = 0;
    while ((std::size_t{1} << e) < n) ++e;
    return e;
}

template <class T>
using Signal = std::vector<std::complex<T>>;

/// Signal-major batch of equal-length complex signals.
template <class T>
class SignalBatch {
public:
    SignalBatch() = default;

    SignalBatch(std::size_t n, std::size_t count) : SignalBatch(n, count, Signal<T>(n * count)) {}

    SignalBatch(std::size_t n, std::size_t count, Signal<T> data)
        : n_(n), count_(count), data_(std::move(data)) {
        if (!is_power_of_two(n) || n < 2) throw std::invalid_argument("size must be a power of two");
        if (n > kMaxSignalLength) throw std::invalid_argument("size exceeds the supported maximum of 2^22");
        if (count < 1 || count > kMaxBatch) throw std::invalid_argument("batch must be within 1..1024");
        if (data_.size() != n * count) throw std::invalid_argument("input length mismatch");
    }

    std::size_t n() const { return n_; }
    std::size_t count() const { return count_; }

    std::span<std::complex<T>> signal(std::size_t b) { return {data_.data() + b * n_, n_}; }
    std::span<const std::complex<T>> signal(std::size_t b) const { return {data_.data() + b * n_, n_}; }

    std::span<std::complex<T>> data() { return data_; }
    std::span<const std::complex<T>> data() const { return data_; }
    Signal<T>& storage() { return data_; }
    const Signal<T>& storage() const { return data_; }

    friend bool operator==(const SignalBatch&, const SignalBatch&) = default;

private:
    std::size_t n_ = 0;
    std::size_t count_ = 0;
    Signal<T> data_;
};

template <class T>
bool all_finite(std::span<const std::complex<T>> x) {
    for (const auto& v : x)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
}

/// ||a - b||_2 / ||b||_2, evaluated in double. Returns +inf on non-finite input.
template <class A, class B>
double relative_l2(std::span<const std::complex<A>> a, std::span<const std::complex<B>> b) {
    if (a.size() != b.size()) throw std::invalid_argument("relative_l2: length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const std::complex<double> x(a[i].real(), a[i].imag());
        const std::complex<double> y(b[i].real(), b[i].imag());
        num += std::norm(x - y);
        den += std::norm(y);
    }
    if (!std::isfinite(num) || !std::isfinite(den)) return std::numeric_limits<double>::infinity();
    if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::sqrt(num / den);
}

template <class A, class B>
double relative_l2(const std::vector<std::complex<A>>& a, const std::vector<std::complex<B>>& b) {
    return relative_l2(std::span<const std::complex<A>>(a), std::span<const std::complex<B>>(b));
}

/// Oracle tolerances (relative L2) against the O(N^2) reference.
template <class T>
constexpr double oracle_tolerance() {
    return std::is_same_v<T, float> ? 1e-5 : 1e-10;
}

}  // namespace ftfft
