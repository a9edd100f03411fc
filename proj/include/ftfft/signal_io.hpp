#pragma once

// Raw signal files: interleaved re/im, little-endian IEEE-754, signal-major.

#include <bit>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "ftfft/signal.hpp"

namespace ftfft {

namespace detail {

template <class U>
U byteswap_if_big(U v) {
    if constexpr (std::endian::native == std::endian::big) {
        U r = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) r = (r << 8) | ((v >> (8 * i)) & 0xFF);
        return r;
    }
    return v;
}

template <class T>
using bits_t = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;

}  // namespace detail

template <class T>
SignalBatch<T> decode_signals(const std::vector<char>& bytes, std::size_t n, std::size_t count) {
    constexpr std::size_t word = sizeof(T);
    if (bytes.size() != n * count * 2 * word) throw std::invalid_argument("input length mismatch");
    Signal<T> data(n * count);
    for (std::size_t i = 0; i < data.size(); ++i) {
        detail::bits_t<T> re, im;
        std::memcpy(&re, bytes.data() + (2 * i) * word, word);
        std::memcpy(&im, bytes.data() + (2 * i + 1) * word, word);
        data[i] = {std::bit_cast<T>(detail::byteswap_if_big(re)), std::bit_cast<T>(detail::byteswap_if_big(im))};
    }
    return SignalBatch<T>(n, count, std::move(data));
}

template <class T>
std::vector<char> encode_signals(const SignalBatch<T>& batch) {
    constexpr std::size_t word = sizeof(T);
    std::vector<char> bytes(batch.storage().size() * 2 * word);
    for (std::size_t i = 0; i < batch.storage().size(); ++i) {
        const auto re = detail::byteswap_if_big(std::bit_cast<detail::bits_t<T>>(batch.storage()[i].real()));
        const auto im = detail::byteswap_if_big(std::bit_cast<detail::bits_t<T>>(batch.storage()[i].imag()));
        std::memcpy(bytes.data() + (2 * i) * word, &re, word);
        std::memcpy(bytes.data() + (2 * i + 1) * word, &im, word);
    }
    return bytes;
}

inline std::vector<char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::vector<char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
}

inline void write_text(const std::string& path, const std::string& text) {
    write_file(path, std::vector<char>(text.begin(), text.end()));
}

/// Reads `count` signals of length n. Throws "input length mismatch" when the
/// file size disagrees.
template <class T>
SignalBatch<T> read_signals(const std::string& path, std::size_t n, std::size_t count) {
    return decode_signals<T>(read_file(path), n, count);
}

template <class T>
void write_signals(const std::string& path, const SignalBatch<T>& batch) {
    write_file(path, encode_signals(batch));
}

}  // namespace ftfft
