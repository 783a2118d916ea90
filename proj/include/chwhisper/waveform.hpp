// SPDX-License-Identifier: Apache-2.0
//
// chwhisper - cooperative physical-layer group key generation over IR-UWB channels
// Copyright (C) 2026 The chwhisper authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef CHWHISPER_WAVEFORM_HPP
#define CHWHISPER_WAVEFORM_HPP

#include "channel_model.hpp"
#include "seed.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <vector>

namespace chwhisper {

inline constexpr double kSimulationRate = 100e9; // pseudo-analog grid
inline constexpr double kProcessingRate = 10e9;  // receiver sampling rate F_s

// Uniformly sampled real waveform; sample n sits at t0 + n / rate.
struct SampledSignal
{
    std::vector<double> samples;
    double rate = 0.0; // Hz
    double t0 = 0.0;   // seconds

    std::size_t size() const { return samples.size(); }
    double duration() const { return static_cast<double>(samples.size()) / rate; }
    double time(std::size_t n) const { return t0 + static_cast<double>(n) / rate; }

    void validate() const
    {
        if (!(rate > 0.0))
            throw std::invalid_argument("SampledSignal: rate must be > 0");
        if (samples.empty())
            throw std::invalid_argument("SampledSignal: no samples");
    }
};

inline double energy(const SampledSignal &sig)
{
    return std::inner_product(sig.samples.begin(), sig.samples.end(), sig.samples.begin(), 0.0);
}

inline double peak_abs(const SampledSignal &sig)
{
    double m = 0.0;
    for (double v : sig.samples)
        m = std::max(m, std::abs(v));
    return m;
}

enum class PulseShape
{
    gaussian_modulated_sine
};

struct PulseSpec
{
    double center_frequency = 4.5e9;   // Hz
    double bandwidth_minus10db = 1e9;  // Hz
    double duration = 2e-9;            // T_p, seconds
    PulseShape shape = PulseShape::gaussian_modulated_sine;

    void validate() const
    {
        if (!(duration > 0.0))
            throw std::invalid_argument("PulseSpec: duration must be > 0");
        if (!(center_frequency > 0.0) || !(bandwidth_minus10db > 0.0))
            throw std::invalid_argument("PulseSpec: frequencies must be > 0");
        if (bandwidth_minus10db / 2.0 >= center_frequency)
            throw std::invalid_argument("PulseSpec: band reaches DC");
    }
};

struct NoiseSpec
{
    double snr_db = 20.0;
};

namespace detail {

inline double sinc(double x)
{
    if (x == 0.0)
        return 1.0;
    const double px = std::numbers::pi * x;
    return std::sin(px) / px;
}

inline constexpr double kSincLobes = 32.0;

// Raised-cosine tapered sinc, support |x| < kSincLobes.
inline double tapered_sinc(double x)
{
    const double u = x / kSincLobes;
    if (std::abs(u) >= 1.0)
        return 0.0;
    return sinc(x) * 0.5 * (1.0 + std::cos(std::numbers::pi * u));
}

inline std::vector<double> gaussian_sine(const PulseSpec &spec, double rate, double sigma)
{
    const auto n = static_cast<std::size_t>(std::llround(spec.duration * rate));
    std::vector<double> p(std::max<std::size_t>(n, 1));
    const double mid = spec.duration / 2.0;
    for (std::size_t k = 0; k < p.size(); ++k)
    {
        const double t = static_cast<double>(k) / rate - mid;
        p[k] = std::exp(-t * t / (2.0 * sigma * sigma)) *
               std::sin(2.0 * std::numbers::pi * spec.center_frequency * t);
    }
    const double e = std::inner_product(p.begin(), p.end(), p.begin(), 0.0);
    for (double &v : p)
        v /= std::sqrt(e);
    return p;
}

} // namespace detail

/// Width of the band where the power spectrum stays within 10 dB of its
/// peak, measured on a zero-padded DFT of the samples. Returns Hz.
inline double minus10db_bandwidth(const SampledSignal &sig, std::size_t fft_size = 1u << 14)
{
    sig.validate();
    fft_size = std::max(fft_size, sig.size());
    std::vector<double> padded(fft_size, 0.0);
    std::copy(sig.samples.begin(), sig.samples.end(), padded.begin());
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> spectrum;
    fft.fwd(spectrum, padded);

    const std::size_t half = fft_size / 2;
    std::vector<double> psd(half + 1);
    for (std::size_t k = 0; k <= half; ++k)
        psd[k] = std::norm(spectrum[k]);
    const auto peak = static_cast<std::size_t>(std::max_element(psd.begin(), psd.end()) - psd.begin());
    const double threshold = psd[peak] / 10.0;

    // Walk out from the peak to the first crossings, interpolating linearly in power.
    auto crossing = [&](int step) {
        std::size_t k = peak;
        while (true)
        {
            const std::size_t next = k + step;
            if ((step < 0 && k == 0) || (step > 0 && k == half))
                return static_cast<double>(k);
            if (psd[next] < threshold)
            {
                const double frac = (psd[k] - threshold) / (psd[k] - psd[next]);
                return static_cast<double>(k) + step * frac;
            }
            k = next;
        }
    };
    const double bins = crossing(+1) - crossing(-1);
    return bins * sig.rate / static_cast<double>(fft_size);
}

/// Unit-energy Gaussian-windowed sine of support [0, T_p].
///
/// The Gaussian width is tuned by bisection so that the -10 dB bandwidth
/// of the truncated, sampled pulse matches `spec.bandwidth_minus10db`.
inline SampledSignal make_pulse(const PulseSpec &spec, double rate)
{
    spec.validate();
    if (rate < 2.0 * (spec.center_frequency + spec.bandwidth_minus10db / 2.0))
        throw std::invalid_argument("make_pulse: rate below twice the highest pulse frequency");

    // Untruncated Gaussian: PSD exp(-4 pi^2 sigma^2 f^2) is -10 dB at f = B/2.
    const double sigma0 = std::sqrt(std::log(10.0)) / (std::numbers::pi * spec.bandwidth_minus10db);
    auto width_of = [&](double sigma) {
        return minus10db_bandwidth({detail::gaussian_sine(spec, rate, sigma), rate, 0.0});
    };

    // Bandwidth decreases monotonically with sigma over this bracket.
    double lo = 0.25 * sigma0, hi = 4.0 * sigma0;
    for (int it = 0; it < 40; ++it)
    {
        const double mid = 0.5 * (lo + hi);
        if (width_of(mid) > spec.bandwidth_minus10db)
            lo = mid;
        else
            hi = mid;
    }
    return {detail::gaussian_sine(spec, rate, 0.5 * (lo + hi)), rate, 0.0};
}

// Mean power of the pulse over its support, (1/T_p) * sum p^2 / rate, in
// per-sample units: the mean squared sample value over the pulse.
inline double pulse_power(const SampledSignal &pulse)
{
    pulse.validate();
    return energy(pulse) / static_cast<double>(pulse.size());
}

inline double noise_variance(double snr_db, double pulse_power)
{
    if (!std::isfinite(snr_db))
        throw std::invalid_argument("noise_variance: SNR must be finite");
    return pulse_power / std::pow(10.0, snr_db / 10.0);
}

/// Adds white Gaussian noise of per-sample variance P_pulse / 10^(snr/10).
inline SampledSignal add_awgn(SampledSignal sig, const NoiseSpec &noise, double pulse_power, Seed seed)
{
    const double sigma = std::sqrt(noise_variance(noise.snr_db, pulse_power));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    for (double &v : sig.samples)
        v += gauss(rng);
    return sig;
}

// Pulse power is taken from the spec synthesized on the simulation grid.
inline SampledSignal add_awgn(SampledSignal sig, const NoiseSpec &noise, const PulseSpec &pulse, Seed seed)
{
    return add_awgn(std::move(sig), noise, pulse_power(make_pulse(pulse, kSimulationRate)), seed);
}

inline void require_same_rate(double a, double b, const char *who)
{
    if (std::abs(a - b) > 1e-9 * std::max(a, b))
        throw std::invalid_argument(std::string(who) + ": sample rates differ");
}

/// Full linear convolution; output starts at a.t0 + b.t0.
inline SampledSignal convolve_full(const SampledSignal &a, const SampledSignal &b)
{
    a.validate();
    b.validate();
    require_same_rate(a.rate, b.rate, "convolve_full");
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t j = 0; j < b.size(); ++j)
    {
        const double w = b.samples[j];
        if (w == 0.0)
            continue;
        for (std::size_t i = 0; i < a.size(); ++i)
            out[i + j] += w * a.samples[i];
    }
    return {std::move(out), a.rate, a.t0 + b.t0};
}

/// Passes `a` through the multipath channel: each path is snapped to the
/// nearest sample of `a`'s grid.
inline SampledSignal convolve(const SampledSignal &a, const ChannelRealization &cir)
{
    a.validate();
    cir.validate();
    const auto taps = sample_cir(cir, a.rate);
    std::vector<double> out(a.size() + taps.size() - 1, 0.0);
    for (std::size_t j = 0; j < taps.size(); ++j)
    {
        const double w = taps[j];
        if (w == 0.0)
            continue;
        for (std::size_t i = 0; i < a.size(); ++i)
            out[i + j] += w * a.samples[i];
    }
    return {std::move(out), a.rate, a.t0};
}

/// Band-limited tap vector of the CIR at `rate`: every path contributes a
/// tapered sinc at its exact delay, so sub-sample delays are kept.
inline std::vector<double> sample_cir_bandlimited(const ChannelRealization &cir, double rate, std::size_t length = 0)
{
    cir.validate();
    if (length == 0)
        length = static_cast<std::size_t>(std::ceil(cir.delays.back() * rate)) + 1;
    std::vector<double> taps(length, 0.0);
    for (std::size_t k = 0; k < cir.delays.size(); ++k)
    {
        const double x = cir.delays[k] * rate;
        const auto lo = static_cast<long>(std::ceil(x - detail::kSincLobes));
        const auto hi = static_cast<long>(std::floor(x + detail::kSincLobes));
        for (long n = std::max(0L, lo); n <= hi && n < static_cast<long>(length); ++n)
            taps[static_cast<std::size_t>(n)] += cir.amplitudes[k] * detail::tapered_sinc(static_cast<double>(n) - x);
    }
    return taps;
}

/// `sig` with `before` and `after` zeros added; the time origin moves back.
inline SampledSignal zero_pad(const SampledSignal &sig, std::size_t before, std::size_t after)
{
    sig.validate();
    SampledSignal out{std::vector<double>(sig.size() + before + after, 0.0), sig.rate,
                      sig.t0 - static_cast<double>(before) / sig.rate};
    std::copy(sig.samples.begin(), sig.samples.end(), out.samples.begin() + static_cast<long>(before));
    return out;
}

/// Sinc interpolation onto a new grid with the same time origin. The kernel
/// is truncated to +/-32 lobes with a raised-cosine taper; when decimating,
/// the kernel is widened so the cutoff sits at the new Nyquist frequency.
inline SampledSignal resample(const SampledSignal &sig, double new_rate)
{
    sig.validate();
    if (!(new_rate > 0.0))
        throw std::invalid_argument("resample: new rate must be > 0");

    const double ratio = new_rate / sig.rate;
    if (std::abs(ratio - 1.0) < 1e-12)
        return sig;
    const double cutoff = std::min(1.0, ratio); // relative to the input Nyquist
    const auto out_len = static_cast<std::size_t>(
        std::max<long long>(1, std::llround(static_cast<double>(sig.size()) * ratio)));
    const double reach = detail::kSincLobes / cutoff; // input samples

    // Taps depend only on the fractional position; rational ratios repeat
    // a few phases, so their weights are computed once.
    const auto half = static_cast<long>(std::ceil(reach)) + 1;
    std::map<long long, std::vector<double>> phases;
    auto weights = [&](double frac) -> const std::vector<double> & {
        auto [it, fresh] = phases.try_emplace(std::llround(frac * 1e12));
        if (fresh)
        {
            it->second.resize(static_cast<std::size_t>(2 * half + 1));
            for (long j = -half; j <= half; ++j)
                it->second[static_cast<std::size_t>(j + half)] =
                    cutoff * detail::tapered_sinc(cutoff * (frac - static_cast<double>(j)));
        }
        return it->second;
    };

    std::vector<double> out(out_len, 0.0);
    const auto n_in = static_cast<long>(sig.size());
    for (std::size_t m = 0; m < out_len; ++m)
    {
        const double x = static_cast<double>(m) / ratio; // position in input samples
        const double base = std::floor(x);
        const auto b = static_cast<long>(base);
        const auto lo = std::max(-half, -b);
        const auto hi = std::min(half, n_in - 1 - b);
        if (lo > hi)
            continue;
        const std::vector<double> &w = weights(x - base);
        double acc = 0.0;
        for (long j = lo; j <= hi; ++j)
            acc += sig.samples[static_cast<std::size_t>(b + j)] * w[static_cast<std::size_t>(j + half)];
        out[m] = acc;
        if (phases.size() > 4096)
            phases.clear();
    }
    return {std::move(out), new_rate, sig.t0};
}

namespace detail {

// corr[lag] = sum_j received[lag + j] * reference[j], lag = 0 .. R - M.
inline std::vector<double> cross_correlation(const std::vector<double> &received, const std::vector<double> &reference)
{
    const std::size_t lags = received.size() - reference.size() + 1;
    std::vector<double> corr(lags, 0.0);
    if (lags * reference.size() <= (1u << 22))
    {
        for (std::size_t lag = 0; lag < lags; ++lag)
        {
            double acc = 0.0;
            for (std::size_t j = 0; j < reference.size(); ++j)
                acc += received[lag + j] * reference[j];
            corr[lag] = acc;
        }
        return corr;
    }

    std::size_t n = 1;
    while (n < received.size() + reference.size())
        n <<= 1;
    std::vector<double> a(n, 0.0), b(n, 0.0);
    std::copy(received.begin(), received.end(), a.begin());
    std::copy(reference.begin(), reference.end(), b.begin());
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> fa, fb;
    fft.fwd(fa, a);
    fft.fwd(fb, b);
    for (std::size_t k = 0; k < fa.size(); ++k)
        fa[k] *= std::conj(fb[k]);
    std::vector<double> c;
    fft.inv(c, fa);
    std::copy(c.begin(), c.begin() + static_cast<long>(lags), corr.begin());

    // FFT rounding can reorder near-equal peaks: re-evaluate the contenders exactly.
    const double top = *std::max_element(corr.begin(), corr.end());
    const double slack = 1e-9 * (std::sqrt(std::inner_product(received.begin(), received.end(), received.begin(), 0.0) *
                                           std::inner_product(reference.begin(), reference.end(), reference.begin(), 0.0)) +
                                 std::abs(top));
    for (std::size_t lag = 0; lag < lags; ++lag)
    {
        if (corr[lag] < top - slack)
            continue;
        double acc = 0.0;
        for (std::size_t j = 0; j < reference.size(); ++j)
            acc += received[lag + j] * reference[j];
        corr[lag] = acc;
    }
    return corr;
}

} // namespace detail

/// Lag (in samples) maximizing the cross-correlation of `reference` against
/// `received`; ties go to the smallest lag.
inline std::size_t sync_lag(const SampledSignal &received, const SampledSignal &reference)
{
    received.validate();
    reference.validate();
    require_same_rate(received.rate, reference.rate, "correlate_sync");
    if (received.size() < reference.size())
        throw std::invalid_argument("correlate_sync: received shorter than reference");
    const auto corr = detail::cross_correlation(received.samples, reference.samples);
    return static_cast<std::size_t>(std::max_element(corr.begin(), corr.end()) - corr.begin());
}

/// Idealized correlation synchronization: the window of `received` with the
/// length of `reference` starting at the best lag.
inline SampledSignal correlate_sync(const SampledSignal &received, const SampledSignal &reference)
{
    const std::size_t lag = sync_lag(received, reference);
    SampledSignal out;
    out.rate = received.rate;
    out.t0 = received.time(lag);
    out.samples.assign(received.samples.begin() + static_cast<long>(lag),
                       received.samples.begin() + static_cast<long>(lag + reference.size()));
    return out;
}

/// Samples of `sig` covering [start, start + duration) on its own grid,
/// zero-filled where the signal is absent.
inline SampledSignal time_window(const SampledSignal &sig, double start, double duration)
{
    sig.validate();
    const auto n = static_cast<std::size_t>(std::llround(duration * sig.rate));
    const auto first = std::llround((start - sig.t0) * sig.rate);
    SampledSignal out{std::vector<double>(n, 0.0), sig.rate, sig.t0 + static_cast<double>(first) / sig.rate};
    for (std::size_t k = 0; k < n; ++k)
    {
        const long long src = first + static_cast<long long>(k);
        if (src >= 0 && src < static_cast<long long>(sig.size()))
            out.samples[k] = sig.samples[static_cast<std::size_t>(src)];
    }
    return out;
}

inline void write_signal_csv(std::ostream &os, const SampledSignal &sig)
{
    os << "t,value\n";
    os.precision(17);
    for (std::size_t n = 0; n < sig.size(); ++n)
        os << sig.time(n) << ',' << sig.samples[n] << '\n';
}

} // namespace chwhisper

#endif
