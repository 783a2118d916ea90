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

#include <chwhisper/waveform.hpp>

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace chwhisper;
using Catch::Approx;

namespace {

SampledSignal tone(double freq, double rate, std::size_t n, double t0 = 0.0)
{
    SampledSignal s{std::vector<double>(n), rate, t0};
    for (std::size_t k = 0; k < n; ++k)
        s.samples[k] = std::sin(2.0 * std::numbers::pi * freq * s.time(k));
    return s;
}

} // namespace

TEST_CASE("pulse has unit energy, the configured duration and bandwidth", "[waveform]")
{
    const PulseSpec spec;
    const SampledSignal p = make_pulse(spec, kSimulationRate);
    CHECK(p.size() == 200);
    CHECK(energy(p) == Approx(1.0).epsilon(1e-12));
    CHECK(pulse_power(p) == Approx(1.0 / 200.0));
    CHECK(minus10db_bandwidth(p) == Approx(spec.bandwidth_minus10db).epsilon(0.03));

    // spectral peak near the carrier
    const SampledSignal at_carrier = tone(spec.center_frequency, kSimulationRate, p.size());
    const SampledSignal off_band = tone(spec.center_frequency + 2.0 * spec.bandwidth_minus10db, kSimulationRate, p.size());
    double a = 0.0, b = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k)
    {
        a += p.samples[k] * at_carrier.samples[k];
        b += p.samples[k] * off_band.samples[k];
    }
    CHECK(std::abs(a) > 5.0 * std::abs(b));
}

TEST_CASE("pulse spec validation", "[waveform]")
{
    PulseSpec s;
    s.duration = 0.0;
    CHECK_THROWS_AS(make_pulse(s, kSimulationRate), std::invalid_argument);
    s = {};
    s.bandwidth_minus10db = 10e9;
    CHECK_THROWS_AS(make_pulse(s, kSimulationRate), std::invalid_argument);
}

TEST_CASE("noise variance follows the per-sample SNR definition", "[waveform]")
{
    CHECK(noise_variance(20.0, 1.0 / 200.0) == Approx(5e-5));
    CHECK(noise_variance(10.0, 1.0 / 200.0) == Approx(5e-4));
    CHECK(noise_variance(0.0, 2.0) == Approx(2.0));
    CHECK_THROWS_AS(noise_variance(std::nan(""), 1.0), std::invalid_argument);
}

TEST_CASE("add_awgn draws the configured variance deterministically", "[waveform]")
{
    const SampledSignal zero{std::vector<double>(200000, 0.0), kProcessingRate, 0.0};
    const auto a = add_awgn(zero, NoiseSpec{20.0}, 1.0 / 200.0, 11);
    const auto b = add_awgn(zero, NoiseSpec{20.0}, 1.0 / 200.0, 11);
    const auto c = add_awgn(zero, NoiseSpec{20.0}, 1.0 / 200.0, 12);
    CHECK(a.samples == b.samples);
    CHECK(a.samples != c.samples);
    CHECK(energy(a) / static_cast<double>(a.size()) == Approx(5e-5).epsilon(0.02));
}

TEST_CASE("convolve_full on a hand example", "[waveform]")
{
    const SampledSignal a{{1.0, 2.0, 3.0}, 10e9, 1e-9};
    const SampledSignal b{{1.0, -1.0}, 10e9, 0.5e-9};
    const auto c = convolve_full(a, b);
    CHECK(c.samples == std::vector<double>{1.0, 1.0, 1.0, -3.0});
    CHECK(c.t0 == Approx(1.5e-9));
    CHECK_THROWS_AS(convolve_full(a, SampledSignal{{1.0}, 5e9, 0.0}), std::invalid_argument);
}

TEST_CASE("convolve with a CIR shifts and scales", "[waveform]")
{
    const SampledSignal s{{1.0, 2.0}, 10e9, 0.0};
    const ChannelRealization h{{0.0, 0.3e-9}, {1.0, -0.5}};
    const auto y = convolve(s, h);
    CHECK(y.samples == std::vector<double>{1.0, 2.0, 0.0, -0.5, -1.0});
}

TEST_CASE("resample keeps in-band tones", "[waveform]")
{
    SECTION("decimation 100 -> 10 GHz")
    {
        const auto x = tone(2.3e9, kSimulationRate, 20000);
        const auto y = resample(x, kProcessingRate);
        REQUIRE(y.size() == 2000);
        const auto ref = tone(2.3e9, kProcessingRate, 2000);
        double worst = 0.0;
        for (std::size_t k = 200; k < 1800; ++k)
            worst = std::max(worst, std::abs(y.samples[k] - ref.samples[k]));
        CHECK(worst < 2e-3);
    }
    SECTION("interpolation 10 -> 100 GHz")
    {
        const auto x = tone(1.7e9, kProcessingRate, 2000, 3e-9);
        const auto y = resample(x, kSimulationRate);
        REQUIRE(y.size() == 20000);
        CHECK(y.t0 == x.t0);
        const auto ref = tone(1.7e9, kSimulationRate, 20000, 3e-9);
        double worst = 0.0;
        for (std::size_t k = 2000; k < 18000; ++k)
            worst = std::max(worst, std::abs(y.samples[k] - ref.samples[k]));
        CHECK(worst < 2e-3);
    }
    SECTION("same rate is the identity")
    {
        const auto x = tone(1e9, kProcessingRate, 50);
        CHECK(resample(x, kProcessingRate).samples == x.samples);
    }
}

TEST_CASE("resample rejects out-of-band energy when decimating", "[waveform]")
{
    const auto x = tone(7.5e9, kSimulationRate, 20000); // above the 5 GHz output Nyquist
    const auto y = resample(x, kProcessingRate);
    double peak = 0.0;
    for (std::size_t k = 200; k < 1800; ++k)
        peak = std::max(peak, std::abs(y.samples[k]));
    CHECK(peak < 1e-2);
}

TEST_CASE("band-limited CIR matches integer taps on the grid", "[waveform]")
{
    const ChannelRealization h{{0.0, 0.5e-9, 1.2e-9}, {1.0, -0.4, 0.2}};
    const auto bl = sample_cir_bandlimited(h, 10e9);
    const auto nn = sample_cir(h, 10e9);
    REQUIRE(bl.size() == 13);
    for (std::size_t k = 0; k < nn.size(); ++k)
        CHECK(bl[k] == Approx(nn[k]).margin(1e-12));
}

TEST_CASE("cross-correlation paths agree with the direct sum", "[waveform]")
{
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    std::vector<double> rx(6000), ref(1500);
    for (double &v : rx)
        v = g(rng);
    for (double &v : ref)
        v = g(rng);
    const auto fast = detail::cross_correlation(rx, ref); // large enough for the FFT path
    for (std::size_t lag : {0ul, 17ul, 2500ul, 4500ul})
    {
        double acc = 0.0;
        for (std::size_t j = 0; j < ref.size(); ++j)
            acc += rx[lag + j] * ref[j];
        CHECK(fast[lag] == Approx(acc).margin(1e-8));
    }
}

TEST_CASE("correlate_sync recovers a planted lag", "[waveform]")
{
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g;
    SampledSignal ref{std::vector<double>(300), kSimulationRate, 0.0};
    for (double &v : ref.samples)
        v = g(rng);
    SampledSignal rx{std::vector<double>(1000, 0.0), kSimulationRate, -2e-9};
    for (std::size_t k = 0; k < ref.size(); ++k)
        rx.samples[437 + k] = 2.0 * ref.samples[k];
    CHECK(sync_lag(rx, ref) == 437);
    const auto w = correlate_sync(rx, ref);
    CHECK(w.size() == ref.size());
    CHECK(w.t0 == Approx(rx.time(437)));
    CHECK(w.samples[0] == 2.0 * ref.samples[0]);
    CHECK_THROWS_AS(sync_lag(ref, rx), std::invalid_argument);
}

TEST_CASE("time_window zero-fills outside the signal", "[waveform]")
{
    const SampledSignal s{{1.0, 2.0, 3.0}, 10e9, 0.1e-9};
    const auto w = time_window(s, 0.0, 0.5e-9);
    CHECK(w.samples == std::vector<double>{0.0, 1.0, 2.0, 3.0, 0.0});
    CHECK(w.t0 == Approx(0.0).margin(1e-20));
}

TEST_CASE("zero padding moves the origin", "[waveform]")
{
    const SampledSignal s{{1.0, 2.0}, 10e9, 1e-9};
    const SampledSignal p = zero_pad(s, 3, 1);
    CHECK(p.samples == std::vector<double>{0.0, 0.0, 0.0, 1.0, 2.0, 0.0});
    CHECK(p.t0 == Approx(0.7e-9));
    CHECK(p.rate == s.rate);
}
