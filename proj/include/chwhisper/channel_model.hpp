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

#ifndef CHWHISPER_CHANNEL_MODEL_HPP
#define CHWHISPER_CHANNEL_MODEL_HPP

#include "seed.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace chwhisper {

// Sparse multipath channel impulse response: h(t) = sum_k x_k delta(t - tau_k).
// Delays are excess delays in seconds, sorted ascending, first entry 0.
struct ChannelRealization
{
    std::vector<double> delays;     // seconds
    std::vector<double> amplitudes; // dimensionless, signed

    std::size_t path_count() const { return delays.size(); }

    void validate() const
    {
        if (delays.empty())
            throw std::invalid_argument("ChannelRealization: at least one path required");
        if (delays.size() != amplitudes.size())
            throw std::invalid_argument("ChannelRealization: delays and amplitudes differ in length");
        if (delays.front() < 0.0)
            throw std::invalid_argument("ChannelRealization: negative delay");
        for (std::size_t k = 1; k < delays.size(); ++k)
            if (!(delays[k] > delays[k - 1]))
                throw std::invalid_argument("ChannelRealization: delays must be strictly increasing");
    }
};

enum class FadingLaw
{
    lognormal,
    nakagami_approx
};

// Saleh-Valenzuela parameters. Defaults are the IEEE 802.15.4a CM1
// (residential LOS) values, with a single ray arrival rate instead of the
// two-rate mixture and the excess delay truncated to the observation window.
struct ChannelModelParams
{
    double cluster_arrival_rate = 0.047; // 1/ns
    double ray_arrival_rate = 1.54;      // 1/ns
    double cluster_decay = 22.61;        // ns
    double ray_decay = 12.53;            // ns
    double max_excess_delay = 50.0;      // ns
    FadingLaw amplitude_fading_law = FadingLaw::nakagami_approx;
    double cluster_shadowing_db = 2.75;
    double lognormal_spread_db = 4.8;   // per-ray spread, lognormal law only
    double nakagami_m = 1.17;           // m0 = 0.67 dB
    double normalization_rate = 100e9;  // Hz, grid on which unit energy holds

    void validate() const
    {
        if (!(max_excess_delay > 0.0))
            throw std::invalid_argument("ChannelModelParams: max_excess_delay must be > 0");
        if (!(cluster_arrival_rate > 0.0) || !(ray_arrival_rate > 0.0))
            throw std::invalid_argument("ChannelModelParams: arrival rates must be > 0");
        if (!(cluster_decay > 0.0) || !(ray_decay > 0.0))
            throw std::invalid_argument("ChannelModelParams: decay constants must be > 0");
        if (!(nakagami_m >= 0.5))
            throw std::invalid_argument("ChannelModelParams: nakagami_m must be >= 0.5");
        if (!(lognormal_spread_db >= 0.0) || !(cluster_shadowing_db >= 0.0))
            throw std::invalid_argument("ChannelModelParams: spreads must be >= 0");
        if (!(normalization_rate > 0.0))
            throw std::invalid_argument("ChannelModelParams: normalization_rate must be > 0");
    }
};

inline std::string to_string(FadingLaw law)
{
    return law == FadingLaw::lognormal ? "lognormal" : "nakagami-approx";
}

inline FadingLaw fading_law_from_string(const std::string &s)
{
    if (s == "lognormal")
        return FadingLaw::lognormal;
    if (s == "nakagami-approx" || s == "nakagami")
        return FadingLaw::nakagami_approx;
    throw std::invalid_argument("unknown fading law '" + s + "'");
}

// Tap vector of the CIR on a uniform grid: each path lands on the nearest
// sample, colliding paths add. `length == 0` sizes the vector to the last tap.
inline std::vector<double> sample_cir(const ChannelRealization &cir, double rate, std::size_t length = 0)
{
    if (!(rate > 0.0))
        throw std::invalid_argument("sample_cir: rate must be > 0");
    if (cir.delays.size() != cir.amplitudes.size())
        throw std::invalid_argument("sample_cir: malformed realization");

    std::size_t last = 0;
    for (double tau : cir.delays)
        last = std::max(last, static_cast<std::size_t>(std::llround(tau * rate)));
    if (length == 0)
        length = cir.delays.empty() ? 1 : last + 1;

    std::vector<double> taps(length, 0.0);
    for (std::size_t k = 0; k < cir.delays.size(); ++k)
    {
        const auto n = static_cast<std::size_t>(std::llround(cir.delays[k] * rate));
        if (n < length)
            taps[n] += cir.amplitudes[k];
    }
    return taps;
}

inline double discrete_energy(const ChannelRealization &cir, double rate)
{
    const auto taps = sample_cir(cir, rate);
    return std::inner_product(taps.begin(), taps.end(), taps.begin(), 0.0);
}

// Scales amplitudes so the CIR sampled at `rate` has unit energy.
inline ChannelRealization normalize_energy(ChannelRealization cir, double rate)
{
    const double energy = discrete_energy(cir, rate);
    if (!(energy > 0.0))
        throw std::invalid_argument("normalize_energy: CIR has zero energy");
    const double g = 1.0 / std::sqrt(energy);
    for (double &a : cir.amplitudes)
        a *= g;
    return cir;
}

/// Draws one energy-normalized realization.
///
/// Clusters arrive as a Poisson process of rate `cluster_arrival_rate`, rays
/// inside each cluster as a Poisson process of rate `ray_arrival_rate`, both
/// starting with an arrival at the cluster onset. The mean ray power decays
/// as exp(-T_l / cluster_decay) * exp(-tau_kl / ray_decay), with lognormal
/// cluster shadowing and per-ray small-scale fading. Signs are +/- with
/// equal probability. The first ray sits at excess delay 0.
///
/// The result is a pure function of (params, seed).
inline ChannelRealization generate(const ChannelModelParams &params, Seed seed)
{
    params.validate();

    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> cluster_gap(params.cluster_arrival_rate);
    std::exponential_distribution<double> ray_gap(params.ray_arrival_rate);
    std::normal_distribution<double> std_normal(0.0, 1.0);
    std::gamma_distribution<double> nakagami_power(params.nakagami_m, 1.0 / params.nakagami_m);
    std::bernoulli_distribution sign(0.5);

    std::vector<std::pair<double, double>> rays; // (delay ns, amplitude)
    for (double cluster_t = 0.0; cluster_t < params.max_excess_delay; cluster_t += cluster_gap(rng))
    {
        const double shadow = std::pow(10.0, params.cluster_shadowing_db * std_normal(rng) / 10.0);
        for (double ray_t = 0.0; cluster_t + ray_t < params.max_excess_delay; ray_t += ray_gap(rng))
        {
            const double mean_power = std::exp(-cluster_t / params.cluster_decay) *
                                      std::exp(-ray_t / params.ray_decay) * shadow;
            double power = mean_power;
            if (params.amplitude_fading_law == FadingLaw::lognormal)
                power *= std::pow(10.0, params.lognormal_spread_db * std_normal(rng) / 10.0);
            else
                power *= nakagami_power(rng);
            const double amplitude = std::sqrt(power) * (sign(rng) ? 1.0 : -1.0);
            rays.emplace_back(cluster_t + ray_t, amplitude);
        }
    }

    std::sort(rays.begin(), rays.end());

    ChannelRealization cir;
    for (const auto &[delay_ns, amplitude] : rays)
    {
        const double delay = delay_ns * 1e-9;
        if (!cir.delays.empty() && delay == cir.delays.back())
        {
            cir.amplitudes.back() += amplitude;
            continue;
        }
        cir.delays.push_back(delay);
        cir.amplitudes.push_back(amplitude);
    }

    // Excess delay: the first arrival defines t = 0 (already 0 by construction).
    const double offset = cir.delays.front();
    for (double &tau : cir.delays)
        tau -= offset;

    return normalize_energy(std::move(cir), params.normalization_rate);
}

inline void write_cir_csv(std::ostream &os, const ChannelRealization &cir)
{
    os << "delay_ns,amplitude\n";
    os.precision(17);
    for (std::size_t k = 0; k < cir.delays.size(); ++k)
        os << cir.delays[k] * 1e9 << ',' << cir.amplitudes[k] << '\n';
}

} // namespace chwhisper

#endif
