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

#ifndef CHWHISPER_CIR_ESTIMATOR_HPP
#define CHWHISPER_CIR_ESTIMATOR_HPP

#include "channel_model.hpp"
#include "waveform.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace chwhisper {

struct EstimatorConfig
{
    std::size_t max_paths = 40;
    double residual_energy_fraction = 0.05;
    PulseSpec pulse{};
    double rate = kProcessingRate; // F_s

    void validate() const
    {
        if (max_paths == 0)
            throw std::invalid_argument("EstimatorConfig: max_paths must be positive");
        if (!(residual_energy_fraction > 0.0 && residual_energy_fraction < 1.0))
            throw std::invalid_argument("EstimatorConfig: residual_energy_fraction must lie in (0, 1)");
        if (!(rate > 0.0))
            throw std::invalid_argument("EstimatorConfig: rate must be > 0");
        pulse.validate();
    }
};

/// The pulse as a receiver sampling at `rate` sees it: synthesized on the
/// simulation grid and band-limited to the receiver's Nyquist frequency.
/// The filter rings on both sides of the pulse; the template keeps those
/// tails and starts before the pulse, so `t0` is zero or negative.
inline SampledSignal received_template(const PulseSpec &pulse, double rate)
{
    const SampledSignal analog = make_pulse(pulse, kSimulationRate);
    if (rate == kSimulationRate)
        return analog;
    const double ratio = kSimulationRate / rate;
    const auto step = static_cast<std::size_t>(std::llround(ratio));
    if (step == 0 || std::abs(ratio - static_cast<double>(step)) > 1e-9)
        throw std::invalid_argument("received_template: rate must divide the simulation rate");

    const auto pad = step * static_cast<std::size_t>(2.0 * detail::kSincLobes);
    const SampledSignal r = resample(zero_pad(analog, pad, pad), rate);

    const double floor = 1e-12 * peak_abs(r);
    std::size_t first = 0, last = r.size();
    while (first < last && std::abs(r.samples[first]) <= floor)
        ++first;
    while (last > first && std::abs(r.samples[last - 1]) <= floor)
        --last;
    const auto lead = static_cast<long>(pad / step) - static_cast<long>(first);
    return {std::vector<double>(r.samples.begin() + static_cast<long>(first), r.samples.begin() + static_cast<long>(last)),
            rate, -static_cast<double>(std::max(0L, lead)) / rate};
}

struct CirEstimate
{
    ChannelRealization absolute;        // delays relative to y.t0
    ChannelRealization excess;          // shifted so the first delay is 0
    double offset = 0.0;                // first detected delay, seconds
    std::vector<double> residual_trace; // residual energy after each iteration
};

/// Search-subtract-readjust multipath extraction.
///
/// Each iteration picks the delay maximizing the normalized |correlation| of
/// the residual with the shifted template, estimates its amplitude by scalar
/// projection and subtracts it, then re-fits all amplitudes jointly by least
/// squares on the original observation. Stops once the residual energy falls
/// below `residual_energy_fraction` of the input energy or `max_paths` paths
/// are found. Delays already detected are excluded from later searches.
inline CirEstimate estimate_cir_detailed(const SampledSignal &y, const SampledSignal &templ, const EstimatorConfig &cfg)
{
    cfg.validate();
    y.validate();
    templ.validate();
    require_same_rate(y.rate, cfg.rate, "estimate_cir");
    require_same_rate(templ.rate, cfg.rate, "estimate_cir");

    const auto n = static_cast<Eigen::Index>(y.size());
    const auto len = static_cast<Eigen::Index>(templ.size());
    const auto lead = static_cast<Eigen::Index>(std::llround(-templ.t0 * cfg.rate));
    if (lead < 0 || lead >= len)
        throw std::invalid_argument("estimate_cir: template must start at or before the pulse");
    const Eigen::Map<const Eigen::VectorXd> obs(y.samples.data(), n);
    const Eigen::Map<const Eigen::VectorXd> p(templ.samples.data(), len);

    const double e0 = obs.squaredNorm();
    if (!(e0 > 0.0))
        throw std::invalid_argument("estimate_cir: observation has zero energy");

    // A path at delay index d puts template sample j at d - lead + j; only
    // the part inside the observation counts.
    struct Span
    {
        Eigen::Index y0, p0, count;
    };
    auto span = [&](Eigen::Index d) {
        const Eigen::Index start = d - lead;
        const Eigen::Index p0 = std::max<Eigen::Index>(0, -start);
        const Eigen::Index y0 = start + p0;
        return Span{y0, p0, std::max<Eigen::Index>(0, std::min(len - p0, n - y0))};
    };

    Eigen::VectorXd prefix(len + 1);
    prefix(0) = 0.0;
    for (Eigen::Index k = 0; k < len; ++k)
        prefix(k + 1) = prefix(k) + p(k) * p(k);
    Eigen::VectorXd col_norm2(n);
    for (Eigen::Index d = 0; d < n; ++d)
    {
        const Span s = span(d);
        col_norm2(d) = prefix(s.p0 + s.count) - prefix(s.p0);
    }
    const double min_norm2 = 1e-6 * p.squaredNorm();

    auto column = [&](Eigen::Index d) {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
        const Span s = span(d);
        c.segment(s.y0, s.count) = p.segment(s.p0, s.count);
        return c;
    };
    auto correlate = [&](const Eigen::VectorXd &r, Eigen::Index d) {
        const Span s = span(d);
        return r.segment(s.y0, s.count).dot(p.segment(s.p0, s.count));
    };

    std::vector<Eigen::Index> delays;
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    Eigen::VectorXd residual = obs;
    Eigen::VectorXd amps;
    CirEstimate out;

    while (delays.size() < cfg.max_paths && residual.squaredNorm() >= cfg.residual_energy_fraction * e0)
    {
        // (1) search
        Eigen::Index best = -1;
        double best_score = -1.0;
        for (Eigen::Index d = 0; d < n; ++d)
        {
            if (taken[static_cast<std::size_t>(d)] || col_norm2(d) < min_norm2)
                continue;
            const double score = std::abs(correlate(residual, d)) / std::sqrt(col_norm2(d));
            if (score > best_score)
            {
                best_score = score;
                best = d;
            }
        }
        if (best < 0)
            break;

        // (2) scalar projection and (3) subtract
        const double a = correlate(residual, best) / col_norm2(best);
        residual -= a * column(best);
        taken[static_cast<std::size_t>(best)] = true;
        delays.push_back(best);

        // (4) readjust all amplitudes on the original observation
        Eigen::MatrixXd basis(n, static_cast<Eigen::Index>(delays.size()));
        for (std::size_t k = 0; k < delays.size(); ++k)
            basis.col(static_cast<Eigen::Index>(k)) = column(delays[k]);
        amps = basis.colPivHouseholderQr().solve(obs);
        residual = obs - basis * amps;
        out.residual_trace.push_back(residual.squaredNorm());
    }

    std::vector<std::size_t> order(delays.size());
    for (std::size_t k = 0; k < order.size(); ++k)
        order[k] = k;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return delays[a] < delays[b]; });

    for (std::size_t k : order)
    {
        out.absolute.delays.push_back(static_cast<double>(delays[k]) / cfg.rate);
        out.absolute.amplitudes.push_back(amps(static_cast<Eigen::Index>(k)));
    }
    out.offset = out.absolute.delays.front();
    out.excess = out.absolute;
    for (double &tau : out.excess.delays)
        tau -= out.offset;
    return out;
}

inline ChannelRealization estimate_cir(const SampledSignal &y, const SampledSignal &templ, const EstimatorConfig &cfg)
{
    return estimate_cir_detailed(y, templ, cfg).excess;
}

inline ChannelRealization estimate_cir(const SampledSignal &y, const EstimatorConfig &cfg)
{
    cfg.validate();
    return estimate_cir(y, received_template(cfg.pulse, cfg.rate), cfg);
}

} // namespace chwhisper

#endif
