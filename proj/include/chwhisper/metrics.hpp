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

#ifndef CHWHISPER_METRICS_HPP
#define CHWHISPER_METRICS_HPP

#include "waveform.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace chwhisper {

/// Synchronizes `received` on `target` and returns the RMSE over the
/// target's length. With `normalized`, both signals are first divided by
/// their maximum absolute value.
inline double rmse_after_sync(const SampledSignal &received, const SampledSignal &target, bool normalized)
{
    if (received.samples.empty() || target.samples.empty())
        throw std::invalid_argument("rmse_after_sync: empty signal");
    const SampledSignal &longer = received.size() >= target.size() ? received : target;
    const SampledSignal &shorter = received.size() >= target.size() ? target : received;
    const SampledSignal win = correlate_sync(longer, shorter);

    double ga = 1.0, gb = 1.0;
    if (normalized)
    {
        const double pa = peak_abs(win), pb = peak_abs(shorter);
        ga = pa > 0.0 ? 1.0 / pa : 1.0;
        gb = pb > 0.0 ? 1.0 / pb : 1.0;
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < shorter.size(); ++k)
    {
        const double d = ga * win.samples[k] - gb * shorter.samples[k];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(shorter.size()));
}

/// Pearson correlation coefficient.
inline double corrcoef(const std::vector<double> &a, const std::vector<double> &b)
{
    if (a.size() != b.size() || a.size() < 2)
        throw std::invalid_argument("corrcoef: need two equal-length vectors of size >= 2");
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
    {
        ma += a[k];
        mb += b[k];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
    {
        sab += (a[k] - ma) * (b[k] - mb);
        saa += (a[k] - ma) * (a[k] - ma);
        sbb += (b[k] - mb) * (b[k] - mb);
    }
    if (!(saa > 0.0) || !(sbb > 0.0))
        throw std::invalid_argument("corrcoef: constant input");
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

/// Empirical CDF: F(x) = #{samples <= x} / n.
class Ecdf
{
public:
    explicit Ecdf(std::vector<double> samples) : sorted_(std::move(samples))
    {
        if (sorted_.empty())
            throw std::invalid_argument("ecdf: no samples");
        std::sort(sorted_.begin(), sorted_.end());
    }

    double operator()(double x) const
    {
        const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
        return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
    }

    const std::vector<double> &support() const { return sorted_; }

private:
    std::vector<double> sorted_;
};

inline Ecdf ecdf(std::vector<double> samples) { return Ecdf(std::move(samples)); }

/// Fraction of equal bits; two empty strings match fully.
inline double bit_match_ratio(const std::string &x, const std::string &y)
{
    if (x.size() != y.size())
        throw std::invalid_argument("bit_match_ratio: lengths differ");
    if (x.empty())
        return 1.0;
    std::size_t same = 0;
    for (std::size_t k = 0; k < x.size(); ++k)
        same += x[k] == y[k];
    return static_cast<double>(same) / static_cast<double>(x.size());
}

inline double median(std::vector<double> v)
{
    if (v.empty())
        throw std::invalid_argument("median: no samples");
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

inline double mean(const std::vector<double> &v)
{
    if (v.empty())
        throw std::invalid_argument("mean: no samples");
    double s = 0.0;
    for (double x : v)
        s += x;
    return s / static_cast<double>(v.size());
}

// Standard error of the mean.
inline double standard_error(const std::vector<double> &v)
{
    if (v.size() < 2)
        return 0.0;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v)
        ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

} // namespace chwhisper

#endif
