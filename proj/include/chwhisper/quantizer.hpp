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

#ifndef CHWHISPER_QUANTIZER_HPP
#define CHWHISPER_QUANTIZER_HPP

#include "waveform.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace chwhisper {

struct PreprocessConfig
{
    double window = 50e-9;         // T_w, seconds
    double lowpass_cutoff = 0.5e9; // Hz; moving average of width 1 / cutoff
    double output_rate = 0.5e9;    // F_p = 1 / T_p

    void validate() const
    {
        if (!(window > 0.0))
            throw std::invalid_argument("PreprocessConfig: window must be > 0");
        if (!(lowpass_cutoff > 0.0) || !(output_rate > 0.0))
            throw std::invalid_argument("PreprocessConfig: rates must be > 0");
    }

    std::size_t output_length() const { return static_cast<std::size_t>(std::llround(window * output_rate)); }
};

/// Window to [0, T_w), square, moving-average low-pass, decimate to F_p and
/// min-max normalize to [0, 1].
inline std::vector<double> preprocess(const SampledSignal &sig, const PreprocessConfig &cfg)
{
    cfg.validate();
    sig.validate();
    if (sig.rate < cfg.output_rate)
        throw std::invalid_argument("preprocess: signal rate below output rate");

    const SampledSignal w = time_window(sig, 0.0, cfg.window);
    const std::size_t n = w.size();
    std::vector<double> sq(n);
    for (std::size_t k = 0; k < n; ++k)
        sq[k] = w.samples[k] * w.samples[k];

    const auto width = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(sig.rate / cfg.lowpass_cutoff)));
    const double step = sig.rate / cfg.output_rate;
    const std::size_t m = cfg.output_length();

    // prefix sums for the moving average over [k*step, k*step + width)
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t k = 0; k < n; ++k)
        prefix[k + 1] = prefix[k] + sq[k];

    std::vector<double> out(m, 0.0);
    for (std::size_t k = 0; k < m; ++k)
    {
        const auto lo = std::min(n, static_cast<std::size_t>(std::llround(static_cast<double>(k) * step)));
        const auto hi = std::min(n, lo + width);
        out[k] = (prefix[hi] - prefix[lo]) / static_cast<double>(width);
    }

    const auto [mn, mx] = std::minmax_element(out.begin(), out.end());
    const double lo = *mn, span = *mx - *mn;
    if (!(span > 0.0))
        throw std::invalid_argument("preprocess: constant signal cannot be normalized");
    for (double &v : out)
        v = std::clamp((v - lo) / span, 0.0, 1.0);
    return out;
}

// Undirected link between two nodes.
struct LinkId
{
    int a = 0;
    int b = 0;

    std::pair<int, int> key() const { return std::minmax(a, b); }
    friend bool operator==(const LinkId &x, const LinkId &y) { return x.key() == y.key(); }
};

/// Concatenates per-link vectors in canonical order: links sorted by
/// (smaller node id, larger node id).
inline std::vector<double> concat_links(const std::vector<std::vector<double>> &per_link, const std::vector<LinkId> &order)
{
    if (per_link.size() != order.size())
        throw std::invalid_argument("concat_links: one link id per vector required");
    std::vector<std::size_t> idx(order.size());
    for (std::size_t k = 0; k < idx.size(); ++k)
        idx[k] = k;
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return order[x].key() < order[y].key(); });
    for (std::size_t k = 1; k < idx.size(); ++k)
        if (order[idx[k]] == order[idx[k - 1]])
            throw std::invalid_argument("concat_links: duplicate link");

    std::vector<double> out;
    for (std::size_t k : idx)
        out.insert(out.end(), per_link[k].begin(), per_link[k].end());
    return out;
}

// Two-bit uniform quantizer with Gray labels.
struct QuantizerConfig
{
    static constexpr std::array<double, 3> borders{0.25, 0.5, 0.75};
    static constexpr std::array<const char *, 4> labels{"00", "01", "11", "10"};

    double guard_band = 0.0;

    void validate() const
    {
        if (!(guard_band >= 0.0 && guard_band <= 0.1))
            throw std::invalid_argument("QuantizerConfig: guard band must lie in [0, 0.1]");
    }

    // Cell index of v; a border value belongs to the upper cell and 1 to the top cell.
    static std::size_t cell(double v) { return std::min<std::size_t>(3, static_cast<std::size_t>(std::floor(4.0 * v))); }
};

struct BitMaterial
{
    std::string bits;
    std::vector<std::size_t> kept_indices;
    std::vector<std::size_t> dropped_indices;

    std::size_t sample_count() const { return kept_indices.size() + dropped_indices.size(); }
};

inline BitMaterial quantize(const std::vector<double> &values, const QuantizerConfig &cfg)
{
    cfg.validate();
    BitMaterial out;
    for (std::size_t k = 0; k < values.size(); ++k)
    {
        const double v = values[k];
        if (!(v >= 0.0 && v <= 1.0))
            throw std::invalid_argument("quantize: value outside [0, 1]");
        bool drop = false;
        if (cfg.guard_band > 0.0)
            for (double b : QuantizerConfig::borders)
                drop = drop || std::abs(v - b) <= cfg.guard_band;
        if (drop)
        {
            out.dropped_indices.push_back(k);
            continue;
        }
        out.kept_indices.push_back(k);
        out.bits += QuantizerConfig::labels[QuantizerConfig::cell(v)];
    }
    return out;
}

/// Removes, at every node, the union of all dropped indices.
inline std::vector<BitMaterial> reconcile_indices(const std::vector<BitMaterial> &materials)
{
    if (materials.empty())
        return {};
    const std::size_t count = materials.front().sample_count();
    std::vector<bool> dropped(count, false);
    for (const auto &m : materials)
    {
        if (m.sample_count() != count || m.bits.size() != 2 * m.kept_indices.size())
            throw std::invalid_argument("reconcile_indices: mismatched sample counts");
        for (std::size_t i : m.dropped_indices)
        {
            if (i >= count)
                throw std::invalid_argument("reconcile_indices: index out of range");
            dropped[i] = true;
        }
    }

    std::vector<BitMaterial> out;
    out.reserve(materials.size());
    for (const auto &m : materials)
    {
        BitMaterial r;
        for (std::size_t k = 0; k < m.kept_indices.size(); ++k)
        {
            const std::size_t i = m.kept_indices[k];
            if (dropped[i])
                continue;
            r.kept_indices.push_back(i);
            r.bits.append(m.bits, 2 * k, 2);
        }
        for (std::size_t i = 0; i < count; ++i)
            if (dropped[i])
                r.dropped_indices.push_back(i);
        out.push_back(std::move(r));
    }
    return out;
}

inline void write_bit_material_csv(std::ostream &os, const std::vector<BitMaterial> &rows)
{
    os << "node,bits,dropped_indices\n";
    for (std::size_t n = 0; n < rows.size(); ++n)
    {
        os << n << ',' << rows[n].bits << ',';
        for (std::size_t k = 0; k < rows[n].dropped_indices.size(); ++k)
            os << (k ? " " : "") << rows[n].dropped_indices[k];
        os << '\n';
    }
}

} // namespace chwhisper

#endif
