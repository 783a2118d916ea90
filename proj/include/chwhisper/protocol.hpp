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

#ifndef CHWHISPER_PROTOCOL_HPP
#define CHWHISPER_PROTOCOL_HPP

#include "channel_model.hpp"
#include "cir_estimator.hpp"
#include "deconvolution.hpp"
#include "metrics.hpp"
#include "quantizer.hpp"
#include "seed.hpp"
#include "waveform.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace chwhisper {

// ---------------------------------------------------------------------------
// Packet accounting
// ---------------------------------------------------------------------------

enum class KeyMethod
{
    ckg, // cooperative key generation (channel whispering)
    ckd  // pairwise keys + XOR key distribution
};

inline std::string to_string(KeyMethod m) { return m == KeyMethod::ckg ? "ckg" : "ckd"; }

struct TrafficModel
{
    int node_count = 3;
    int lead_setup_packets = 0; // x

    void validate() const
    {
        if (node_count < 3)
            throw std::invalid_argument("TrafficModel: at least 3 nodes required");
        if (lead_setup_packets < 0)
            throw std::invalid_argument("TrafficModel: lead setup packets must be >= 0");
    }
};

// Packets per phase for one group key in a full mesh.
struct TrafficLedger
{
    long long probing = 0;
    long long s_signals = 0;
    long long reconciliation_lead = 0;
    long long dropping = 0;
    long long error_correction = 0;
    long long distribution_lead = 0;
    long long key_distribution = 0;

    long long total() const
    {
        return probing + s_signals + reconciliation_lead + dropping + error_correction + distribution_lead +
               key_distribution;
    }
};

inline TrafficLedger count_packets(const TrafficModel &model, KeyMethod method)
{
    model.validate();
    const long long n = model.node_count;
    const long long x = model.lead_setup_packets;
    TrafficLedger t;
    t.probing = n; // broadcast
    if (method == KeyMethod::ckd)
    {
        t.dropping = n * (n - 1);
        t.error_correction = n * (n - 1) / 2;
        t.distribution_lead = x;
        t.key_distribution = n - 1;
    }
    else
    {
        // each node receives every non-adjacent link once
        t.s_signals = n * (n * (n - 1) / 2 - (n - 1));
        t.reconciliation_lead = x;
        t.dropping = n;          // broadcast
        t.error_correction = 1;  // broadcast
    }
    return t;
}

/// Full protocol rounds that fit in a packet budget.
inline long long rounds_for_budget(long long budget, const TrafficModel &model, KeyMethod method)
{
    if (budget < 0)
        throw std::invalid_argument("rounds_for_budget: budget must be >= 0");
    return budget / count_packets(model, method).total();
}

// ---------------------------------------------------------------------------
// Three-node setting
// ---------------------------------------------------------------------------

using NodeId = int;

enum class Role
{
    cooperator,
    initiator,
    generator
};

struct RoleAssignment
{
    NodeId cooperator;
    NodeId initiator;
    NodeId generator;
};

// (cooperator, initiator, generator) = (A, B, C), (B, C, A), (C, A, B)
inline std::array<RoleAssignment, 3> role_rotation()
{
    return {RoleAssignment{0, 1, 2}, RoleAssignment{1, 2, 0}, RoleAssignment{2, 0, 1}};
}

/// Reciprocal channels of the three links [0-1], [0-2], [1-2].
struct Triad
{
    std::array<ChannelRealization, 3> links;

    static std::size_t index(NodeId u, NodeId v)
    {
        if (u == v || u < 0 || v < 0 || u > 2 || v > 2)
            throw std::invalid_argument("Triad: invalid link");
        const auto [lo, hi] = std::minmax(u, v);
        return lo == 0 ? static_cast<std::size_t>(hi - 1) : 2;
    }
    static LinkId link(std::size_t k)
    {
        static constexpr std::array<LinkId, 3> ids{LinkId{0, 1}, LinkId{0, 2}, LinkId{1, 2}};
        return ids.at(k);
    }

    const ChannelRealization &between(NodeId u, NodeId v) const { return links[index(u, v)]; }
};

inline Triad draw_triad(const ChannelModelParams &params, Seed seed)
{
    Triad t;
    for (std::size_t k = 0; k < 3; ++k)
        t.links[k] = generate(params, derive_seed(seed, k));
    return t;
}

/// Pulse transmission through a channel: pulse synthesized once on the
/// simulation grid, received signals sampled at the processing rate.
class ChannelSounder
{
public:
    explicit ChannelSounder(const PulseSpec &pulse = {}, double rate = kProcessingRate)
        : spec_(pulse), rate_(rate), pulse_(make_pulse(pulse, kSimulationRate)),
          template_(chwhisper::received_template(pulse, rate)), power_(chwhisper::pulse_power(pulse_))
    {
    }

    const PulseSpec &spec() const { return spec_; }
    double rate() const { return rate_; }
    const SampledSignal &pulse() const { return pulse_; }
    const SampledSignal &received_template() const { return template_; }
    double pulse_power() const { return power_; }

    SampledSignal analog(const ChannelRealization &h) const { return convolve(pulse_, h); }
    // Zero-padded at the end so the receive filter's ringing after the last
    // path is kept; the receiver's clock starts at the analog signal's origin.
    SampledSignal observe(const ChannelRealization &h) const
    {
        if (rate_ == kSimulationRate)
            return analog(h);
        const auto pad = static_cast<std::size_t>(std::llround(2.0 * detail::kSincLobes * kSimulationRate / rate_));
        return resample(zero_pad(analog(h), 0, pad), rate_);
    }

    /// A programmable transmitter emitting the `rate`-sampled waveform `s`:
    /// interpolated to the simulation grid, passed through `h` and sampled
    /// at `rate` again. `s` is zero-padded first so the interpolation tails
    /// are kept; the map is then shift-invariant on the `rate` grid.
    SampledSignal transmit(const SampledSignal &s, const ChannelRealization &h) const
    {
        return resample(emit(s, h), rate_);
    }

    // The same transmission seen on the simulation grid.
    SampledSignal emit(const SampledSignal &s, const ChannelRealization &h) const
    {
        require_same_rate(s.rate, rate_, "transmit");
        const auto pad = static_cast<std::size_t>(2.0 * detail::kSincLobes);
        return convolve(resample(zero_pad(s, pad, pad), kSimulationRate), h);
    }

    /// Impulse response of `transmit` through `h`: the discrete channel a
    /// transmitter with exact channel knowledge would deconvolve.
    SampledSignal effective_kernel(const ChannelRealization &h) const
    {
        return transmit(SampledSignal{{1.0}, rate_, 0.0}, h);
    }

    SampledSignal add_noise(SampledSignal sig, double snr_db, Seed seed) const
    {
        return add_awgn(std::move(sig), NoiseSpec{snr_db}, power_, seed);
    }

private:
    PulseSpec spec_;
    double rate_;
    SampledSignal pulse_;
    SampledSignal template_;
    double power_;
};

// Physical events that draw randomness.
enum class Event : std::uint64_t
{
    probe = 1,
    whisper = 2,
    cross_validation = 3,
    group_key = 4
};

struct RoundConfig
{
    double snr_db = 20.0;
    DeconvChoice deconv{};
    QuantizerConfig quantizer{};
    PreprocessConfig preprocess{};
    EstimatorConfig estimator{};
    CvConfig cv{};
    Seed seed = 0;
    bool perfect_estimation = false; // kernel from the true channel instead of the estimate
    bool noiseless = false;          // no receiver noise anywhere
};

/// Received probe signals y[tx][rx], one independent noise draw per direction.
using ProbeSet = std::array<std::array<SampledSignal, 3>, 3>;

inline ProbeSet probe_all(const Triad &triad, const RoundConfig &cfg, const ChannelSounder &sounder)
{
    ProbeSet y;
    for (NodeId tx = 0; tx < 3; ++tx)
        for (NodeId rx = 0; rx < 3; ++rx)
        {
            if (tx == rx)
                continue;
            SampledSignal sig = sounder.observe(triad.between(tx, rx));
            if (!cfg.noiseless)
                sig = sounder.add_noise(std::move(sig), cfg.snr_db,
                                        derive_seed(cfg.seed, Event::probe, std::uint64_t(tx), std::uint64_t(rx)));
            y[tx][rx] = std::move(sig);
        }
    return y;
}

struct WhisperResult
{
    SampledSignal s_signal;  // at the processing rate, t0 < 0
    SampledSignal received;  // synchronized window at the generator
    DeconvSolution solution;
};

/// The cooperator reproduces its observation of the initiator's probe at the
/// generator: it solves (s * h_est)(t) = y_{init->coop}(t) over the
/// observation window, transmits s through the true cooperator-generator
/// channel, and the generator keeps the synchronized window of what it hears.
inline WhisperResult whisper(const Triad &triad, const ProbeSet &y, const RoleAssignment &roles, const RoundConfig &cfg,
                             const ChannelSounder &sounder)
{
    const NodeId c = roles.cooperator, i = roles.initiator, g = roles.generator;
    const double rate = sounder.rate();
    const ChannelRealization &h_cg = triad.between(c, g);

    std::vector<double> kernel;
    double kernel_t0 = 0.0;
    if (cfg.perfect_estimation)
    {
        SampledSignal k = sounder.effective_kernel(h_cg);
        kernel = std::move(k.samples);
        kernel_t0 = k.t0;
    }
    else
        kernel = sample_cir(estimate_cir(y[g][c], sounder.received_template(), cfg.estimator), rate);

    const SampledSignal target = time_window(y[i][c], 0.0, cfg.preprocess.window);
    const auto nh = static_cast<Index>(kernel.size());
    const ConvolutionOperator op(Eigen::Map<const VectorXd>(kernel.data(), nh),
                                 static_cast<Index>(target.size()));

    WhisperResult out;
    out.solution = solve(op, Eigen::Map<const VectorXd>(target.samples.data(), op.target_len()), cfg.deconv, cfg.cv,
                         derive_seed(cfg.seed, Event::cross_validation, std::uint64_t(c), std::uint64_t(g)));
    out.s_signal = SampledSignal{std::vector<double>(out.solution.s.data(), out.solution.s.data() + out.solution.s.size()),
                                 rate, -static_cast<double>(nh - 1) / rate - kernel_t0};

    SampledSignal heard = sounder.transmit(out.s_signal, h_cg);
    if (!cfg.noiseless)
        heard = sounder.add_noise(std::move(heard), cfg.snr_db,
                                  derive_seed(cfg.seed, Event::whisper, std::uint64_t(c), std::uint64_t(g)));

    const SampledSignal reference = time_window(sounder.observe(triad.between(i, c)), 0.0, cfg.preprocess.window);
    out.received = correlate_sync(heard, reference);
    out.received.t0 = reference.t0;
    return out;
}

// Per-node quantization input of one CKG round.
struct CkgObservation
{
    std::array<std::vector<double>, 3> values;
};

inline CkgObservation ckg_observe(const Triad &triad, const RoundConfig &cfg, const ChannelSounder &sounder)
{
    const ProbeSet y = probe_all(triad, cfg, sounder);

    std::array<SampledSignal, 3> whispered; // indexed by generator
    for (const RoleAssignment &r : role_rotation())
        whispered[static_cast<std::size_t>(r.generator)] = whisper(triad, y, r, cfg, sounder).received;

    CkgObservation obs;
    for (NodeId v = 0; v < 3; ++v)
    {
        std::vector<std::vector<double>> per_link;
        std::vector<LinkId> ids;
        for (NodeId u = 0; u < 3; ++u)
            if (u != v)
            {
                per_link.push_back(preprocess(y[u][v], cfg.preprocess));
                ids.push_back(LinkId{u, v});
            }
        per_link.push_back(preprocess(whispered[static_cast<std::size_t>(v)], cfg.preprocess));
        ids.push_back(LinkId{(v + 1) % 3, (v + 2) % 3});
        obs.values[static_cast<std::size_t>(v)] = concat_links(per_link, ids);
    }
    return obs;
}

struct RoundResult
{
    std::vector<BitMaterial> per_node_bits;
    bool agreed = false;
    std::size_t key_length_bits = 0; // 0 unless agreed
    double bit_match = 1.0;          // mean over node pairs after index reconciliation
    TrafficLedger traffic;
};

inline double mean_pairwise_match(const std::vector<BitMaterial> &m)
{
    double acc = 0.0;
    int pairs = 0;
    for (std::size_t a = 0; a < m.size(); ++a)
        for (std::size_t b = a + 1; b < m.size(); ++b, ++pairs)
            acc += bit_match_ratio(m[a].bits, m[b].bits);
    return pairs ? acc / pairs : 1.0;
}

inline RoundResult ckg_agree(const CkgObservation &obs, const QuantizerConfig &quantizer, int lead_setup_packets = 0)
{
    std::vector<BitMaterial> raw;
    for (const auto &v : obs.values)
        raw.push_back(quantize(v, quantizer));

    RoundResult out;
    out.per_node_bits = reconcile_indices(raw);
    out.agreed = std::all_of(out.per_node_bits.begin(), out.per_node_bits.end(),
                             [&](const BitMaterial &b) { return b.bits == out.per_node_bits.front().bits; });
    out.key_length_bits = out.agreed ? out.per_node_bits.front().bits.size() : 0;
    out.bit_match = mean_pairwise_match(out.per_node_bits);
    out.traffic = count_packets({3, lead_setup_packets}, KeyMethod::ckg);
    return out;
}

inline RoundResult run_ckg_round(const Triad &triad, const RoundConfig &cfg, const ChannelSounder &sounder)
{
    return ckg_agree(ckg_observe(triad, cfg, sounder), cfg.quantizer);
}

inline RoundResult run_ckg_round(const Triad &triad, const RoundConfig &cfg)
{
    return run_ckg_round(triad, cfg, ChannelSounder(cfg.estimator.pulse, cfg.estimator.rate));
}

// Per-link quantization inputs of one CKD round: for link (u, v) with u < v,
// ends[0] is u's view and ends[1] is v's view.
struct CkdObservation
{
    std::array<std::array<std::vector<double>, 2>, 3> links;
};

inline CkdObservation ckd_observe(const Triad &triad, const RoundConfig &cfg, const ChannelSounder &sounder)
{
    const ProbeSet y = probe_all(triad, cfg, sounder);
    CkdObservation obs;
    for (std::size_t k = 0; k < 3; ++k)
    {
        const LinkId l = Triad::link(k);
        obs.links[k][0] = preprocess(y[l.b][l.a], cfg.preprocess);
        obs.links[k][1] = preprocess(y[l.a][l.b], cfg.preprocess);
    }
    return obs;
}

struct CkdRoundResult : RoundResult
{
    std::array<std::vector<BitMaterial>, 3> pair_bits; // reconciled, per link
    std::array<bool, 3> pair_agreed{};
};

/// Pairwise keys on each link, then a random group key drawn by node 0 (the
/// lead) sent XOR-ed with the pairwise keys it shares with nodes 1 and 2.
inline CkdRoundResult ckd_agree(const CkdObservation &obs, const QuantizerConfig &quantizer, Seed key_seed,
                                int lead_setup_packets = 0)
{
    CkdRoundResult out;
    std::array<std::size_t, 3> len{};
    double match = 0.0;
    for (std::size_t k = 0; k < 3; ++k)
    {
        out.pair_bits[k] = reconcile_indices({quantize(obs.links[k][0], quantizer), quantize(obs.links[k][1], quantizer)});
        out.pair_agreed[k] = out.pair_bits[k][0].bits == out.pair_bits[k][1].bits;
        len[k] = out.pair_agreed[k] ? out.pair_bits[k][0].bits.size() : 0;
        match += bit_match_ratio(out.pair_bits[k][0].bits, out.pair_bits[k][1].bits);
    }
    out.bit_match = match / 3.0;
    out.traffic = count_packets({3, lead_setup_packets}, KeyMethod::ckd);

    // lead 0 uses links [0-1] (index 0) and [0-2] (index 1)
    out.agreed = out.pair_agreed[0] && out.pair_agreed[1];
    const std::size_t n = out.agreed ? std::min(len[0], len[1]) : 0;

    std::mt19937_64 rng(key_seed);
    std::bernoulli_distribution coin(0.5);
    std::string group(n, '0');
    for (char &b : group)
        b = coin(rng) ? '1' : '0';

    auto xor_bits = [](const std::string &a, const std::string &b) {
        std::string r(a.size(), '0');
        for (std::size_t k = 0; k < a.size(); ++k)
            r[k] = a[k] == b[k] ? '0' : '1';
        return r;
    };

    out.per_node_bits.assign(3, BitMaterial{});
    out.per_node_bits[0].bits = group;
    for (std::size_t k = 0; k < 2 && n > 0; ++k)
    {
        const std::string lead_key = out.pair_bits[k][0].bits.substr(0, n);
        const std::string peer_key = out.pair_bits[k][1].bits.substr(0, n);
        out.per_node_bits[k + 1].bits = xor_bits(xor_bits(group, lead_key), peer_key);
    }
    out.agreed = out.agreed && out.per_node_bits[1].bits == group && out.per_node_bits[2].bits == group;
    out.key_length_bits = out.agreed ? n : 0;
    return out;
}

inline CkdRoundResult run_ckd_round(const Triad &triad, const RoundConfig &cfg, const ChannelSounder &sounder)
{
    return ckd_agree(ckd_observe(triad, cfg, sounder), cfg.quantizer, derive_seed(cfg.seed, Event::group_key));
}

inline CkdRoundResult run_ckd_round(const Triad &triad, const RoundConfig &cfg)
{
    return run_ckd_round(triad, cfg, ChannelSounder(cfg.estimator.pulse, cfg.estimator.rate));
}

} // namespace chwhisper

#endif
