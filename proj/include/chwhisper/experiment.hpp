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

#ifndef CHWHISPER_EXPERIMENT_HPP
#define CHWHISPER_EXPERIMENT_HPP

#include "channel_model.hpp"
#include "cir_estimator.hpp"
#include "deconvolution.hpp"
#include "metrics.hpp"
#include "protocol.hpp"
#include "quantizer.hpp"
#include "seed.hpp"
#include "waveform.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace chwhisper {

enum class Scenario
{
    deconv_eval,
    protocol_compare,
    traffic
};

enum class NoiseMode
{
    pre_estimation, // noise on the probes only
    entirely_noisy  // also on the received s-signal
};

inline std::string to_string(Scenario s)
{
    switch (s)
    {
    case Scenario::deconv_eval:
        return "deconv-eval";
    case Scenario::protocol_compare:
        return "protocol-compare";
    case Scenario::traffic:
        return "traffic";
    }
    return "?";
}

inline Scenario scenario_from_string(const std::string &s)
{
    if (s == "deconv-eval")
        return Scenario::deconv_eval;
    if (s == "protocol-compare")
        return Scenario::protocol_compare;
    if (s == "traffic")
        return Scenario::traffic;
    throw std::invalid_argument("unknown scenario '" + s + "'");
}

inline std::string to_string(NoiseMode m) { return m == NoiseMode::pre_estimation ? "pre-estimation-only" : "entirely-noisy"; }

inline NoiseMode noise_mode_from_string(const std::string &s)
{
    if (s == "pre-estimation-only" || s == "pre-estimation")
        return NoiseMode::pre_estimation;
    if (s == "entirely-noisy")
        return NoiseMode::entirely_noisy;
    throw std::invalid_argument("unknown noise mode '" + s + "'");
}

struct ExperimentConfig
{
    Scenario scenario = Scenario::deconv_eval;
    Seed seed = 1;
    std::size_t n_configs = 0; // 0: 5000 for deconv-eval, 500 for protocol-compare
    std::vector<double> snr_list{10.0, 20.0};
    std::vector<double> gb_list{0.0, 0.02, 0.04, 0.06, 0.08, 0.1};
    std::vector<DeconvChoice> methods{{DeconvMethod::ml, 0.0},
                                      {DeconvMethod::map, 0.01},
                                      {DeconvMethod::map, 1.0},
                                      {DeconvMethod::map_cv, 0.0},
                                      {DeconvMethod::em, 0.0}};
    std::vector<NoiseMode> noise_modes{NoiseMode::pre_estimation};
    unsigned threads = 1;

    // protocol-compare
    DeconvChoice protocol_deconv{DeconvMethod::map, 0.01};
    long long packet_budget = 140;
    int lead_setup_packets = 0;

    // traffic
    int nodes_min = 3;
    int nodes_max = 20;

    ChannelModelParams channel{};
    EstimatorConfig estimator{};
    PreprocessConfig preprocess{};
    CvConfig cv{};

    std::size_t config_count() const
    {
        if (n_configs > 0)
            return n_configs;
        return scenario == Scenario::deconv_eval ? 5000 : 500;
    }

    void validate() const
    {
        channel.validate();
        estimator.validate();
        preprocess.validate();
        cv.validate();
        if (snr_list.empty())
            throw std::invalid_argument("ExperimentConfig: empty SNR list");
        for (double snr : snr_list)
            if (!std::isfinite(snr))
                throw std::invalid_argument("ExperimentConfig: SNR must be finite");
        if (scenario == Scenario::protocol_compare && gb_list.empty())
            throw std::invalid_argument("ExperimentConfig: empty guard-band list");
        for (double gb : gb_list)
            QuantizerConfig{gb}.validate();
        if (scenario == Scenario::deconv_eval && (methods.empty() || noise_modes.empty()))
            throw std::invalid_argument("ExperimentConfig: no methods or noise modes");
        if (packet_budget < 0 || lead_setup_packets < 0)
            throw std::invalid_argument("ExperimentConfig: negative packet counts");
        if (scenario == Scenario::traffic)
        {
            TrafficModel{nodes_min, lead_setup_packets}.validate();
            if (nodes_max < nodes_min)
                throw std::invalid_argument("ExperimentConfig: nodes_max < nodes_min");
        }
    }
};

// Seed of configuration `id`: independent of thread count and scheduling.
inline Seed config_seed(Seed master, std::size_t id) { return derive_seed(master, std::uint64_t(id)); }

inline std::uint64_t seed_tag(double x) { return std::bit_cast<std::uint64_t>(x); }

/// Calls fn(0 .. n-1) on `threads` workers; the first exception is rethrown.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)> &fn)
{
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (threads == 1)
    {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_lock;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++)
            {
                try
                {
                    fn(i);
                }
                catch (...)
                {
                    std::lock_guard<std::mutex> g(error_lock);
                    if (!error)
                        error = std::current_exception();
                    next = n;
                }
            }
        });
    for (auto &th : pool)
        th.join();
    if (error)
        std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// deconv-eval
// ---------------------------------------------------------------------------

struct DeconvRow
{
    std::size_t config_id = 0;
    std::string method;
    double snr_db = 0.0;
    NoiseMode noise_mode = NoiseMode::pre_estimation;
    double rmse = 0.0;
    double rmse_normalized = 0.0;
    double corrcoef = 0.0;
    double effective_lambda = std::numeric_limits<double>::quiet_NaN();
    double residual_norm = 0.0;
};

/// One channel configuration: B probes A over h_AB (the target), C probes A
/// over h_AC (estimated by A); A's s-signal travels to C over the true h_AC
/// and is compared on the simulation grid with the noiseless observation
/// of h_AB, band-limited to the processing rate.
inline std::vector<DeconvRow> deconv_eval_config(const ExperimentConfig &cfg, const ChannelSounder &sounder,
                                                 std::size_t config_id)
{
    const Seed cs = config_seed(cfg.seed, config_id);
    const ChannelRealization h_ab = generate(cfg.channel, derive_seed(cs, 0u));
    const ChannelRealization h_ac = generate(cfg.channel, derive_seed(cs, 1u));
    const SampledSignal clean_ba = sounder.observe(h_ab);
    const SampledSignal clean_ca = sounder.observe(h_ac);
    const SampledSignal reference =
        resample(time_window(clean_ba, 0.0, cfg.preprocess.window), kSimulationRate);

    std::vector<DeconvRow> rows;
    for (double snr : cfg.snr_list)
    {
        const Seed ss = derive_seed(cs, seed_tag(snr));
        const SampledSignal y_ba = sounder.add_noise(clean_ba, snr, derive_seed(ss, Event::probe, 1u, 0u));
        const SampledSignal y_ca = sounder.add_noise(clean_ca, snr, derive_seed(ss, Event::probe, 2u, 0u));

        const auto kernel = sample_cir(estimate_cir(y_ca, sounder.received_template(), cfg.estimator), sounder.rate());
        const SampledSignal target = time_window(y_ba, 0.0, cfg.preprocess.window);
        const ConvolutionOperator op(Eigen::Map<const VectorXd>(kernel.data(), static_cast<Index>(kernel.size())),
                                     static_cast<Index>(target.size()));
        const Eigen::Map<const VectorXd> y(target.samples.data(), op.target_len());

        for (const DeconvChoice &m : cfg.methods)
        {
            const DeconvSolution sol = solve(op, y, m, cfg.cv, derive_seed(ss, Event::cross_validation));
            const SampledSignal s{std::vector<double>(sol.s.data(), sol.s.data() + sol.s.size()), sounder.rate(),
                                  -static_cast<double>(op.kernel_len() - 1) / sounder.rate()};
            const SampledSignal heard = sounder.emit(s, h_ac);

            for (NoiseMode mode : cfg.noise_modes)
            {
                const SampledSignal rx = mode == NoiseMode::pre_estimation
                                             ? heard
                                             : sounder.add_noise(heard, snr, derive_seed(ss, Event::whisper));
                const SampledSignal win = correlate_sync(rx, reference);
                DeconvRow r;
                r.config_id = config_id;
                r.method = m.label();
                r.snr_db = snr;
                r.noise_mode = mode;
                r.rmse = rmse_after_sync(win, reference, false);
                r.rmse_normalized = rmse_after_sync(win, reference, true);
                r.corrcoef = corrcoef(win.samples, reference.samples);
                if (sol.effective_lambda)
                    r.effective_lambda = *sol.effective_lambda;
                r.residual_norm = sol.residual_norm;
                rows.push_back(std::move(r));
            }
        }
    }
    return rows;
}

inline std::vector<DeconvRow> run_deconv_eval(const ExperimentConfig &cfg)
{
    cfg.validate();
    const ChannelSounder sounder(cfg.estimator.pulse, cfg.estimator.rate);
    std::vector<std::vector<DeconvRow>> per(cfg.config_count());
    parallel_for(per.size(), cfg.threads, [&](std::size_t i) { per[i] = deconv_eval_config(cfg, sounder, i); });
    std::vector<DeconvRow> rows;
    for (auto &p : per)
        rows.insert(rows.end(), p.begin(), p.end());
    return rows;
}

// ---------------------------------------------------------------------------
// protocol-compare
// ---------------------------------------------------------------------------

struct ProtocolRow
{
    std::size_t config_id = 0;
    double snr_db = 0.0;
    double guard_band = 0.0;
    long long ckg_rounds = 0;
    long long ckd_rounds = 0;
    long long ckg_agreed_rounds = 0;
    long long ckd_agreed_rounds = 0;
    long long ckg_key_bits = 0;
    long long ckd_key_bits = 0;
    double ckg_bit_match = std::numeric_limits<double>::quiet_NaN(); // mean over rounds
    double ckd_bit_match = std::numeric_limits<double>::quiet_NaN();

    long long key_diff() const { return ckg_key_bits - ckd_key_bits; }
};

/// Both protocols spend the same packet budget on one configuration; round
/// r of either protocol sees the same fresh channel triad.
inline std::vector<ProtocolRow> protocol_compare_config(const ExperimentConfig &cfg, const ChannelSounder &sounder,
                                                        std::size_t config_id)
{
    const Seed cs = config_seed(cfg.seed, config_id);
    const TrafficModel model{3, cfg.lead_setup_packets};
    const long long n_ckg = rounds_for_budget(cfg.packet_budget, model, KeyMethod::ckg);
    const long long n_ckd = rounds_for_budget(cfg.packet_budget, model, KeyMethod::ckd);

    const std::size_t n_gb = cfg.gb_list.size();
    std::vector<ProtocolRow> rows;
    for (double snr : cfg.snr_list)
        for (double gb : cfg.gb_list)
        {
            ProtocolRow r;
            r.config_id = config_id;
            r.snr_db = snr;
            r.guard_band = gb;
            r.ckg_rounds = n_ckg;
            r.ckd_rounds = n_ckd;
            rows.push_back(r);
        }
    std::vector<double> ckg_match(rows.size(), 0.0), ckd_match(rows.size(), 0.0);

    for (long long round = 0; round < std::max(n_ckg, n_ckd); ++round)
    {
        const Triad triad = draw_triad(cfg.channel, derive_seed(cs, std::uint64_t(round)));
        for (std::size_t si = 0; si < cfg.snr_list.size(); ++si)
        {
            RoundConfig rc;
            rc.snr_db = cfg.snr_list[si];
            rc.deconv = cfg.protocol_deconv;
            rc.preprocess = cfg.preprocess;
            rc.estimator = cfg.estimator;
            rc.cv = cfg.cv;
            rc.seed = derive_seed(cs, std::uint64_t(round), seed_tag(rc.snr_db));

            if (round < n_ckg)
            {
                const CkgObservation obs = ckg_observe(triad, rc, sounder);
                for (std::size_t gi = 0; gi < n_gb; ++gi)
                {
                    const RoundResult res = ckg_agree(obs, QuantizerConfig{cfg.gb_list[gi]}, cfg.lead_setup_packets);
                    ProtocolRow &row = rows[si * n_gb + gi];
                    row.ckg_agreed_rounds += res.agreed;
                    row.ckg_key_bits += static_cast<long long>(res.key_length_bits);
                    ckg_match[si * n_gb + gi] += res.bit_match;
                }
            }
            if (round < n_ckd)
            {
                const CkdObservation obs = ckd_observe(triad, rc, sounder);
                for (std::size_t gi = 0; gi < n_gb; ++gi)
                {
                    const CkdRoundResult res = ckd_agree(obs, QuantizerConfig{cfg.gb_list[gi]},
                                                         derive_seed(rc.seed, Event::group_key), cfg.lead_setup_packets);
                    ProtocolRow &row = rows[si * n_gb + gi];
                    row.ckd_agreed_rounds += res.agreed;
                    row.ckd_key_bits += static_cast<long long>(res.key_length_bits);
                    ckd_match[si * n_gb + gi] += res.bit_match;
                }
            }
        }
    }
    for (std::size_t k = 0; k < rows.size(); ++k)
    {
        if (n_ckg > 0)
            rows[k].ckg_bit_match = ckg_match[k] / static_cast<double>(n_ckg);
        if (n_ckd > 0)
            rows[k].ckd_bit_match = ckd_match[k] / static_cast<double>(n_ckd);
    }
    return rows;
}

inline std::vector<ProtocolRow> run_protocol_compare(const ExperimentConfig &cfg)
{
    cfg.validate();
    const ChannelSounder sounder(cfg.estimator.pulse, cfg.estimator.rate);
    std::vector<std::vector<ProtocolRow>> per(cfg.config_count());
    parallel_for(per.size(), cfg.threads, [&](std::size_t i) { per[i] = protocol_compare_config(cfg, sounder, i); });
    std::vector<ProtocolRow> rows;
    for (auto &p : per)
        rows.insert(rows.end(), p.begin(), p.end());
    return rows;
}

// ---------------------------------------------------------------------------
// traffic
// ---------------------------------------------------------------------------

struct TrafficRow
{
    int nodes = 0;
    KeyMethod method = KeyMethod::ckg;
    TrafficLedger ledger;
};

inline std::vector<TrafficRow> run_traffic(const ExperimentConfig &cfg)
{
    cfg.validate();
    std::vector<TrafficRow> rows;
    for (int n = cfg.nodes_min; n <= cfg.nodes_max; ++n)
        for (KeyMethod m : {KeyMethod::ckd, KeyMethod::ckg})
            rows.push_back({n, m, count_packets({n, cfg.lead_setup_packets}, m)});
    return rows;
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

inline constexpr int kCsvSchema = 1;

namespace detail {

inline std::string fmt(double v)
{
    if (std::isnan(v))
        return "nan";
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

template <typename T>
std::string join(const std::vector<T> &v, const std::function<std::string(const T &)> &f)
{
    std::string out;
    for (std::size_t k = 0; k < v.size(); ++k)
        out += (k ? ";" : "") + f(v[k]);
    return out;
}

} // namespace detail

/// Comment line with every setting that shapes the rows.
inline std::string metadata_line(const ExperimentConfig &cfg, const std::string &kind = "")
{
    std::ostringstream os;
    const auto &c = cfg.channel;
    os << "# chwhisper " << to_string(cfg.scenario) << (kind.empty() ? "" : " " + kind) << " schema=" << kCsvSchema;
    if (cfg.scenario == Scenario::traffic)
    {
        os << " nodes=" << cfg.nodes_min << ".." << cfg.nodes_max << " lead_packets=" << cfg.lead_setup_packets << '\n';
        return os.str();
    }
    os << " seed=" << cfg.seed << " configs=" << cfg.config_count()
       << " snr_db=" << detail::join<double>(cfg.snr_list, detail::fmt);
    if (cfg.scenario == Scenario::deconv_eval)
        os << " methods=" << detail::join<DeconvChoice>(cfg.methods, [](const DeconvChoice &m) { return m.label(); })
           << " noise_mode="
           << detail::join<NoiseMode>(cfg.noise_modes, [](const NoiseMode &m) { return to_string(m); });
    else
        os << " gb=" << detail::join<double>(cfg.gb_list, detail::fmt) << " deconv=" << cfg.protocol_deconv.label()
           << " budget=" << cfg.packet_budget << " lead_packets=" << cfg.lead_setup_packets;
    os << " channel=sv(cluster_rate=" << detail::fmt(c.cluster_arrival_rate)
       << "/ns,ray_rate=" << detail::fmt(c.ray_arrival_rate) << "/ns,cluster_decay=" << detail::fmt(c.cluster_decay)
       << "ns,ray_decay=" << detail::fmt(c.ray_decay) << "ns,max_excess=" << detail::fmt(c.max_excess_delay)
       << "ns,fading=" << to_string(c.amplitude_fading_law) << ",nakagami_m=" << detail::fmt(c.nakagami_m)
       << ",shadowing_db=" << detail::fmt(c.cluster_shadowing_db) << ")"
       << " pulse=(fc=" << detail::fmt(cfg.estimator.pulse.center_frequency)
       << ",bw=" << detail::fmt(cfg.estimator.pulse.bandwidth_minus10db)
       << ",tp=" << detail::fmt(cfg.estimator.pulse.duration) << ")"
       << " fs=" << detail::fmt(cfg.estimator.rate) << " window=" << detail::fmt(cfg.preprocess.window)
       << " fp=" << detail::fmt(cfg.preprocess.output_rate) << " estimator=(max_paths=" << cfg.estimator.max_paths
       << ",residual=" << detail::fmt(cfg.estimator.residual_energy_fraction) << ")"
       << " cv=(partitions=" << cfg.cv.partitions << ",train=" << detail::fmt(cfg.cv.train_fraction)
       << ",grid=" << cfg.cv.lambda_grid.size() << "x[" << detail::fmt(cfg.cv.lambda_grid.front()) << ","
       << detail::fmt(cfg.cv.lambda_grid.back()) << "])\n";
    return os.str();
}

inline void write_deconv_csv(std::ostream &os, const ExperimentConfig &cfg, const std::vector<DeconvRow> &rows)
{
    os << metadata_line(cfg);
    os << "config_id,method,snr_db,noise_mode,rmse,rmse_normalized,corrcoef,effective_lambda,residual_norm\n";
    for (const auto &r : rows)
        os << r.config_id << ',' << r.method << ',' << detail::fmt(r.snr_db) << ',' << to_string(r.noise_mode) << ','
           << detail::fmt(r.rmse) << ',' << detail::fmt(r.rmse_normalized) << ',' << detail::fmt(r.corrcoef) << ','
           << detail::fmt(r.effective_lambda) << ',' << detail::fmt(r.residual_norm) << '\n';
}

inline void write_protocol_csv(std::ostream &os, const ExperimentConfig &cfg, const std::vector<ProtocolRow> &rows)
{
    os << metadata_line(cfg);
    os << "config_id,snr_db,gb,ckg_rounds,ckd_rounds,ckg_agreed_rounds,ckd_agreed_rounds,ckg_key_bits,ckd_key_bits,"
          "key_diff,ckg_bit_match,ckd_bit_match\n";
    for (const auto &r : rows)
        os << r.config_id << ',' << detail::fmt(r.snr_db) << ',' << detail::fmt(r.guard_band) << ',' << r.ckg_rounds
           << ',' << r.ckd_rounds << ',' << r.ckg_agreed_rounds << ',' << r.ckd_agreed_rounds << ',' << r.ckg_key_bits
           << ',' << r.ckd_key_bits << ',' << r.key_diff() << ',' << detail::fmt(r.ckg_bit_match) << ','
           << detail::fmt(r.ckd_bit_match) << '\n';
}

inline void write_traffic_csv(std::ostream &os, const ExperimentConfig &cfg, const std::vector<TrafficRow> &rows)
{
    os << metadata_line(cfg);
    os << "nodes,method,probing,s_signals,reconciliation_lead,dropping,error_correction,distribution_lead,"
          "key_distribution,total\n";
    for (const auto &r : rows)
    {
        const auto &l = r.ledger;
        os << r.nodes << ',' << to_string(r.method) << ',' << l.probing << ',' << l.s_signals << ','
           << l.reconciliation_lead << ',' << l.dropping << ',' << l.error_correction << ',' << l.distribution_lead
           << ',' << l.key_distribution << ',' << l.total() << '\n';
    }
}

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

struct DeconvSummary
{
    std::string method;
    double snr_db = 0.0;
    NoiseMode noise_mode = NoiseMode::pre_estimation;
    std::size_t count = 0;
    double median_rmse = 0.0;
    double median_rmse_normalized = 0.0;
    double median_corrcoef = 0.0;
    double mean_rmse = 0.0;
    double median_effective_lambda = std::numeric_limits<double>::quiet_NaN();
};

/// Groups rows by (method, SNR, noise mode) in first-appearance order.
inline std::vector<DeconvSummary> summarize_deconv(const std::vector<DeconvRow> &rows)
{
    std::vector<std::tuple<std::string, double, NoiseMode>> keys;
    std::map<std::tuple<std::string, double, NoiseMode>, std::vector<const DeconvRow *>> groups;
    for (const auto &r : rows)
    {
        auto key = std::make_tuple(r.method, r.snr_db, r.noise_mode);
        auto [it, fresh] = groups.try_emplace(key);
        if (fresh)
            keys.push_back(key);
        it->second.push_back(&r);
    }
    std::vector<DeconvSummary> out;
    for (const auto &key : keys)
    {
        const auto &g = groups[key];
        std::vector<double> rmse, rmse_n, cc, lam;
        for (const DeconvRow *r : g)
        {
            rmse.push_back(r->rmse);
            rmse_n.push_back(r->rmse_normalized);
            cc.push_back(r->corrcoef);
            if (!std::isnan(r->effective_lambda))
                lam.push_back(r->effective_lambda);
        }
        DeconvSummary s;
        std::tie(s.method, s.snr_db, s.noise_mode) = key;
        s.count = g.size();
        s.median_rmse = median(rmse);
        s.median_rmse_normalized = median(rmse_n);
        s.median_corrcoef = median(cc);
        s.mean_rmse = mean(rmse);
        if (!lam.empty())
            s.median_effective_lambda = median(lam);
        out.push_back(s);
    }
    return out;
}

struct ProtocolSummary
{
    double snr_db = 0.0;
    double guard_band = 0.0;
    std::size_t configs = 0;
    double mean_key_diff = 0.0;
    double se_key_diff = 0.0;
    double mean_ckg_key_bits = 0.0;
    double mean_ckd_key_bits = 0.0;
    double mean_ckg_bit_match = std::numeric_limits<double>::quiet_NaN();
    double se_ckg_bit_match = std::numeric_limits<double>::quiet_NaN();
    double mean_ckd_bit_match = std::numeric_limits<double>::quiet_NaN();
};

inline std::vector<ProtocolSummary> summarize_protocol(const std::vector<ProtocolRow> &rows)
{
    std::vector<std::pair<double, double>> keys;
    std::map<std::pair<double, double>, std::vector<const ProtocolRow *>> groups;
    for (const auto &r : rows)
    {
        auto key = std::make_pair(r.snr_db, r.guard_band);
        auto [it, fresh] = groups.try_emplace(key);
        if (fresh)
            keys.push_back(key);
        it->second.push_back(&r);
    }
    std::vector<ProtocolSummary> out;
    for (const auto &key : keys)
    {
        std::vector<double> diff, ckg, ckd, mg, md;
        for (const ProtocolRow *r : groups[key])
        {
            diff.push_back(static_cast<double>(r->key_diff()));
            ckg.push_back(static_cast<double>(r->ckg_key_bits));
            ckd.push_back(static_cast<double>(r->ckd_key_bits));
            if (!std::isnan(r->ckg_bit_match))
                mg.push_back(r->ckg_bit_match);
            if (!std::isnan(r->ckd_bit_match))
                md.push_back(r->ckd_bit_match);
        }
        ProtocolSummary s;
        std::tie(s.snr_db, s.guard_band) = key;
        s.configs = diff.size();
        s.mean_key_diff = mean(diff);
        s.se_key_diff = standard_error(diff);
        s.mean_ckg_key_bits = mean(ckg);
        s.mean_ckd_key_bits = mean(ckd);
        if (!mg.empty())
        {
            s.mean_ckg_bit_match = mean(mg);
            s.se_ckg_bit_match = standard_error(mg);
        }
        if (!md.empty())
            s.mean_ckd_bit_match = mean(md);
        out.push_back(s);
    }
    return out;
}

inline void write_deconv_summary_csv(std::ostream &os, const ExperimentConfig &cfg, const std::vector<DeconvRow> &rows)
{
    os << metadata_line(cfg, "summary");
    os << "method,snr_db,noise_mode,count,median_rmse,median_rmse_normalized,median_corrcoef,mean_rmse,"
          "median_effective_lambda\n";
    for (const auto &s : summarize_deconv(rows))
        os << s.method << ',' << detail::fmt(s.snr_db) << ',' << to_string(s.noise_mode) << ',' << s.count << ','
           << detail::fmt(s.median_rmse) << ',' << detail::fmt(s.median_rmse_normalized) << ','
           << detail::fmt(s.median_corrcoef) << ',' << detail::fmt(s.mean_rmse) << ','
           << detail::fmt(s.median_effective_lambda) << '\n';
}

inline void write_protocol_summary_csv(std::ostream &os, const ExperimentConfig &cfg,
                                       const std::vector<ProtocolRow> &rows)
{
    os << metadata_line(cfg, "summary");
    os << "snr_db,gb,configs,mean_key_diff,se_key_diff,mean_ckg_key_bits,mean_ckd_key_bits,mean_ckg_bit_match,"
          "se_ckg_bit_match,mean_ckd_bit_match\n";
    for (const auto &s : summarize_protocol(rows))
        os << detail::fmt(s.snr_db) << ',' << detail::fmt(s.guard_band) << ',' << s.configs << ','
           << detail::fmt(s.mean_key_diff) << ',' << detail::fmt(s.se_key_diff) << ','
           << detail::fmt(s.mean_ckg_key_bits) << ',' << detail::fmt(s.mean_ckd_key_bits) << ','
           << detail::fmt(s.mean_ckg_bit_match) << ',' << detail::fmt(s.se_ckg_bit_match) << ','
           << detail::fmt(s.mean_ckd_bit_match) << '\n';
}

inline void write_traffic_summary_csv(std::ostream &os, const ExperimentConfig &cfg, const std::vector<TrafficRow> &rows)
{
    os << metadata_line(cfg, "summary");
    os << "nodes,ckd_total,ckg_total,ckg_minus_ckd\n";
    for (std::size_t k = 0; k + 1 < rows.size(); k += 2)
    {
        const long long ckd = rows[k].ledger.total(), ckg = rows[k + 1].ledger.total();
        os << rows[k].nodes << ',' << ckd << ',' << ckg << ',' << ckg - ckd << '\n';
    }
}

} // namespace chwhisper

#endif
