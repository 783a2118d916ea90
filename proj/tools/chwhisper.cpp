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

// Batch experiment runner: deconv-eval, protocol-compare and traffic sweeps
// written as flat CSV files.

#include <chwhisper/experiment.hpp>

#include <CLI11.hpp>

#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

using namespace chwhisper;

namespace {

std::string summary_path(const std::string &out)
{
    const std::string ext = ".csv";
    if (out.size() > ext.size() && out.compare(out.size() - ext.size(), ext.size(), ext) == 0)
        return out.substr(0, out.size() - ext.size()) + ".summary.csv";
    return out + ".summary.csv";
}

template <typename Writer>
void write_to(const std::string &path, Writer &&write)
{
    if (path == "-")
    {
        write(std::cout);
        return;
    }
    std::ofstream os(path);
    if (!os)
        throw std::runtime_error("cannot open '" + path + "' for writing");
    write(os);
    if (!os)
        throw std::runtime_error("write to '" + path + "' failed");
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"chwhisper: channel whispering group key generation experiments"};
    app.set_config("--config", "", "key=value file; command-line flags take precedence");

    ExperimentConfig cfg;
    std::string scenario = "deconv-eval";
    std::string out = "-";
    std::vector<std::string> methods;
    std::vector<std::string> noise_modes;
    std::string protocol_deconv;
    bool summarize = false;
    std::string fading;

    app.add_option("--scenario", scenario, "deconv-eval | protocol-compare | traffic")
        ->check(CLI::IsMember({"deconv-eval", "protocol-compare", "traffic"}));
    app.add_option("--seed", cfg.seed, "master seed");
    app.add_option("--configs", cfg.n_configs, "channel configurations (default 5000 / 500)")->check(CLI::PositiveNumber);
    app.add_option("--snr", cfg.snr_list, "SNR list in dB")->delimiter(',');
    app.add_option("--gb", cfg.gb_list, "guard-band list")->delimiter(',');
    app.add_option("--methods", methods, "ml, map:<lambda>, map-cv, em")->delimiter(',');
    app.add_option("--noise-mode", noise_modes, "pre-estimation-only | entirely-noisy")->delimiter(',');
    app.add_option("--out", out, "output CSV, '-' for stdout");
    app.add_option("--threads", cfg.threads, "worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--summarize", summarize, "also write aggregated <out>.summary.csv");
    app.add_option("--budget", cfg.packet_budget, "packet budget per protocol (protocol-compare)");
    app.add_option("--deconv", protocol_deconv, "deconvolution used by the protocol (protocol-compare)");
    app.add_option("--lead-packets", cfg.lead_setup_packets, "lead-node setup packets x");
    app.add_option("--nodes-min", cfg.nodes_min, "smallest network (traffic)");
    app.add_option("--nodes-max", cfg.nodes_max, "largest network (traffic)");
    app.add_option("--max-paths", cfg.estimator.max_paths, "estimator path limit");
    app.add_option("--fading", fading, "lognormal | nakagami-approx");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        return app.exit(e);
    }

    try
    {
        cfg.scenario = scenario_from_string(scenario);
        if (!methods.empty())
        {
            cfg.methods.clear();
            for (const auto &m : methods)
                cfg.methods.push_back(parse_deconv_choice(m));
        }
        if (!noise_modes.empty())
        {
            cfg.noise_modes.clear();
            for (const auto &m : noise_modes)
                cfg.noise_modes.push_back(noise_mode_from_string(m));
        }
        if (!protocol_deconv.empty())
            cfg.protocol_deconv = parse_deconv_choice(protocol_deconv);
        if (!fading.empty())
            cfg.channel.amplitude_fading_law = fading_law_from_string(fading);
        cfg.validate();
        if (summarize && out == "-")
            throw std::invalid_argument("--summarize needs --out <file>");

        switch (cfg.scenario)
        {
        case Scenario::deconv_eval:
        {
            const auto rows = run_deconv_eval(cfg);
            write_to(out, [&](std::ostream &os) { write_deconv_csv(os, cfg, rows); });
            if (summarize)
                write_to(summary_path(out), [&](std::ostream &os) { write_deconv_summary_csv(os, cfg, rows); });
            break;
        }
        case Scenario::protocol_compare:
        {
            const auto rows = run_protocol_compare(cfg);
            write_to(out, [&](std::ostream &os) { write_protocol_csv(os, cfg, rows); });
            if (summarize)
                write_to(summary_path(out), [&](std::ostream &os) { write_protocol_summary_csv(os, cfg, rows); });
            break;
        }
        case Scenario::traffic:
        {
            const auto rows = run_traffic(cfg);
            write_to(out, [&](std::ostream &os) { write_traffic_csv(os, cfg, rows); });
            if (summarize)
                write_to(summary_path(out), [&](std::ostream &os) { write_traffic_summary_csv(os, cfg, rows); });
            break;
        }
        }
    }
    catch (const std::exception &e)
    {
        std::cerr << "chwhisper: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
