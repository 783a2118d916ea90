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

#include <chwhisper/quantizer.hpp>

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

using namespace chwhisper;
using Catch::Approx;

TEST_CASE("quantizer table", "[quantizer]")
{
    CHECK(quantize({0.1}, {0.0}).bits == "00");
    CHECK(quantize({0.3}, {0.0}).bits == "01");
    CHECK(quantize({0.6}, {0.0}).bits == "11");
    CHECK(quantize({0.9}, {0.0}).bits == "10");
    CHECK(quantize({0.0, 1.0}, {0.0}).bits == "0010");
    // borders go to the upper cell without a guard band
    CHECK(quantize({0.25, 0.5, 0.75}, {0.0}).bits == "011110");
}

TEST_CASE("Gray labels differ in one bit between neighbours", "[quantizer]")
{
    for (std::size_t c = 0; c + 1 < QuantizerConfig::labels.size(); ++c)
    {
        const std::string a = QuantizerConfig::labels[c], b = QuantizerConfig::labels[c + 1];
        CHECK((a[0] != b[0]) + (a[1] != b[1]) == 1);
    }
}

TEST_CASE("guard band drops values near borders", "[quantizer]")
{
    const auto m = quantize({0.24, 0.32, 0.52, 0.9, 0.78}, {0.05});
    CHECK(m.dropped_indices == std::vector<std::size_t>{0, 2, 4});
    CHECK(m.kept_indices == std::vector<std::size_t>{1, 3});
    CHECK(m.bits == "0110");
    CHECK(m.sample_count() == 5);

    // edges of the band are inclusive
    CHECK(quantize({0.2}, {0.05}).dropped_indices.size() == 1);
    CHECK(quantize({0.19}, {0.05}).dropped_indices.empty());
}

TEST_CASE("drop sets are nested as the guard band grows", "[quantizer]")
{
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(500);
    for (double &x : v)
        x = u(rng);
    std::set<std::size_t> prev;
    for (int k = 0; k <= 10; ++k)
    {
        const auto d = quantize(v, {0.01 * k}).dropped_indices;
        const std::set<std::size_t> cur(d.begin(), d.end());
        CHECK(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
        // dropped fraction tracks the band width 6 * gb
        CHECK(static_cast<double>(cur.size()) / v.size() == Approx(6.0 * 0.01 * k).margin(0.05));
        prev = cur;
    }
}

TEST_CASE("guard band and value range are validated", "[quantizer]")
{
    CHECK_THROWS_AS(quantize({0.5}, {0.2}), std::invalid_argument);
    CHECK_THROWS_AS(quantize({0.5}, {-0.01}), std::invalid_argument);
    CHECK_THROWS_AS(quantize({1.2}, {0.0}), std::invalid_argument);
    CHECK_THROWS_AS(quantize({-0.1}, {0.0}), std::invalid_argument);
}

TEST_CASE("index reconciliation removes the union of dropped indices", "[quantizer]")
{
    const QuantizerConfig q{0.05};
    const auto a = quantize({0.1, 0.26, 0.6, 0.9}, q);  // drops 1
    const auto b = quantize({0.1, 0.4, 0.73, 0.9}, q);  // drops 2
    const auto c = quantize({0.12, 0.4, 0.6, 0.95}, q); // drops nothing
    const auto r = reconcile_indices({a, b, c});
    REQUIRE(r.size() == 3);
    for (const auto &m : r)
    {
        CHECK(m.dropped_indices == std::vector<std::size_t>{1, 2});
        CHECK(m.kept_indices == std::vector<std::size_t>{0, 3});
        CHECK(m.bits == "0010");
    }
    CHECK(reconcile_indices({}).empty());
    CHECK_THROWS_AS(reconcile_indices({a, quantize({0.1}, q)}), std::invalid_argument);
}

TEST_CASE("identical inputs give identical keys", "[quantizer]")
{
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(75);
    for (double &x : v)
        x = u(rng);
    for (double gb : {0.0, 0.04, 0.1})
    {
        const auto r = reconcile_indices({quantize(v, {gb}), quantize(v, {gb}), quantize(v, {gb})});
        CHECK(r[0].bits == r[1].bits);
        CHECK(r[1].bits == r[2].bits);
    }
}

TEST_CASE("preprocess: window, square, average, decimate, normalize", "[quantizer]")
{
    const PreprocessConfig cfg;
    CHECK(cfg.output_length() == 25);

    // Oracle: piecewise-constant input with level k on block k of 20 samples.
    SampledSignal s{std::vector<double>(600, 0.0), 10e9, 0.0};
    for (std::size_t n = 0; n < 500; ++n)
        s.samples[n] = std::sqrt(static_cast<double>(n / 20));
    const auto out = preprocess(s, cfg);
    REQUIRE(out.size() == 25);
    for (std::size_t k = 0; k < 25; ++k)
        CHECK(out[k] == Approx(static_cast<double>(k) / 24.0).margin(1e-12));
    CHECK(*std::min_element(out.begin(), out.end()) == 0.0);
    CHECK(*std::max_element(out.begin(), out.end()) == 1.0);
}

TEST_CASE("preprocess is invariant to sign and scale", "[quantizer]")
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    SampledSignal s{std::vector<double>(500), 10e9, 0.0};
    for (double &x : s.samples)
        x = g(rng);
    SampledSignal t = s;
    for (double &x : t.samples)
        x *= -3.0;
    const auto a = preprocess(s, {});
    const auto b = preprocess(t, {});
    for (std::size_t k = 0; k < a.size(); ++k)
        CHECK(a[k] == Approx(b[k]).margin(1e-12));
}

TEST_CASE("preprocess rejects degenerate input", "[quantizer]")
{
    CHECK_THROWS_AS(preprocess(SampledSignal{std::vector<double>(500, 0.0), 10e9, 0.0}, {}), std::invalid_argument);
    CHECK_THROWS_AS(preprocess(SampledSignal{std::vector<double>(5, 1.0), 0.1e9, 0.0}, {}), std::invalid_argument);
    PreprocessConfig bad;
    bad.window = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("links concatenate in canonical order", "[quantizer]")
{
    const std::vector<std::vector<double>> parts{{3.0}, {1.0, 1.5}, {2.0}};
    const auto v = concat_links(parts, {{2, 1}, {1, 0}, {0, 2}});
    CHECK(v == std::vector<double>{1.0, 1.5, 2.0, 3.0});
    CHECK(concat_links({{1.0}, {2.0}}, {{0, 1}, {0, 2}}) == concat_links({{2.0}, {1.0}}, {{2, 0}, {1, 0}}));
    CHECK_THROWS_AS(concat_links({{1.0}, {2.0}}, {{0, 1}, {1, 0}}), std::invalid_argument);
    CHECK_THROWS_AS(concat_links({{1.0}}, {{0, 1}, {1, 2}}), std::invalid_argument);
}

TEST_CASE("bit material CSV", "[quantizer]")
{
    std::ostringstream os;
    write_bit_material_csv(os, reconcile_indices({quantize({0.1, 0.5, 0.9}, {0.02})}));
    CHECK(os.str() == "node,bits,dropped_indices\n0,0010,1\n");
}
