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

#ifndef CHWHISPER_SEED_HPP
#define CHWHISPER_SEED_HPP

#include <cstdint>

namespace chwhisper {

using Seed = std::uint64_t;

// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Child seed for a labelled sub-stream: `derive_seed(master, config_id)`,
/// `derive_seed(round, Event::probe, tx, rx)`, ... Each tag is folded in
/// through one SplitMix64 round, so distinct tag paths give independent
/// streams and the result depends only on the parent and the tag values.
template <typename... Tags>
constexpr Seed derive_seed(Seed parent, Tags... tags) noexcept
{
    std::uint64_t h = splitmix64(parent);
    ((h = splitmix64(h ^ static_cast<std::uint64_t>(tags))), ...);
    return h;
}

} // namespace chwhisper

#endif
