// Copyright 2026 The tmdstat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tmd/rng.h"

namespace tmd {

Rng::Rng(std::uint64_t seed) {
    SplitMix64 sm(seed);
    for (auto &word : s_) {
        word = sm.next();
    }
}

Rng Rng::substream(std::uint64_t seed, std::uint64_t stream) {
    // Two rounds of mixing so that neighbouring (seed, stream) pairs land far apart.
    SplitMix64 mix(seed);
    std::uint64_t base = mix.next();
    SplitMix64 mix_stream(base ^ (stream * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
    return Rng(mix_stream.next());
}

}  // namespace tmd
