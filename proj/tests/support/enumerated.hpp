#pragma once

#include <cstdint>

// Parameter and FLOP counts of the default configuration (batch 1, 32^3
// input), produced by tests/data/enumerate_model.py from its own layer table.
namespace ukan::testing {

constexpr std::int64_t kParamsUkan = 876661;
constexpr std::int64_t kParamsUkanPfa = 1125941;
constexpr std::int64_t kParamsUkanEp = 1125947;
constexpr std::int64_t kParamsEcaAfterSkip = 876667;
constexpr std::int64_t kFlopsUkan = 2228790016;
constexpr std::int64_t kFlopsUkanPfa = 13843866368;
constexpr std::int64_t kFlopsUkanEp = 13847930640;
constexpr std::int64_t kFlopsEcaAfterSkip = 2229445616;

}  // namespace ukan::testing
