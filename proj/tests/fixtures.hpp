#pragma once

#include "string_rope/freq.hpp"

namespace string_rope::testing {

// Stand-in for a SlimPajama-like length mix at L = 2048: most sequences are
// short, with a spike of full-length sequences.
inline LengthHistogram slimpajama_like() {
  LengthHistogram h;
  for (const auto& [len, count] : std::initializer_list<std::pair<std::int64_t, std::int64_t>>{
           {64, 300}, {128, 500}, {256, 900}, {384, 1000}, {512, 900}, {768, 600},
           {1024, 400}, {1280, 200}, {1536, 120}, {1792, 80}, {2048, 1300}})
    h.add(len, count);
  return h;
}

}  // namespace string_rope::testing
