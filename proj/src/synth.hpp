#ifndef CIRN_SYNTH_HPP
#define CIRN_SYNTH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "text_data.hpp"

namespace cirn {

// Three-class toy NLI corpus: entailment iff hypothesis tokens are a subset
// of premise tokens; contradiction iff the hypothesis contains the negation
// token "not"; neutral otherwise.
std::vector<ExampleRecord> make_subset_nli(std::size_t count, std::uint64_t seed);

// Two-class task solvable only through cross-sentence interaction: the label
// is entailment iff the two sentences share a token at the same position,
// neutral otherwise. Both sentences have equal length.
std::vector<ExampleRecord> make_position_match(std::size_t count, std::uint64_t seed);

std::vector<ExampleRecord> make_synthetic(const std::string& task, std::size_t count,
                                          std::uint64_t seed);

}  // namespace cirn

#endif
