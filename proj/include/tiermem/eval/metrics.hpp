#pragma once

#include "tiermem/embedding.hpp"
#include "tiermem/result.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace tiermem::eval {

struct RougeScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Lowercased whitespace tokens.
std::vector<std::string> rouge_tokens(std::string_view text);

// Length of the longest common subsequence, O(n*m) time, O(min) memory.
std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

// P = LCS/|candidate|, R = LCS/|reference|, F1 = 2PR/(P+R) (0 when P+R = 0).
RougeScore rouge_l(std::string_view candidate, std::string_view reference);

struct CsimScore {
    double csim1 = 0.0;  // best fragment
    double csim3 = 0.0;  // mean of the top three fragments
    double csimH = 0.0;  // against the human-written opener
};

// Errors: TooFewFragments (< 3), or the embedder's error.
Result<CsimScore> csim(std::string_view opener, const std::vector<std::string>& persona_fragments,
                       std::string_view human_opener, const Embedder& embedder);

}  // namespace tiermem::eval
