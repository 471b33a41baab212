#include "tiermem/eval/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <functional>

namespace tiermem::eval {

std::vector<std::string> rouge_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += static_cast<char>(std::tolower(c));
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    const auto& outer = a.size() >= b.size() ? a : b;
    const auto& inner = a.size() >= b.size() ? b : a;
    std::vector<std::size_t> prev(inner.size() + 1, 0), cur(inner.size() + 1, 0);
    for (const auto& x : outer) {
        for (std::size_t j = 1; j <= inner.size(); ++j)
            cur[j] = x == inner[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[inner.size()];
}

RougeScore rouge_l(std::string_view candidate, std::string_view reference) {
    const auto c = rouge_tokens(candidate);
    const auto r = rouge_tokens(reference);
    RougeScore s;
    if (c.empty() || r.empty()) return s;
    const double lcs = static_cast<double>(lcs_length(c, r));
    s.precision = lcs / static_cast<double>(c.size());
    s.recall = lcs / static_cast<double>(r.size());
    s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

Result<CsimScore> csim(std::string_view opener, const std::vector<std::string>& persona_fragments,
                       std::string_view human_opener, const Embedder& embedder) {
    if (persona_fragments.size() < 3)
        return make_error(Errc::TooFewFragments, "need at least 3 persona fragments, got " +
                                                     std::to_string(persona_fragments.size()));
    auto o = embedder.embed(opener);
    if (!o) return o.error();
    std::vector<double> sims;
    sims.reserve(persona_fragments.size());
    for (const auto& f : persona_fragments) {
        auto v = embedder.embed(f);
        if (!v) return v.error();
        sims.push_back(cosine(*o, *v));
    }
    std::sort(sims.begin(), sims.end(), std::greater<>());
    auto h = embedder.embed(human_opener);
    if (!h) return h.error();
    CsimScore s;
    s.csim1 = sims[0];
    s.csim3 = (sims[0] + sims[1] + sims[2]) / 3.0;
    s.csimH = cosine(*o, *h);
    return s;
}

}  // namespace tiermem::eval
