#include "tiermem/working_context.hpp"

namespace tiermem {

namespace {

Error capacity_error(Tokens need, Tokens cap) {
    return make_error(Errc::CapacityExceeded,
                      "working context would use " + std::to_string(need) + " of " + std::to_string(cap) +
                          " tokens. Move older facts to archival storage with archival_insert and "
                          "remove them with working_context_replace before adding more.");
}

}  // namespace

Result<WorkingContext> working_context_append(const WorkingContext& wc, std::string_view fragment,
                                              const Tokenizer& tok) {
    if (fragment.empty()) return make_error(Errc::EmptyFragment, "fragment to append is empty");
    WorkingContext next = wc;
    if (!next.text.empty()) next.text += '\n';
    next.text += fragment;
    const Tokens need = tok.count(next.text);
    if (need > wc.cap) return capacity_error(need, wc.cap);
    return next;
}

Result<WorkingContext> working_context_replace(const WorkingContext& wc, std::string_view old_text,
                                               std::string_view new_text, const Tokenizer& tok) {
    if (old_text.empty()) return make_error(Errc::EmptyFragment, "text to replace is empty");
    const auto at = wc.text.find(old_text);
    if (at == std::string::npos)
        return make_error(Errc::NotFound, "'" + std::string(old_text) + "' does not occur in working context");
    WorkingContext next = wc;
    next.text.replace(at, old_text.size(), new_text);
    const Tokens need = tok.count(next.text);
    if (need > wc.cap) return capacity_error(need, wc.cap);
    return next;
}

}  // namespace tiermem
