#pragma once

#include "tiermem/context.hpp"

#include <string>
#include <string_view>

namespace tiermem {

// Writable scratchpad inside main context. One flat block of text; every
// mutation either respects the cap or leaves the value untouched.
struct WorkingContext {
    std::string text;
    Tokens cap = 0;

    bool operator==(const WorkingContext&) const = default;
};

// Errors: EmptyFragment, CapacityExceeded.
Result<WorkingContext> working_context_append(const WorkingContext& wc, std::string_view fragment,
                                              const Tokenizer& tok = default_tokenizer());

// Replaces the first exact occurrence of old_text. Errors: EmptyFragment
// (old_text empty), NotFound, CapacityExceeded.
Result<WorkingContext> working_context_replace(const WorkingContext& wc, std::string_view old_text,
                                               std::string_view new_text,
                                               const Tokenizer& tok = default_tokenizer());

}  // namespace tiermem
