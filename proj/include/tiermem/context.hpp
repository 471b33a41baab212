#pragma once

#include "tiermem/result.hpp"
#include "tiermem/time.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tiermem {

using Tokens = std::size_t;

enum class Role { user, assistant, system, function_call, function_result };

std::string_view to_string(Role role);
std::optional<Role> role_from_string(std::string_view name);

class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual Tokens count(std::string_view text) const = 0;
};

// ceil(code_points / 5): roughly 250 characters per 50 tokens.
class HeuristicTokenizer final : public Tokenizer {
public:
    static constexpr std::size_t kCharsPerToken = 5;
    Tokens count(std::string_view text) const override;
};

const Tokenizer& default_tokenizer();

inline Tokens count_tokens(std::string_view text) { return default_tokenizer().count(text); }

std::size_t utf8_length(std::string_view text);

struct Message {
    std::string id;
    Role role = Role::user;
    std::string text;
    Instant timestamp{};
    Tokens token_count = 0;

    bool operator==(const Message&) const = default;
};

Message make_message(std::string id, Role role, std::string text, Instant timestamp,
                     const Tokenizer& tok = default_tokenizer());

struct TokenBudget {
    Tokens total = 0;
    Tokens system_reserved = 0;
    Tokens working_cap = 0;
    Tokens queue_cap = 0;

    bool valid() const { return system_reserved + working_cap + queue_cap <= total; }
    bool operator==(const TokenBudget&) const = default;
};

struct MainContext {
    std::string system_instructions;
    std::string working_context;
    // Rendered queue: the summary (if any) first, then live messages.
    std::vector<Message> queue;
};

// One line, no trailing newline: "[ts] role #id: text". Backslashes and
// newlines in text are escaped so every message occupies exactly one line.
std::string render_message(const Message& m);

// Tokens a message occupies inside the composed document.
Tokens message_cost(const Message& m, const Tokenizer& tok = default_tokenizer());

// Tokens taken by the instructions plus the fixed section headers.
Tokens system_cost(std::string_view instructions, const Tokenizer& tok = default_tokenizer());

// system_reserved = system_cost(instructions); working 25% / queue 75% of the rest.
Result<TokenBudget> make_budget(Tokens total, std::string_view instructions,
                                const Tokenizer& tok = default_tokenizer());

Result<std::string> compose(const MainContext& ctx, const TokenBudget& budget,
                            const Tokenizer& tok = default_tokenizer());

inline constexpr std::string_view kWorkingHeader = "\n\n### WORKING CONTEXT\n";
inline constexpr std::string_view kQueueHeader = "\n\n### CONVERSATION\n";

// Inverse of the conversation section of compose(): recovers the rendered
// messages (token_count left at 0). Lines that do not parse are skipped.
std::vector<Message> parse_conversation(std::string_view composed);

// Describes the memory hierarchy to the processor; the function schema is
// appended by the runtime.
std::string_view default_memory_preamble();

}  // namespace tiermem
