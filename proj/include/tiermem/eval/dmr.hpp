#pragma once

#include "tiermem/agent.hpp"
#include "tiermem/eval/metrics.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tiermem::eval {

inline constexpr std::size_t kDmrSessions = 5;
inline constexpr std::size_t kDmrSessionLength = 12;

// Five prior sessions and a session-6 question whose answer was stated once,
// in one user message of sessions 1-4.
struct DmrCase {
    std::vector<std::vector<Message>> sessions;
    std::string question;
    Instant question_at{};
    std::string gold_answer;       // "my <keyword> is named <Name>"
    std::size_t gold_session_index = 1;  // 1-based
    std::string gold_message;      // full text of the planting message
    std::string keyword;           // unique noun, the longest word of the question
    std::uint64_t seed = 0;
};

DmrCase gen_dmr(std::uint64_t seed);

// Budget at which the queue holds fewer messages than follow any planted
// fact, so the gold message is always evicted before the question.
inline constexpr Tokens kDmrBudget = 2048;
AgentConfig dmr_config();

// Same case with the question's keyword replaced by a word found nowhere.
DmrCase with_nonsense_keyword(DmrCase c);

enum class DmrMode {
    recall,        // recall_search_text on the question keyword
    summary_only,  // recall search disabled; answers from the composed context
};

struct DmrRun {
    std::string answer;
    RougeScore rouge;
    bool retrieved_gold = false;   // gold message on the first result page
    bool gold_evicted = false;     // gold message left the queue before the question
    bool gold_in_context = false;  // planted fact still in the composed context then
};

Result<DmrRun> run_dmr(const AgentConfig& config, const DmrCase& c, DmrMode mode = DmrMode::recall);

}  // namespace tiermem::eval
