#pragma once

#include "tiermem/agent.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace tiermem::eval {

struct DocQaQuestion {
    std::string question;
    std::string answer;  // gold substring
};

enum class DocQaMode {
    fixed_k,  // top-K paragraphs placed in the prompt, one read
    paged,    // archival_search pages of K until the reader finds an answer
};

struct DocQaResult {
    double accuracy = 0.0;
    std::size_t correct = 0;
    std::size_t total = 0;
    std::vector<std::string> answers;
    std::vector<bool> per_question;
    std::vector<std::size_t> pages_read;  // archival_search calls per question
};

// Blank-line separated blocks, trimmed; empty blocks dropped.
std::vector<std::string> split_paragraphs(std::string_view document);

// Reader: for "What is X?" returns the phrase after "X is" in the first text
// that contains it, up to the end of that sentence.
std::optional<std::string> read_answer(std::string_view question, const std::vector<std::string>& texts);

// Each question runs on a fresh agent whose archival storage holds every
// paragraph of the corpus. Correct when the final message contains the gold
// substring.
Result<DocQaResult> run_docqa(const AgentConfig& config, const std::vector<std::string>& corpus,
                              const std::vector<DocQaQuestion>& questions, std::size_t k, DocQaMode mode);

// Question file: JSON array of {"question", "answer"}.
Result<std::vector<DocQaQuestion>> parse_questions(std::string_view json_text);

}  // namespace tiermem::eval
