#pragma once

#include "tiermem/external.hpp"
#include "tiermem/working_context.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace tiermem {

using Json = nlohmann::json;

enum class ParamType { string, integer, boolean };

std::string_view to_string(ParamType t);

struct ParamSpec {
    std::string name;
    ParamType type = ParamType::string;
    bool required = true;
    std::string description;
};

struct FunctionSchema {
    std::string name;
    std::string description;
    std::vector<ParamSpec> params;
    bool returns_page = false;
};

class FunctionRegistry {
public:
    // Errors: DuplicateName (function or parameter).
    Result<void> add(FunctionSchema schema);

    const FunctionSchema* find(std::string_view name) const;
    const std::vector<FunctionSchema>& schemas() const { return schemas_; }
    bool empty() const { return schemas_.empty(); }

    // Same registry minus the named functions.
    FunctionRegistry without(std::initializer_list<std::string_view> names) const;

    // send_message, working_context_append, working_context_replace,
    // recall_search_text, recall_search_date, archival_insert,
    // archival_search, pause_heartbeats.
    static const FunctionRegistry& defaults();

private:
    std::vector<FunctionSchema> schemas_;
};

// Canonical listing, sorted by name. Errors: DuplicateName, EmptyText for an
// empty registry.
Result<std::string> render_schema(std::span<const FunctionSchema> schemas);

struct FunctionCall {
    std::string name;
    Json params = Json::object();
};

struct ParsedOutput {
    std::optional<std::string> thoughts;
    std::optional<FunctionCall> call;
    bool request_heartbeat = false;
};

// Accepts exactly one JSON object (surrounding whitespace allowed) with
// optional keys thoughts, function, params, request_heartbeat. Failures come
// back as Errc::ParseError data; the function never throws.
Result<ParsedOutput> parse_output(std::string_view text);

using ArgValue = std::variant<std::string, std::int64_t, bool>;
using ArgMap = std::map<std::string, ArgValue>;

struct ValidatedCall {
    std::string name;
    ArgMap args;
    bool request_heartbeat = false;

    bool operator==(const ValidatedCall&) const = default;
};

// Errors (Errc::ValidationError) name the offending function or parameter.
Result<ValidatedCall> validate(const FunctionCall& call, bool request_heartbeat, const FunctionRegistry& registry);

// Canonical processor output carrying this call.
std::string render_call(const ValidatedCall& call, const std::optional<std::string>& thoughts = std::nullopt);

Json args_to_json(const ArgMap& args);

// Everything a function may touch while it runs.
struct ToolContext {
    WorkingContext& working;
    RecallStore& recall;
    ArchivalStore& archival;
    std::vector<std::string>& outbound;
    std::optional<Instant>& paused_until;
    Instant now;
    std::size_t page_size = kDefaultPageSize;
    // Per-item character limit in paged results.
    std::size_t item_chars = 600;
    const Tokenizer& tok = default_tokenizer();
};

struct Execution {
    std::string result;  // function_result message text (JSON)
    bool ok = true;
};

// Never fails: runtime errors are rendered into the result text.
Execution execute(const ValidatedCall& call, ToolContext& ctx);

}  // namespace tiermem
