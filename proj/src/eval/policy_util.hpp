#pragma once

#include "tiermem/context.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

// Helpers shared by the scripted evaluation policies.
namespace tiermem::eval::detail {

// Messages after the latest user message in the composed prompt, and that
// user message itself.
struct Turn {
    std::optional<Message> user;
    std::vector<Message> after;
};

inline Turn current_turn(const std::string& prompt) {
    auto convo = parse_conversation(prompt);
    Turn t;
    for (auto it = convo.rbegin(); it != convo.rend(); ++it) {
        if (it->role == Role::user) {
            t.user = *it;
            t.after.assign(it.base(), convo.end());
            return t;
        }
    }
    t.after = std::move(convo);
    return t;
}

inline std::optional<nlohmann::json> last_result(const Turn& t) {
    for (auto it = t.after.rbegin(); it != t.after.rend(); ++it) {
        if (it->role != Role::function_result) continue;
        auto j = nlohmann::json::parse(it->text, nullptr, false);
        if (j.is_discarded() || !j.is_object()) return std::nullopt;
        return j;
    }
    return std::nullopt;
}

inline std::string call_json(const std::string& thoughts, const std::string& fn, nlohmann::json params,
                             bool heartbeat) {
    nlohmann::json out = {{"thoughts", thoughts}, {"function", fn}, {"params", std::move(params)},
                          {"request_heartbeat", heartbeat}};
    return out.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

inline std::string send(const std::string& text) {
    return call_json("answering", "send_message", {{"message", text}}, false);
}

}  // namespace tiermem::eval::detail
