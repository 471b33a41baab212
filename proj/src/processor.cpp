#include "tiermem/processor.hpp"

#include "tiermem/context.hpp"

#include "json.hpp"

namespace tiermem {

ScriptedProcessor::ScriptedProcessor(std::vector<ScriptEntry> script) : script_(std::move(script)) {}

ScriptedProcessor ScriptedProcessor::from_outputs(const std::vector<std::string>& outputs) {
    std::vector<ScriptEntry> script;
    script.reserve(outputs.size());
    for (const auto& o : outputs) script.push_back(ScriptEntry{o, std::nullopt, false});
    return ScriptedProcessor{std::move(script)};
}

Result<std::string> ScriptedProcessor::complete(const std::string& prompt) {
    ++calls_;
    while (cursor_ < script_.size()) {
        const ScriptEntry& e = script_[cursor_++];
        if (e.when && prompt.find(*e.when) == std::string::npos) continue;
        if (e.fail) return make_error(Errc::ProcessorUnavailable, "scripted transport failure");
        return e.output;
    }
    return std::string{kExhausted};
}

Result<std::string> EchoProcessor::complete(const std::string& prompt) {
    const auto convo = parse_conversation(prompt);
    // Reply once per user message: yield if the latest entry is our own result.
    for (auto it = convo.rbegin(); it != convo.rend(); ++it) {
        if (it->role == Role::function_result || it->role == Role::function_call) break;
        if (it->role == Role::user) {
            nlohmann::json out = {{"thoughts", "echoing the user"},
                                  {"function", "send_message"},
                                  {"params", {{"message", "You said: " + it->text}}},
                                  {"request_heartbeat", false}};
            return out.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
        }
    }
    return std::string{R"({"thoughts":"nothing to answer"})"};
}

}  // namespace tiermem
