#pragma once

#include "tiermem/result.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace tiermem {

// The fixed-context model: composed main context in, one output string out.
// Transport failures surface as ProcessorUnavailable.
class Processor {
public:
    virtual ~Processor() = default;
    virtual Result<std::string> complete(const std::string& prompt) = 0;
    virtual std::string name() const = 0;
};

struct ScriptEntry {
    std::string output;
    // Entry is eligible only when the composed input contains this text.
    std::optional<std::string> when;
    // Simulates a transport failure instead of returning output.
    bool fail = false;
};

// Returns script entries in order. Conditional entries whose substring is
// absent from the prompt are skipped. Once exhausted, every call yields a
// monologue-only output.
class ScriptedProcessor final : public Processor {
public:
    static constexpr const char* kExhausted = R"({"thoughts":"script exhausted"})";

    explicit ScriptedProcessor(std::vector<ScriptEntry> script);
    static ScriptedProcessor from_outputs(const std::vector<std::string>& outputs);

    Result<std::string> complete(const std::string& prompt) override;
    std::string name() const override { return "scripted"; }

    std::size_t calls() const { return calls_; }
    std::size_t remaining() const { return script_.size() - cursor_; }

private:
    std::vector<ScriptEntry> script_;
    std::size_t cursor_ = 0;
    std::size_t calls_ = 0;
};

// Policy implemented as a function of the composed prompt.
class CallbackProcessor final : public Processor {
public:
    using Fn = std::function<Result<std::string>(const std::string& prompt)>;

    explicit CallbackProcessor(Fn fn, std::string name = "callback") : fn_(std::move(fn)), name_(std::move(name)) {}

    Result<std::string> complete(const std::string& prompt) override {
        ++calls_;
        return fn_(prompt);
    }
    std::string name() const override { return name_; }
    std::size_t calls() const { return calls_; }

private:
    Fn fn_;
    std::string name_;
    std::size_t calls_ = 0;
};

// Answers the latest user message with send_message("You said: ...").
// Lets the CLI and server run end to end without a model.
class EchoProcessor final : public Processor {
public:
    Result<std::string> complete(const std::string& prompt) override;
    std::string name() const override { return "echo"; }
};

struct HttpProcessorOptions {
    std::string url;  // http://host:port/path
    std::string model;
    std::string api_key;
    int timeout_seconds = 60;
    int retries = 2;
    int backoff_ms = 250;

    // TIERMEM_PROCESSOR_URL, TIERMEM_PROCESSOR_MODEL, TIERMEM_PROCESSOR_KEY.
    static Result<HttpProcessorOptions> from_env();
};

// POSTs {"model", "prompt"} and reads {"completion"} (or an OpenAI-style
// choices[0].message.content). Retries transport errors and 5xx with
// exponential backoff.
class HttpProcessor final : public Processor {
public:
    explicit HttpProcessor(HttpProcessorOptions opts) : opts_(std::move(opts)) {}

    Result<std::string> complete(const std::string& prompt) override;
    std::string name() const override { return "http"; }

private:
    HttpProcessorOptions opts_;
};

}  // namespace tiermem
