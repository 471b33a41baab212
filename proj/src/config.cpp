#include "tiermem/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace tiermem {

using nlohmann::json;

namespace {

Error bad_key(std::string_view key, std::string_view why) {
    return make_error(Errc::InvalidConfig, std::string(key) + ": " + std::string(why));
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::string unquote(std::string_view s) {
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\'')))
        return std::string(s.substr(1, s.size() - 2));
    return std::string(s);
}

}  // namespace

Result<void> AgentConfig::validate() const {
    if (max_chain < 1) return bad_key("max_chain", "must be >= 1");
    if (page_size < 1) return bad_key("page_size", "must be >= 1");
    if (budget_total < 64) return bad_key("budget_total", "must be at least 64 tokens");
    if (!(warn_ratio > 0 && warn_ratio < 1)) return bad_key("warn_ratio", "must be in (0,1)");
    if (!(evict_target_ratio > 0 && evict_target_ratio < warn_ratio))
        return bad_key("evict_target_ratio", "must be in (0, warn_ratio)");
    if (!(summary_ratio > 0 && summary_ratio < evict_target_ratio))
        return bad_key("summary_ratio", "must be in (0, evict_target_ratio)");
    if (processor != "echo" && processor != "scripted" && processor != "http")
        return bad_key("processor", "expected echo, scripted or http");
    if (embedder != "hashed-bow" && embedder != "http") return bad_key("embedder", "expected hashed-bow or http");
    if (summarizer != "truncation" && summarizer != "processor")
        return bad_key("summarizer", "expected truncation or processor");
    if (tick_interval && tick_interval->count() <= 0) return bad_key("tick_interval_ms", "must be positive");
    return {};
}

json config_to_json(const AgentConfig& c) {
    json j = {{"budget_total", c.budget_total},
              {"max_chain", c.max_chain},
              {"warn_ratio", c.warn_ratio},
              {"evict_target_ratio", c.evict_target_ratio},
              {"summary_ratio", c.summary_ratio},
              {"page_size", c.page_size},
              {"result_item_chars", c.result_item_chars},
              {"tick_interval_ms", c.tick_interval ? json(c.tick_interval->count()) : json(nullptr)},
              {"processor", c.processor},
              {"embedder", c.embedder},
              {"embed_dim", c.embed_dim},
              {"summarizer", c.summarizer},
              {"disabled_functions", c.disabled_functions},
              {"preamble", c.preamble ? json(*c.preamble) : json(nullptr)}};
    json script = json::array();
    for (const auto& e : c.script) {
        json s = {{"output", e.output}};
        if (e.when) s["when"] = *e.when;
        if (e.fail) s["fail"] = true;
        script.push_back(std::move(s));
    }
    j["script"] = std::move(script);
    return j;
}

Result<AgentConfig> config_from_json(const json& j, AgentConfig c) {
    if (!j.is_object()) return make_error(Errc::InvalidConfig, "config must be a JSON object");
    auto unsigned_field = [&](const char* key, std::size_t& out) -> Result<void> {
        if (auto it = j.find(key); it != j.end()) {
            if (!it->is_number_integer() || (!it->is_number_unsigned() && it->get<std::int64_t>() < 0))
                return bad_key(key, "must be a non-negative integer");
            out = it->get<std::size_t>();
        }
        return {};
    };
    auto double_field = [&](const char* key, double& out) -> Result<void> {
        if (auto it = j.find(key); it != j.end()) {
            if (!it->is_number()) return bad_key(key, "must be a number");
            out = it->get<double>();
        }
        return {};
    };
    auto string_field = [&](const char* key, std::string& out) -> Result<void> {
        if (auto it = j.find(key); it != j.end()) {
            if (!it->is_string()) return bad_key(key, "must be a string");
            out = it->get<std::string>();
        }
        return {};
    };
    for (auto r : {unsigned_field("budget_total", c.budget_total), unsigned_field("max_chain", c.max_chain),
                   unsigned_field("page_size", c.page_size), unsigned_field("result_item_chars", c.result_item_chars),
                   unsigned_field("embed_dim", c.embed_dim), double_field("warn_ratio", c.warn_ratio),
                   double_field("evict_target_ratio", c.evict_target_ratio),
                   double_field("summary_ratio", c.summary_ratio), string_field("processor", c.processor),
                   string_field("embedder", c.embedder), string_field("summarizer", c.summarizer)})
        if (!r) return r.error();

    if (auto it = j.find("tick_interval_ms"); it != j.end() && !it->is_null()) {
        if (!it->is_number_integer()) return bad_key("tick_interval_ms", "must be an integer");
        c.tick_interval = Millis{it->get<std::int64_t>()};
    }
    if (auto it = j.find("preamble"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) return bad_key("preamble", "must be a string");
        c.preamble = it->get<std::string>();
    }
    if (auto it = j.find("disabled_functions"); it != j.end()) {
        if (!it->is_array()) return bad_key("disabled_functions", "must be an array");
        c.disabled_functions.clear();
        for (const auto& x : *it) {
            if (!x.is_string()) return bad_key("disabled_functions", "entries must be strings");
            c.disabled_functions.push_back(x.get<std::string>());
        }
    }
    if (auto it = j.find("script"); it != j.end()) {
        if (!it->is_array()) return bad_key("script", "must be an array");
        c.script.clear();
        for (const auto& x : *it) {
            ScriptEntry e;
            if (x.is_string()) {
                e.output = x.get<std::string>();
            } else if (x.is_object() && x.contains("output") && x["output"].is_string()) {
                e.output = x["output"].get<std::string>();
                if (x.contains("when")) {
                    if (!x["when"].is_string()) return bad_key("script", "'when' must be a string");
                    e.when = x["when"].get<std::string>();
                }
                if (x.contains("fail")) {
                    if (!x["fail"].is_boolean()) return bad_key("script", "'fail' must be a boolean");
                    e.fail = x["fail"].get<bool>();
                }
            } else {
                return bad_key("script", "entries must be strings or {output, when?, fail?}");
            }
            c.script.push_back(std::move(e));
        }
    }
    if (auto r = c.validate(); !r) return r.error();
    return c;
}

Result<AgentConfig> parse_config_text(std::string_view text, AgentConfig c) {
    std::size_t lineno = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty() || line.front() == '[') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            return make_error(Errc::InvalidConfig, "line " + std::to_string(lineno) + ": expected key = value");
        const std::string key{trim(line.substr(0, eq))};
        const std::string value = unquote(trim(line.substr(eq + 1)));

        auto as_unsigned = [&](std::size_t& out) -> Result<void> {
            std::size_t v = 0;
            auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
            if (ec != std::errc{} || p != value.data() + value.size()) return bad_key(key, "expected an integer");
            out = v;
            return {};
        };
        auto as_double = [&](double& out) -> Result<void> {
            std::istringstream in(value);
            double v = 0;
            if (!(in >> v) || !in.eof()) return bad_key(key, "expected a number");
            out = v;
            return {};
        };

        Result<void> r;
        if (key == "budget_total") r = as_unsigned(c.budget_total);
        else if (key == "max_chain") r = as_unsigned(c.max_chain);
        else if (key == "page_size") r = as_unsigned(c.page_size);
        else if (key == "result_item_chars") r = as_unsigned(c.result_item_chars);
        else if (key == "embed_dim") r = as_unsigned(c.embed_dim);
        else if (key == "warn_ratio") r = as_double(c.warn_ratio);
        else if (key == "evict_target_ratio") r = as_double(c.evict_target_ratio);
        else if (key == "summary_ratio") r = as_double(c.summary_ratio);
        else if (key == "tick_interval_ms") {
            std::size_t ms = 0;
            r = as_unsigned(ms);
            if (r) c.tick_interval = Millis{static_cast<Millis::rep>(ms)};
        } else if (key == "processor") c.processor = value;
        else if (key == "embedder") c.embedder = value;
        else if (key == "summarizer") c.summarizer = value;
        else if (key == "disabled_functions") {
            c.disabled_functions.clear();
            std::string_view rest = value;
            while (!rest.empty()) {
                const auto comma = rest.find(',');
                auto item = trim(rest.substr(0, comma));
                if (!item.empty()) c.disabled_functions.emplace_back(item);
                rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
            }
        } else {
            return bad_key(key, "unknown key");
        }
        if (!r) return r.error();
    }
    if (auto r = c.validate(); !r) return r.error();
    return c;
}

Result<AgentConfig> load_config_file(const std::filesystem::path& file, AgentConfig base) {
    std::ifstream in(file, std::ios::binary);
    if (!in) return make_error(Errc::Io, "cannot read " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    if (file.extension() == ".json") {
        json j = json::parse(text, nullptr, false);
        if (j.is_discarded()) return make_error(Errc::InvalidConfig, file.string() + " is not valid JSON");
        return config_from_json(j, std::move(base));
    }
    return parse_config_text(text, std::move(base));
}

Result<std::shared_ptr<Processor>> make_processor(const AgentConfig& cfg) {
    if (cfg.processor == "echo") return std::shared_ptr<Processor>(std::make_shared<EchoProcessor>());
    if (cfg.processor == "scripted") return std::shared_ptr<Processor>(std::make_shared<ScriptedProcessor>(cfg.script));
    if (cfg.processor == "http") {
        auto opts = HttpProcessorOptions::from_env();
        if (!opts) return opts.error();
        return std::shared_ptr<Processor>(std::make_shared<HttpProcessor>(std::move(*opts)));
    }
    return bad_key("processor", "unknown backend '" + cfg.processor + "'");
}

Result<std::shared_ptr<const Embedder>> make_embedder(const AgentConfig& cfg) {
    if (cfg.embedder == "hashed-bow")
        return std::shared_ptr<const Embedder>(std::make_shared<HashedBowEmbedder>(cfg.embed_dim));
    if (cfg.embedder == "http") {
        auto opts = HttpEmbedderOptions::from_env();
        if (!opts) return opts.error();
        return std::shared_ptr<const Embedder>(std::make_shared<HttpEmbedder>(std::move(*opts)));
    }
    return bad_key("embedder", "unknown backend '" + cfg.embedder + "'");
}

}  // namespace tiermem
