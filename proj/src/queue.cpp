#include "tiermem/queue.hpp"

#include <cmath>

namespace tiermem {

namespace {

Tokens ratio_of(double ratio, Tokens cap) {
    return static_cast<Tokens>(std::floor(ratio * static_cast<double>(cap)));
}

std::string first_sentence(std::string_view text) {
    std::string flat;
    flat.reserve(text.size());
    for (char c : text) flat += (c == '\n' || c == '\r') ? ' ' : c;
    std::size_t end = flat.size();
    for (std::size_t i = 0; i < flat.size(); ++i) {
        const char c = flat[i];
        if ((c == '.' || c == '!' || c == '?') && (i + 1 == flat.size() || flat[i + 1] == ' ')) {
            end = i + 1;
            break;
        }
    }
    std::string_view s{flat.data(), end};
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    return std::string(s);
}

std::size_t align_utf8_forward(std::string_view s, std::size_t pos) {
    while (pos < s.size() && (static_cast<unsigned char>(s[pos]) & 0xC0) == 0x80) ++pos;
    return pos;
}

std::size_t align_utf8_back(std::string_view s, std::size_t len) {
    while (len > 0 && len < s.size() && (static_cast<unsigned char>(s[len]) & 0xC0) == 0x80) --len;
    return len;
}

// Longest prefix of s that fits in cap tokens.
std::string fit_prefix(std::string_view s, Tokens cap, const Tokenizer& tok) {
    std::size_t lo = 0, hi = s.size();
    while (lo < hi) {
        const std::size_t mid = (lo + hi + 1) / 2;
        if (tok.count(s.substr(0, align_utf8_back(s, mid))) <= cap)
            lo = mid;
        else
            hi = mid - 1;
    }
    return std::string(s.substr(0, align_utf8_back(s, lo)));
}

}  // namespace

Result<void> QueueConfig::validate() const {
    if (cap == 0) return make_error(Errc::InvalidConfig, "queue cap must be positive");
    if (!(warn_ratio > 0.0 && warn_ratio < 1.0))
        return make_error(Errc::InvalidConfig, "warn_ratio must be in (0,1)");
    if (!(evict_target_ratio > 0.0 && evict_target_ratio < warn_ratio))
        return make_error(Errc::InvalidConfig, "evict_target_ratio must be in (0, warn_ratio)");
    if (!(summary_ratio > 0.0 && summary_ratio < evict_target_ratio))
        return make_error(Errc::InvalidConfig, "summary_ratio must be in (0, evict_target_ratio)");
    return {};
}

Tokens QueueConfig::warn_threshold() const { return ratio_of(warn_ratio, cap); }
Tokens QueueConfig::evict_target() const { return ratio_of(evict_target_ratio, cap); }
Tokens QueueConfig::summary_budget() const { return ratio_of(summary_ratio, cap); }

Tokens QueueState::occupancy(const Tokenizer& tok) const {
    Tokens total = summary ? message_cost(*summary, tok) : 0;
    for (const auto& m : messages) total += message_cost(m, tok);
    return total;
}

std::vector<Message> QueueState::rendered() const {
    std::vector<Message> out;
    out.reserve(messages.size() + 1);
    if (summary) out.push_back(*summary);
    out.insert(out.end(), messages.begin(), messages.end());
    return out;
}

std::string truncation_summarizer(const std::optional<std::string>& prior,
                                  std::span<const Message> evicted, Tokens cap, const Tokenizer& tok) {
    if (evicted.empty()) return prior.value_or(std::string{});
    if (cap == 0) return {};

    std::string header = "SUMMARY(n=" + std::to_string(evicted.size()) +
                         "; span=" + format_iso8601(evicted.front().timestamp) + ".." +
                         format_iso8601(evicted.back().timestamp) + "): ";
    std::string body;
    auto add = [&body](std::string_view part) {
        if (part.empty()) return;
        if (!body.empty()) body += " | ";
        body += part;
    };
    if (prior) add(*prior);
    for (const auto& m : evicted) add(first_sentence(m.text));

    std::string out = header + body;
    if (tok.count(out) <= cap) return out;

    // Keep the newest part of the body.
    static constexpr std::string_view kEllipsis = "...";
    const std::string lead = header + std::string(kEllipsis);
    if (tok.count(lead) > cap) return fit_prefix(header, cap, tok);

    std::size_t lo = 0, hi = body.size();  // smallest start offset that fits
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        const std::size_t start = align_utf8_forward(body, mid);
        if (tok.count(lead + body.substr(start)) <= cap)
            hi = mid;
        else
            lo = mid + 1;
    }
    return lead + body.substr(align_utf8_forward(body, lo));
}

Result<EnqueueOutcome> enqueue(QueueState state, Message msg, const Tokenizer& tok) {
    const QueueConfig& cfg = state.config;
    const Tokens cost = message_cost(msg, tok);
    if (cost > cfg.cap)
        return make_error(Errc::MessageTooLarge, "message " + msg.id + " needs " + std::to_string(cost) +
                                                     " tokens; queue cap is " + std::to_string(cfg.cap));
    const Tokens before = state.occupancy(tok);
    Tokens after = before + cost;
    if (after > cfg.cap)
        return make_error(Errc::QueueFull, "queue at " + std::to_string(before) + "/" +
                                               std::to_string(cfg.cap) + " tokens");

    std::optional<Message> warning;
    if (!state.warned && after >= cfg.warn_threshold()) {
        warning = make_message(msg.id + "-w", Role::system, std::string(kPressureWarning), msg.timestamp, tok);
        after += message_cost(*warning, tok);
        if (after > cfg.cap)
            return make_error(Errc::QueueFull, "no room for the pressure warning");
    }

    state.messages.push_back(std::move(msg));
    if (warning) {
        state.messages.push_back(*warning);
        state.warned = true;
    }
    return EnqueueOutcome{std::move(state), std::move(warning)};
}

Result<EvictionOutcome> evict(QueueState state, Summarizer& summarizer, EvictMode mode, const Tokenizer& tok) {
    const QueueConfig& cfg = state.config;
    if (mode == EvictMode::IfFull && state.occupancy(tok) < cfg.cap) return EvictionOutcome{std::move(state), {}};

    const Tokens target = cfg.evict_target();
    const Tokens summary_budget = cfg.summary_budget();

    // Minimal prefix such that the survivors plus a full-size summary fit the target.
    std::size_t cut = state.messages.size();
    if (mode != EvictMode::Flush) {
        Tokens tail = 0;
        cut = state.messages.size();
        while (cut > 0) {
            const Tokens c = message_cost(state.messages[cut - 1], tok);
            if (tail + c + summary_budget > target) break;
            tail += c;
            --cut;
        }
    }
    if (cut == 0) return EvictionOutcome{std::move(state), {}};

    std::span<const Message> evicted{state.messages.data(), cut};
    std::optional<std::string> prior;
    if (state.summary) prior = state.summary->text;

    const std::string summary_id = "summary-" + std::to_string(state.evictions + 1);
    const Instant summary_ts = evicted.back().timestamp;
    const Tokens overhead = message_cost(make_message(summary_id, Role::system, "", summary_ts, tok), tok);
    const Tokens text_cap = summary_budget > overhead ? summary_budget - overhead : 0;

    auto fits = [&](const std::string& text) {
        return message_cost(make_message(summary_id, Role::system, text, summary_ts, tok), tok) <= summary_budget;
    };

    // Processor-backed summarizers may overshoot: retry once with a tighter
    // cap, then fall back to plain truncation.
    std::optional<std::string> text;
    for (Tokens cap : {text_cap, text_cap / 2}) {
        auto r = summarizer.summarize(prior, evicted, cap);
        if (r && fits(*r)) {
            text = std::move(*r);
            break;
        }
    }
    if (!text) {
        Tokens cap = text_cap;
        text = truncation_summarizer(prior, evicted, cap, tok);
        while (!fits(*text) && cap > 0) text = truncation_summarizer(prior, evicted, --cap, tok);
        if (!fits(*text))
            return make_error(Errc::SummaryTooLarge, "summary budget of " + std::to_string(summary_budget) +
                                                         " tokens cannot hold a summary");
    }

    EvictionOutcome out;
    out.evicted_ids.reserve(cut);
    for (const auto& m : evicted) out.evicted_ids.push_back(m.id);
    state.summary = make_message(summary_id, Role::system, std::move(*text), summary_ts, tok);
    state.messages.erase(state.messages.begin(), state.messages.begin() + static_cast<std::ptrdiff_t>(cut));
    state.warned = false;
    ++state.evictions;
    out.state = std::move(state);
    return out;
}

}  // namespace tiermem
