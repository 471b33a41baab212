#include "tiermem/external.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <sstream>

namespace tiermem {

namespace {

using nlohmann::json;

std::string dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

Error corrupt(const std::filesystem::path& file, std::size_t line, const std::string& what) {
    return make_error(Errc::CorruptSnapshot, file.filename().string() + " line " + std::to_string(line) + ": " + what);
}

Result<std::vector<json>> read_jsonl(const std::filesystem::path& file) {
    std::vector<json> rows;
    if (!std::filesystem::exists(file)) return rows;
    std::ifstream in(file, std::ios::binary);
    if (!in) return make_error(Errc::Io, "cannot open " + file.string());
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) return corrupt(file, n, "not a JSON object");
        rows.push_back(std::move(j));
    }
    return rows;
}

Result<std::string> string_field(const json& j, const char* key, const std::filesystem::path& file, std::size_t line) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) return corrupt(file, line, std::string("field '") + key + "' missing or not a string");
    return it->get<std::string>();
}

}  // namespace

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

Result<void> write_file_atomic(const std::filesystem::path& file, std::string_view content) {
    std::error_code ec;
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path(), ec);
    const auto tmp = file.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) return make_error(Errc::Io, "cannot write " + tmp);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) return make_error(Errc::Io, "short write to " + tmp);
    }
    std::filesystem::rename(tmp, file, ec);
    if (ec) return make_error(Errc::Io, "rename " + tmp + ": " + ec.message());
    return {};
}

// ---- recall ----

Result<void> RecallStore::insert(const Message& m) {
    if (ids_.count(m.id)) return make_error(Errc::IdCollision, "message id " + m.id + " already recorded");
    if (!entries_.empty() && m.timestamp < entries_.back().message.timestamp)
        return make_error(Errc::OutOfOrder, "timestamp " + format_iso8601(m.timestamp) + " precedes " +
                                                format_iso8601(entries_.back().message.timestamp));
    entries_.push_back(RecallEntry{m, ascii_lower(m.text)});
    ids_.insert(m.id);
    return {};
}

Result<Page<Message>> RecallStore::search_text(std::string_view query, std::size_t page, std::size_t page_size) const {
    if (query.empty()) return make_error(Errc::EmptyQuery, "query is empty");
    if (page_size == 0) return make_error(Errc::InvalidRange, "page size must be positive");
    const std::string needle = ascii_lower(query);
    std::vector<Message> hits;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it)
        if (it->indexed_text.find(needle) != std::string::npos) hits.push_back(it->message);
    return paginate(std::move(hits), page, page_size);
}

Result<Page<Message>> RecallStore::search_date(Instant start, Instant end, std::size_t page, std::size_t page_size) const {
    if (start > end) return make_error(Errc::InvalidRange, "start is after end");
    if (page_size == 0) return make_error(Errc::InvalidRange, "page size must be positive");
    // Entries are timestamp-ordered.
    auto lo = std::lower_bound(entries_.begin(), entries_.end(), start,
                               [](const RecallEntry& e, Instant t) { return e.message.timestamp < t; });
    auto hi = std::upper_bound(lo, entries_.end(), end,
                               [](Instant t, const RecallEntry& e) { return t < e.message.timestamp; });
    std::vector<Message> hits;
    hits.reserve(static_cast<std::size_t>(hi - lo));
    for (auto it = lo; it != hi; ++it) hits.push_back(it->message);
    return paginate(std::move(hits), page, page_size);
}

void RecallStore::truncate(std::size_t n) {
    while (entries_.size() > n) {
        ids_.erase(entries_.back().message.id);
        entries_.pop_back();
    }
}

Result<void> RecallStore::save(const std::filesystem::path& file) const {
    std::string out;
    for (const auto& e : entries_) {
        const Message& m = e.message;
        out += dump(json{{"id", m.id}, {"role", to_string(m.role)}, {"text", m.text},
                         {"timestamp", format_iso8601(m.timestamp)}});
        out += '\n';
    }
    return write_file_atomic(file, out);
}

Result<RecallStore> RecallStore::load(const std::filesystem::path& file) {
    auto rows = read_jsonl(file);
    if (!rows) return rows.error();
    RecallStore store;
    std::size_t line = 0;
    for (const auto& j : *rows) {
        ++line;
        auto id = string_field(j, "id", file, line);
        if (!id) return id.error();
        auto role_name = string_field(j, "role", file, line);
        if (!role_name) return role_name.error();
        auto role = role_from_string(*role_name);
        if (!role) return corrupt(file, line, "unknown role '" + *role_name + "'");
        auto text = string_field(j, "text", file, line);
        if (!text) return text.error();
        auto ts_text = string_field(j, "timestamp", file, line);
        if (!ts_text) return ts_text.error();
        auto ts = parse_iso8601(*ts_text);
        if (!ts) return corrupt(file, line, "bad timestamp");
        if (auto r = store.insert(make_message(*id, *role, *text, *ts)); !r) return corrupt(file, line, r.error().what());
    }
    return store;
}

// ---- archival ----

ArchivalStore::ArchivalStore(std::shared_ptr<const Embedder> embedder) : embedder_(std::move(embedder)) {}

Result<std::string> ArchivalStore::insert(std::string_view text, Instant created_at) {
    if (text.empty()) return make_error(Errc::EmptyText, "archival text is empty");
    auto vec = embedder_->embed(text);
    if (!vec) return vec.error();
    ArchivalEntry e{"a" + std::to_string(next_id_++), std::string(text), std::move(*vec), created_at};
    entries_.push_back(std::move(e));
    return entries_.back().id;
}

Result<Page<ArchivalHit>> ArchivalStore::search(std::string_view query, std::size_t page, std::size_t page_size) const {
    if (query.empty()) return make_error(Errc::EmptyQuery, "query is empty");
    if (page_size == 0) return make_error(Errc::InvalidRange, "page size must be positive");
    if (entries_.empty()) return paginate(std::vector<ArchivalHit>{}, page, page_size);
    auto q = embedder_->embed(query);
    if (!q) return q.error();

    std::vector<double> scores(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) scores[i] = cosine(*q, entries_[i].vector);
    std::vector<std::size_t> order(entries_.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::vector<ArchivalHit> hits;
    hits.reserve(order.size());
    for (std::size_t i : order) hits.push_back(ArchivalHit{entries_[i].id, entries_[i].text, scores[i]});
    return paginate(std::move(hits), page, page_size);
}

void ArchivalStore::truncate(std::size_t n) {
    if (entries_.size() > n) entries_.resize(n);
}

Result<void> ArchivalStore::save(const std::filesystem::path& file) const {
    std::string out;
    for (const auto& e : entries_) {
        out += dump(json{{"id", e.id}, {"text", e.text}, {"created_at", format_iso8601(e.created_at)}});
        out += '\n';
    }
    return write_file_atomic(file, out);
}

Result<ArchivalStore> ArchivalStore::load(const std::filesystem::path& file, std::shared_ptr<const Embedder> embedder) {
    auto rows = read_jsonl(file);
    if (!rows) return rows.error();
    ArchivalStore store(std::move(embedder));
    std::size_t line = 0;
    std::unordered_set<std::string> seen;
    for (const auto& j : *rows) {
        ++line;
        auto id = string_field(j, "id", file, line);
        if (!id) return id.error();
        auto text = string_field(j, "text", file, line);
        if (!text) return text.error();
        if (text->empty()) return corrupt(file, line, "empty text");
        auto created = string_field(j, "created_at", file, line);
        if (!created) return created.error();
        auto ts = parse_iso8601(*created);
        if (!ts) return corrupt(file, line, "bad created_at");
        if (!seen.insert(*id).second) return corrupt(file, line, "duplicate id " + *id);
        auto vec = store.embedder_->embed(*text);
        if (!vec) return vec.error();
        store.entries_.push_back(ArchivalEntry{*id, *text, std::move(*vec), *ts});
        if (id->size() > 1 && (*id)[0] == 'a') {
            const std::size_t n = std::strtoull(id->c_str() + 1, nullptr, 10);
            store.next_id_ = std::max(store.next_id_, n + 1);
        }
    }
    return store;
}

}  // namespace tiermem
