#pragma once

#include "tiermem/context.hpp"
#include "tiermem/embedding.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

namespace tiermem {

inline constexpr std::size_t kDefaultPageSize = 5;

template <typename T>
struct Page {
    std::vector<T> items;
    std::size_t page_index = 0;
    std::size_t page_size = kDefaultPageSize;
    std::size_t total_matches = 0;
    bool has_more = false;
};

// Slices page `index` out of an already-ordered match list.
template <typename T>
Page<T> paginate(std::vector<T> matches, std::size_t index, std::size_t page_size) {
    Page<T> page;
    page.page_index = index;
    page.page_size = page_size;
    page.total_matches = matches.size();
    const std::size_t begin = std::min(matches.size(), index * page_size);
    const std::size_t end = std::min(matches.size(), begin + page_size);
    page.items.assign(std::make_move_iterator(matches.begin() + static_cast<std::ptrdiff_t>(begin)),
                      std::make_move_iterator(matches.begin() + static_cast<std::ptrdiff_t>(end)));
    page.has_more = (index + 1) * page_size < matches.size();
    return page;
}

struct RecallEntry {
    Message message;
    std::string indexed_text;  // lowercase fold of message.text
};

// Append-only verbatim log of every message the agent has processed.
class RecallStore {
public:
    // Errors: IdCollision, OutOfOrder.
    Result<void> insert(const Message& m);

    // Case-insensitive substring match, most recent first.
    Result<Page<Message>> search_text(std::string_view query, std::size_t page,
                                      std::size_t page_size = kDefaultPageSize) const;
    // start <= timestamp <= end, oldest first. Errors: InvalidRange.
    Result<Page<Message>> search_date(Instant start, Instant end, std::size_t page,
                                      std::size_t page_size = kDefaultPageSize) const;

    bool contains(const std::string& id) const { return ids_.count(id) != 0; }
    std::size_t size() const { return entries_.size(); }
    const std::vector<RecallEntry>& entries() const { return entries_; }

    // Drops entries past n; used to roll back a failed step.
    void truncate(std::size_t n);

    // recall.jsonl: {"id","role","text","timestamp"} per line.
    Result<void> save(const std::filesystem::path& file) const;
    static Result<RecallStore> load(const std::filesystem::path& file);

private:
    std::vector<RecallEntry> entries_;
    std::unordered_set<std::string> ids_;
};

struct ArchivalEntry {
    std::string id;
    std::string text;
    Vector vector;
    Instant created_at{};
};

struct ArchivalHit {
    std::string id;
    std::string text;
    double score = 0.0;

    bool operator==(const ArchivalHit&) const = default;
};

// Read-write datastore with exhaustive cosine search.
class ArchivalStore {
public:
    explicit ArchivalStore(std::shared_ptr<const Embedder> embedder);

    // Errors: EmptyText, or the embedder's error.
    Result<std::string> insert(std::string_view text, Instant created_at);

    // Ranked by cosine to embed(query), descending; ties in insertion order.
    Result<Page<ArchivalHit>> search(std::string_view query, std::size_t page,
                                     std::size_t page_size = kDefaultPageSize) const;

    std::size_t size() const { return entries_.size(); }
    const std::vector<ArchivalEntry>& entries() const { return entries_; }
    const Embedder& embedder() const { return *embedder_; }

    void truncate(std::size_t n);

    // archival.jsonl: {"id","text","created_at"} per line; vectors are
    // recomputed on load.
    Result<void> save(const std::filesystem::path& file) const;
    static Result<ArchivalStore> load(const std::filesystem::path& file, std::shared_ptr<const Embedder> embedder);

private:
    std::shared_ptr<const Embedder> embedder_;
    std::vector<ArchivalEntry> entries_;
    std::size_t next_id_ = 1;
};

std::string ascii_lower(std::string_view s);

// Writes to a sibling temp file and renames over the target.
Result<void> write_file_atomic(const std::filesystem::path& file, std::string_view content);

}  // namespace tiermem
