#pragma once

#include "tiermem/agent.hpp"

#include <atomic>
#include <filesystem>
#include <unistd.h>
#include <random>
#include <string>

namespace tiermem::testutil {

inline Instant at(const char* iso) { return *parse_iso8601(iso); }

inline Instant t0() { return at("2023-10-11T09:00:00Z"); }

inline Message msg(const std::string& id, std::string text, Instant when = t0(), Role role = Role::user) {
    return make_message(id, role, std::move(text), when);
}

inline std::string random_text(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len) {
    static constexpr char kAlphabet[] = "abcdefghijklmnopqrstuvwxyz      .,'?!ABCXYZ0123\n";
    std::uniform_int_distribution<std::size_t> len(min_len, max_len);
    std::uniform_int_distribution<std::size_t> ch(0, sizeof(kAlphabet) - 2);
    std::string s(len(rng), ' ');
    for (auto& c : s) c = kAlphabet[ch(rng)];
    return s;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("tiermem-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline std::shared_ptr<const Embedder> bow() { return std::make_shared<HashedBowEmbedder>(); }

}  // namespace tiermem::testutil
