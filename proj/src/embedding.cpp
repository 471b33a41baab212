#include "tiermem/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>

namespace tiermem {

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

bool word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

}  // namespace

HashedBowEmbedder::HashedBowEmbedder(std::size_t dim) : dim_(dim == 0 ? kDefaultDim : dim) {}

std::vector<std::string> HashedBowEmbedder::tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (word_byte(c)) {
            cur += static_cast<char>(c < 0x80 ? std::tolower(c) : c);
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::size_t HashedBowEmbedder::bucket(std::string_view token) const {
    return static_cast<std::size_t>(fnv1a(token) % dim_);
}

Result<Vector> HashedBowEmbedder::embed(std::string_view text) const {
    std::vector<double> acc(dim_, 0.0);
    auto tokens = tokenize(text);
    if (tokens.empty()) tokens.emplace_back(text);
    for (const auto& t : tokens) acc[bucket(t)] += 1.0;

    double norm = 0.0;
    for (double x : acc) norm += x * x;
    norm = std::sqrt(norm);
    Vector v(dim_);
    for (std::size_t i = 0; i < dim_; ++i) v[i] = static_cast<float>(acc[i] / norm);
    return v;
}

double cosine(std::span<const float> a, std::span<const float> b) {
    const std::size_t n = std::min(a.size(), b.size());
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    const double c = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(c, -1.0, 1.0);
}

void l2_normalize(Vector& v) {
    double norm = 0.0;
    for (float x : v) norm += static_cast<double>(x) * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return;
    for (float& x : v) x = static_cast<float>(x / norm);
}

}  // namespace tiermem
