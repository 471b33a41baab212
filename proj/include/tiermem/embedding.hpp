#pragma once

#include "tiermem/result.hpp"

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tiermem {

using Vector = std::vector<float>;

class Embedder {
public:
    virtual ~Embedder() = default;
    // Unit-norm vector of dimension().
    virtual Result<Vector> embed(std::string_view text) const = 0;
    virtual std::size_t dimension() const = 0;
    virtual std::string name() const = 0;
};

// Hashed bag of words: lowercase alphanumeric runs, FNV-1a into dim buckets,
// L2-normalised. Text without any word is hashed as a single token.
class HashedBowEmbedder final : public Embedder {
public:
    static constexpr std::size_t kDefaultDim = 256;

    explicit HashedBowEmbedder(std::size_t dim = kDefaultDim);

    Result<Vector> embed(std::string_view text) const override;
    std::size_t dimension() const override { return dim_; }
    std::string name() const override { return "hashed-bow"; }

    std::size_t bucket(std::string_view token) const;
    static std::vector<std::string> tokenize(std::string_view text);

private:
    std::size_t dim_;
};

// POSTs {"model", "input"} to an embedding endpoint and accepts either
// {"embedding": [...]} or {"data": [{"embedding": [...]}]}.
struct HttpEmbedderOptions {
    std::string url;  // http://host:port/path
    std::string model;
    std::string api_key;
    std::size_t dim = 0;
    int timeout_seconds = 30;

    // TIERMEM_EMBED_URL, TIERMEM_EMBED_MODEL, TIERMEM_EMBED_KEY, TIERMEM_EMBED_DIM.
    static Result<HttpEmbedderOptions> from_env();
};

class HttpEmbedder final : public Embedder {
public:
    explicit HttpEmbedder(HttpEmbedderOptions opts);

    Result<Vector> embed(std::string_view text) const override;
    std::size_t dimension() const override { return opts_.dim; }
    std::string name() const override { return "http"; }

private:
    HttpEmbedderOptions opts_;
};

double cosine(std::span<const float> a, std::span<const float> b);

void l2_normalize(Vector& v);

}  // namespace tiermem
