#include "test_support.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <set>

using namespace tiermem;
using namespace tiermem::testutil;

namespace {

RecallStore chat_fixture() {
    RecallStore r;
    const std::vector<std::pair<Role, std::string>> lines = {
        {Role::user, "I took the day off today, my mom Brenda baked me a birthday cake. It was my favorite - chocolate lava!"},
        {Role::assistant, "Happy Birthday, Chad! Your mom Brenda's chocolate lava cake sounds divine."},
        {Role::user, "Thanks! I'm 30 today."},
        {Role::assistant, "Thirty is a great age."},
    };
    int i = 0;
    for (const auto& [role, text] : lines) {
        auto ok = r.insert(msg("m" + std::to_string(i + 1), text, t0() + std::chrono::minutes{i}, role));
        EXPECT_TRUE(ok);
        ++i;
    }
    return r;
}

}  // namespace

TEST(Recall, InsertKeepsOrder) {
    RecallStore r;
    for (int i = 0; i < 3; ++i) ASSERT_TRUE(r.insert(msg("m" + std::to_string(i), "t", t0() + Millis{i})));
    ASSERT_EQ(r.size(), 3u);
    EXPECT_EQ(r.entries()[0].message.id, "m0");
    EXPECT_EQ(r.entries()[2].message.id, "m2");
}

TEST(Recall, DuplicateIdAndRegression) {
    RecallStore r;
    ASSERT_TRUE(r.insert(msg("m1", "a", t0())));
    auto dup = r.insert(msg("m1", "b", t0()));
    ASSERT_FALSE(dup);
    EXPECT_EQ(dup.error().code, Errc::IdCollision);
    auto back = r.insert(msg("m2", "b", t0() - Millis{1}));
    ASSERT_FALSE(back);
    EXPECT_EQ(back.error().code, Errc::OutOfOrder);
}

TEST(Recall, TextSearchFindsBirthdayMessage) {
    auto r = chat_fixture();
    auto p = r.search_text("brenda", 0);
    ASSERT_TRUE(p);
    ASSERT_EQ(p->total_matches, 2u);
    // Most recent first.
    EXPECT_EQ(p->items[0].id, "m2");
    EXPECT_EQ(p->items[1].id, "m1");
    EXPECT_NE(p->items[1].text.find("birthday cake"), std::string::npos);
}

TEST(Recall, TextSearchNoMatchAndEmptyQuery) {
    auto r = chat_fixture();
    auto p = r.search_text("zeppelin", 0);
    ASSERT_TRUE(p);
    EXPECT_TRUE(p->items.empty());
    EXPECT_EQ(p->total_matches, 0u);
    EXPECT_FALSE(p->has_more);
    auto e = r.search_text("", 0);
    ASSERT_FALSE(e);
    EXPECT_EQ(e.error().code, Errc::EmptyQuery);
}

TEST(Recall, TwelveMatchesPageFiveFiveTwo) {
    RecallStore r;
    for (int i = 0; i < 30; ++i)
        ASSERT_TRUE(r.insert(msg("m" + std::to_string(i), i % 5 < 2 ? "needle " + std::to_string(i) : "hay",
                                 t0() + Millis{i})));
    // Linear-scan oracle, newest first.
    std::vector<std::string> oracle;
    for (int i = 29; i >= 0; --i)
        if (i % 5 < 2) oracle.push_back("m" + std::to_string(i));
    ASSERT_EQ(oracle.size(), 12u);
    std::vector<std::string> seen;
    std::vector<std::size_t> sizes;
    for (std::size_t page = 0;; ++page) {
        auto p = r.search_text("NEEDLE", page, 5);
        ASSERT_TRUE(p);
        sizes.push_back(p->items.size());
        for (const auto& m : p->items) seen.push_back(m.id);
        EXPECT_EQ(p->has_more, (page + 1) * 5 < p->total_matches);
        if (!p->has_more) break;
    }
    EXPECT_EQ(sizes, (std::vector<std::size_t>{5, 5, 2}));
    EXPECT_EQ(seen, oracle);
}

TEST(Recall, DateSearch) {
    RecallStore r;
    // Five sessions a week apart, four messages each.
    for (int s = 0; s < 5; ++s)
        for (int i = 0; i < 4; ++i)
            ASSERT_TRUE(r.insert(msg("s" + std::to_string(s) + "m" + std::to_string(i), "text",
                                     at("2023-06-01T10:00:00Z") + std::chrono::days{7 * s} + std::chrono::minutes{i})));
    auto all = r.search_date(at("2000-01-01"), at("2100-01-01"), 0, 100);
    ASSERT_TRUE(all);
    EXPECT_EQ(all->total_matches, 20u);

    auto gap = r.search_date(at("2023-06-02"), at("2023-06-07"), 0);
    ASSERT_TRUE(gap);
    EXPECT_EQ(gap->total_matches, 0u);

    auto first_two = r.search_date(at("2023-06-01"), at("2023-06-08T23:59:59Z"), 0, 100);
    ASSERT_TRUE(first_two);
    std::vector<std::string> oracle;
    for (const auto& e : r.entries())
        if (e.message.timestamp >= at("2023-06-01") && e.message.timestamp <= at("2023-06-08T23:59:59Z"))
            oracle.push_back(e.message.id);
    std::vector<std::string> got;
    for (const auto& m : first_two->items) got.push_back(m.id);
    EXPECT_EQ(got, oracle);
    EXPECT_EQ(got.size(), 8u);

    auto bad = r.search_date(at("2023-06-08"), at("2023-06-01"), 0);
    ASSERT_FALSE(bad);
    EXPECT_EQ(bad.error().code, Errc::InvalidRange);
}

TEST(Recall, SaveLoadRoundTrip) {
    TempDir dir("recall");
    auto r = chat_fixture();
    ASSERT_TRUE(r.save(dir.path() / "recall.jsonl"));
    auto loaded = RecallStore::load(dir.path() / "recall.jsonl");
    ASSERT_TRUE(loaded);
    ASSERT_EQ(loaded->size(), r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
        EXPECT_EQ(loaded->entries()[i].message.id, r.entries()[i].message.id);
        EXPECT_EQ(loaded->entries()[i].message.text, r.entries()[i].message.text);
        EXPECT_EQ(loaded->entries()[i].message.timestamp, r.entries()[i].message.timestamp);
    }
    std::ofstream(dir.path() / "bad.jsonl") << "{\"id\":\"m1\",\"role\":\"user\"\n";
    auto bad = RecallStore::load(dir.path() / "bad.jsonl");
    ASSERT_FALSE(bad);
    EXPECT_EQ(bad.error().code, Errc::CorruptSnapshot);
}

TEST(Embedder, DeterministicAndUnitNorm) {
    HashedBowEmbedder e;
    auto a = e.embed("The quick brown fox");
    auto b = e.embed("The quick brown fox");
    ASSERT_TRUE(a && b);
    EXPECT_EQ(*a, *b);
    EXPECT_EQ(a->size(), 256u);
    double norm = 0;
    for (float x : *a) norm += static_cast<double>(x) * x;
    EXPECT_NEAR(norm, 1.0, 1e-6);
    EXPECT_NEAR(cosine(*a, *a), 1.0, 1e-6);
}

TEST(Embedder, DisjointBucketsAreOrthogonal) {
    HashedBowEmbedder e;
    const std::string x = "apple banana", y = "violin trumpet";
    std::set<std::size_t> bx, by;
    for (const auto& t : HashedBowEmbedder::tokenize(x)) bx.insert(e.bucket(t));
    for (const auto& t : HashedBowEmbedder::tokenize(y)) by.insert(e.bucket(t));
    for (auto b : bx) ASSERT_EQ(by.count(b), 0u) << "fixture must be collision free";
    EXPECT_NEAR(cosine(*e.embed(x), *e.embed(y)), 0.0, 1e-9);
}

TEST(Archival, InsertSearchSelfFirst) {
    ArchivalStore a(bow());
    ASSERT_TRUE(a.insert("The capital of France is Paris.", t0()));
    ASSERT_TRUE(a.insert("Bananas are rich in potassium.", t0()));
    ASSERT_TRUE(a.insert("Rust has a borrow checker.", t0()));
    auto p = a.search("Bananas are rich in potassium.", 0);
    ASSERT_TRUE(p);
    ASSERT_FALSE(p->items.empty());
    EXPECT_EQ(p->items[0].text, "Bananas are rich in potassium.");
    EXPECT_NEAR(p->items[0].score, 1.0, 1e-6);
    auto empty = a.insert("", t0());
    ASSERT_FALSE(empty);
    EXPECT_EQ(empty.error().code, Errc::EmptyText);
}

TEST(Archival, EmptyStoreEmptyPage) {
    ArchivalStore a(bow());
    auto p = a.search("anything", 0);
    ASSERT_TRUE(p);
    EXPECT_TRUE(p->items.empty());
    EXPECT_FALSE(p->has_more);
}

TEST(Archival, RankingAndPaginationMatchExhaustiveOracle) {
    std::mt19937_64 rng(21);
    ArchivalStore a(bow());
    HashedBowEmbedder e;
    std::vector<std::string> texts;
    const std::vector<std::string> vocab = {"red", "green", "blue", "cat", "dog", "sun", "moon", "tree", "rock", "sea"};
    for (int i = 0; i < 57; ++i) {
        std::string t;
        for (int w = 0; w < 4; ++w) t += vocab[rng() % vocab.size()] + " ";
        texts.push_back(t);
        ASSERT_TRUE(a.insert(t, t0()));
    }
    const std::string query = "blue moon sea";
    auto qv = *e.embed(query);
    std::vector<std::pair<double, std::size_t>> oracle;
    for (std::size_t i = 0; i < texts.size(); ++i) oracle.push_back({cosine(qv, *e.embed(texts[i])), i});
    std::stable_sort(oracle.begin(), oracle.end(), [](auto& x, auto& y) { return x.first > y.first; });

    std::vector<ArchivalHit> all;
    double prev_min = 2.0;
    for (std::size_t page = 0;; ++page) {
        auto p = a.search(query, page, 5);
        ASSERT_TRUE(p);
        for (std::size_t i = 1; i < p->items.size(); ++i) EXPECT_GE(p->items[i - 1].score, p->items[i].score);
        if (!p->items.empty()) {
            EXPECT_LE(p->items.front().score, prev_min);
            prev_min = p->items.back().score;
        }
        all.insert(all.end(), p->items.begin(), p->items.end());
        if (!p->has_more) break;
    }
    ASSERT_EQ(all.size(), texts.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
        EXPECT_EQ(all[i].text, texts[oracle[i].second]);
        EXPECT_NEAR(all[i].score, oracle[i].first, 1e-9);
        EXPECT_GE(all[i].score, -1.0);
        EXPECT_LE(all[i].score, 1.0);
    }
}

TEST(Archival, SaveLoadRecomputesVectors) {
    TempDir dir("archival");
    ArchivalStore a(bow());
    ASSERT_TRUE(a.insert("first entry", t0()));
    ASSERT_TRUE(a.insert("second entry", t0() + Millis{5}));
    ASSERT_TRUE(a.save(dir.path() / "archival.jsonl"));
    auto b = ArchivalStore::load(dir.path() / "archival.jsonl", bow());
    ASSERT_TRUE(b);
    ASSERT_EQ(b->size(), 2u);
    EXPECT_EQ(b->entries()[1].vector, a.entries()[1].vector);
    EXPECT_EQ(b->search("second", 0)->items, a.search("second", 0)->items);
    auto id = b->insert("third", t0());
    ASSERT_TRUE(id);
    EXPECT_EQ(*id, "a3");
}

TEST(Paginate, HasMoreMatchesFormula) {
    for (std::size_t total = 0; total < 23; ++total)
        for (std::size_t size = 1; size < 7; ++size)
            for (std::size_t page = 0; page < 6; ++page) {
                std::vector<int> v(total);
                auto p = paginate(v, page, size);
                EXPECT_EQ(p.has_more, (page + 1) * size < total);
                EXPECT_LE(p.items.size(), size);
                EXPECT_EQ(p.total_matches, total);
            }
}
