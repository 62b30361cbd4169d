#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "gosu/errors.hpp"
#include "gosu/util.hpp"
#include "gosu/vector_index.hpp"
#include "testutil.hpp"

using namespace gosu;

namespace {

std::vector<float> random_unit(std::mt19937_64& rng, int dim) {
    std::normal_distribution<float> gauss(0.0f, 1.0f);
    std::vector<float> v(dim);
    for (auto& x : v) x = gauss(rng);
    l2_normalize(v);
    return v;
}

// Independent oracle: exhaustive cosine scan with the same tie rule.
std::vector<RankedHit> brute_force(const std::vector<std::pair<std::string, std::vector<float>>>& rows,
                                   const std::vector<float>& query, std::size_t k) {
    std::vector<RankedHit> all;
    for (const auto& [key, vec] : rows) {
        double s = 0;
        for (std::size_t i = 0; i < vec.size(); ++i) s += double(vec[i]) * double(query[i]);
        double qn = 0, vn = 0;
        for (float x : query) qn += double(x) * double(x);
        for (float x : vec) vn += double(x) * double(x);
        all.push_back({key, s / (std::sqrt(qn) * std::sqrt(vn))});
    }
    std::sort(all.begin(), all.end(), [](const RankedHit& a, const RankedHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.key < b.key;
    });
    if (all.size() > k) all.resize(k);
    return all;
}

}  // namespace

TEST_CASE("cosine is exact on hand-computable vectors") {
    std::vector<float> x{1, 0};
    std::vector<float> y{0, 1};
    std::vector<float> d{1, 1};
    CHECK(cosine(x, y) == doctest::Approx(0.0));
    CHECK(cosine(x, x) == doctest::Approx(1.0));
    CHECK(cosine(x, d) == doctest::Approx(1.0 / std::sqrt(2.0)));

    std::vector<float> neg{-1, 0};
    CHECK(cosine(x, neg) == doctest::Approx(-1.0));
}

TEST_CASE("cosine rejects mismatched dimensions and zero vectors") {
    std::vector<float> a{1, 0};
    std::vector<float> b{1, 0, 0};
    CHECK_THROWS_AS(cosine(a, b), DimensionMismatchError);
    std::vector<float> z{0, 0};
    CHECK_THROWS_AS(cosine(a, z), ZeroVectorError);
}

TEST_CASE("sim_rank equals the brute-force oracle on 100 random stores") {
    std::mt19937_64 rng(424242);
    for (int trial = 0; trial < 100; ++trial) {
        const int dim = 2 + static_cast<int>(rng() % 15);
        const std::size_t n = 1 + rng() % 60;

        VectorIndex index;
        std::vector<std::pair<std::string, std::vector<float>>> rows;
        for (std::size_t i = 0; i < n; ++i) {
            const std::string key = "k" + std::to_string(rng() % 1000);
            auto vec = random_unit(rng, dim);
            // Upsert semantics: later writes win; mirror that in the oracle rows.
            auto it = std::find_if(rows.begin(), rows.end(),
                                   [&](const auto& r) { return r.first == key; });
            if (it == rows.end()) rows.push_back({key, vec});
            else it->second = vec;
            index.upsert(IndexKind::chunk, key, vec);
        }
        CHECK(index.size(IndexKind::chunk) == rows.size());

        const auto query = random_unit(rng, dim);
        const std::size_t k = rng() % (rows.size() + 3);
        const auto got = index.sim_rank(IndexKind::chunk, query, k);
        const auto want = brute_force(rows, query, k);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].key == want[i].key);
            CHECK(got[i].score == doctest::Approx(want[i].score).epsilon(1e-12));
        }
    }
}

TEST_CASE("exact ties order by key ascending") {
    VectorIndex index;
    // Identical vectors guarantee exactly equal scores.
    std::vector<float> v{0.6f, 0.8f};
    index.upsert(IndexKind::entity, "zeta", v);
    index.upsert(IndexKind::entity, "alpha", v);
    index.upsert(IndexKind::entity, "mid", v);

    const auto hits = index.sim_rank(IndexKind::entity, v, 3);
    REQUIRE(hits.size() == 3);
    CHECK(hits[0].key == "alpha");
    CHECK(hits[1].key == "mid");
    CHECK(hits[2].key == "zeta");
}

TEST_CASE("top-k lists are prefixes of longer rankings") {
    std::mt19937_64 rng(7);
    VectorIndex index;
    for (int i = 0; i < 40; ++i) {
        index.upsert(IndexKind::su, "s" + std::to_string(i), random_unit(rng, 8));
    }
    const auto query = random_unit(rng, 8);
    const auto full = index.sim_rank(IndexKind::su, query, 40);
    for (std::size_t k = 0; k <= 40; k += 5) {
        const auto head = index.sim_rank(IndexKind::su, query, k);
        REQUIRE(head.size() == k);
        for (std::size_t i = 0; i < k; ++i) CHECK(head[i].key == full[i].key);
    }
}

TEST_CASE("k of zero, oversized k, and empty stores behave") {
    VectorIndex index;
    std::vector<float> v{1.0f, 0.0f};
    CHECK(index.sim_rank(IndexKind::chunk, v, 5).empty());  // empty store

    index.upsert(IndexKind::chunk, "only", v);
    CHECK(index.sim_rank(IndexKind::chunk, v, 0).empty());
    CHECK(index.sim_rank(IndexKind::chunk, v, 99).size() == 1);
}

TEST_CASE("kinds are independent stores with independent dimensions") {
    VectorIndex index;
    std::vector<float> two{1.0f, 0.0f};
    std::vector<float> three{1.0f, 0.0f, 0.0f};
    index.upsert(IndexKind::chunk, "c", two);
    index.upsert(IndexKind::entity, "e", three);
    CHECK(index.dimension(IndexKind::chunk) == 2);
    CHECK(index.dimension(IndexKind::entity) == 3);
    CHECK(index.dimension(IndexKind::relation) == 0);
    CHECK(index.size(IndexKind::entity) == 1);

    CHECK_THROWS_AS(index.upsert(IndexKind::chunk, "c2", three), DimensionMismatchError);
}

TEST_CASE("upsert replaces the row in place") {
    VectorIndex index;
    std::vector<float> a{1.0f, 0.0f};
    std::vector<float> b{0.0f, 1.0f};
    index.upsert(IndexKind::chunk, "k", a);
    index.upsert(IndexKind::chunk, "k", b);
    CHECK(index.size(IndexKind::chunk) == 1);
    const auto got = index.get(IndexKind::chunk, "k");
    REQUIRE(got.has_value());
    CHECK((*got)[1] == 1.0f);
    CHECK(!index.get(IndexKind::chunk, "absent").has_value());
}

TEST_CASE("persistence round-trips bit-exactly") {
    testutil::TempDir tmp("vindex");
    std::mt19937_64 rng(99);
    VectorIndex index;
    for (int i = 0; i < 25; ++i) {
        index.upsert(IndexKind::chunk, "c" + std::to_string(i), random_unit(rng, 6));
        index.upsert(IndexKind::entity, "e" + std::to_string(i), random_unit(rng, 4));
    }
    index.save(tmp.path());

    const VectorIndex loaded = VectorIndex::load(tmp.path());
    CHECK(loaded.size(IndexKind::chunk) == 25);
    CHECK(loaded.dimension(IndexKind::entity) == 4);
    for (const auto& key : index.keys(IndexKind::chunk)) {
        const auto a = index.get(IndexKind::chunk, key);
        const auto b = loaded.get(IndexKind::chunk, key);
        REQUIRE(b.has_value());
        CHECK(*a == *b);  // float-for-float equality
    }

    // Saving the loaded copy reproduces the files byte-for-byte.
    testutil::TempDir tmp2("vindex2");
    loaded.save(tmp2.path());
    for (const char* name : {"chunk.f32", "chunk.manifest.json", "entity.f32",
                             "entity.manifest.json"}) {
        CHECK(read_text_file(tmp / name) == read_text_file(tmp2 / name));
    }
}
