#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gosu {

// The four key spaces the engine indexes. Each kind is an independent store
// with its own dimension.
enum class IndexKind { chunk, entity, relation, su };

const char* to_string(IndexKind kind) noexcept;

struct RankedHit {
    std::string key;
    double score = 0.0;
};

// Exact cosine similarity, accumulated in double. Throws on dimension
// mismatch or a zero-magnitude operand.
double cosine(std::span<const float> a, std::span<const float> b);

// Exact brute-force similarity index over (key -> vector) rows, one store per
// kind. No approximation anywhere: sim_rank scans every row.
class VectorIndex {
public:
    // Insert or replace. The first upsert of a kind fixes its dimension;
    // later mismatches throw DimensionMismatchError.
    void upsert(IndexKind kind, const std::string& key, std::span<const float> vec);

    std::optional<std::vector<float>> get(IndexKind kind, const std::string& key) const;

    // Top-k by cosine against every stored row of the kind, ordered by
    // (score desc, key asc). k = 0 gives {}; k > size gives everything.
    // Ranking a kind with no rows gives {}.
    std::vector<RankedHit> sim_rank(IndexKind kind, std::span<const float> query,
                                    std::size_t k) const;

    std::size_t size(IndexKind kind) const noexcept;
    int dimension(IndexKind kind) const noexcept;  // 0 when empty
    std::vector<std::string> keys(IndexKind kind) const;

    // Persistence: <dir>/<kind>.f32 holds the row-major float32 matrix in
    // little-endian byte order; <dir>/<kind>.manifest.json holds the
    // dimension and the keys in row order. Round-trips bit-exactly.
    void save(const std::filesystem::path& dir) const;
    static VectorIndex load(const std::filesystem::path& dir);

private:
    struct Store {
        int dim = 0;
        std::vector<std::string> keys;          // row order
        std::map<std::string, std::size_t> row_of;
        std::vector<float> matrix;              // row-major keys.size() x dim
    };

    const Store& store(IndexKind kind) const noexcept {
        return stores_[static_cast<int>(kind)];
    }
    Store& store(IndexKind kind) noexcept { return stores_[static_cast<int>(kind)]; }

    Store stores_[4];
};

}  // namespace gosu
