#include "gosu/vector_index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "gosu/errors.hpp"
#include "gosu/util.hpp"

namespace gosu {

using nlohmann::json;

namespace {

constexpr const char* kKindNames[] = {"chunk", "entity", "relation", "su"};

static_assert(std::endian::native == std::endian::little,
              "persisted .f32 matrices are little-endian; add byte swapping before "
              "building on a big-endian target");

}  // namespace

const char* to_string(IndexKind kind) noexcept { return kKindNames[static_cast<int>(kind)]; }

double cosine(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size())
        throw DimensionMismatchError("cosine operands have dimensions " +
                                     std::to_string(a.size()) + " and " + std::to_string(b.size()));
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += double(a[i]) * double(b[i]);
        na += double(a[i]) * double(a[i]);
        nb += double(b[i]) * double(b[i]);
    }
    if (na <= 0.0 || nb <= 0.0) throw ZeroVectorError("cosine against a zero vector is undefined");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

void VectorIndex::upsert(IndexKind kind, const std::string& key, std::span<const float> vec) {
    Store& s = store(kind);
    if (vec.empty()) throw DimensionMismatchError("cannot index an empty vector");
    if (s.dim == 0) s.dim = static_cast<int>(vec.size());
    if (static_cast<int>(vec.size()) != s.dim)
        throw DimensionMismatchError("vector dimension " + std::to_string(vec.size()) +
                                     " does not match index dimension " + std::to_string(s.dim));
    auto [it, inserted] = s.row_of.emplace(key, s.keys.size());
    if (inserted) {
        s.keys.push_back(key);
        s.matrix.insert(s.matrix.end(), vec.begin(), vec.end());
    } else {
        std::copy(vec.begin(), vec.end(), s.matrix.begin() + it->second * s.dim);
    }
}

std::optional<std::vector<float>> VectorIndex::get(IndexKind kind, const std::string& key) const {
    const Store& s = store(kind);
    auto it = s.row_of.find(key);
    if (it == s.row_of.end()) return std::nullopt;
    const float* row = s.matrix.data() + it->second * s.dim;
    return std::vector<float>(row, row + s.dim);
}

std::vector<RankedHit> VectorIndex::sim_rank(IndexKind kind, std::span<const float> query,
                                             std::size_t k) const {
    const Store& s = store(kind);
    if (k == 0 || s.keys.empty()) return {};
    std::vector<RankedHit> hits;
    hits.reserve(s.keys.size());
    for (std::size_t row = 0; row < s.keys.size(); ++row) {
        std::span<const float> v(s.matrix.data() + row * s.dim, static_cast<std::size_t>(s.dim));
        hits.push_back({s.keys[row], cosine(v, query)});
    }
    std::sort(hits.begin(), hits.end(), [](const RankedHit& a, const RankedHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.key < b.key;
    });
    if (hits.size() > k) hits.resize(k);
    return hits;
}

std::size_t VectorIndex::size(IndexKind kind) const noexcept { return store(kind).keys.size(); }

int VectorIndex::dimension(IndexKind kind) const noexcept { return store(kind).dim; }

std::vector<std::string> VectorIndex::keys(IndexKind kind) const { return store(kind).keys; }

void VectorIndex::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    for (int i = 0; i < 4; ++i) {
        const IndexKind kind = static_cast<IndexKind>(i);
        const Store& s = store(kind);
        if (s.keys.empty()) continue;

        const std::filesystem::path f32_path = dir / (std::string(to_string(kind)) + ".f32");
        std::ofstream out(f32_path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write index matrix: " + f32_path.string());
        out.write(reinterpret_cast<const char*>(s.matrix.data()),
                  static_cast<std::streamsize>(s.matrix.size() * sizeof(float)));
        if (!out) throw Error("short write: " + f32_path.string());
        out.close();

        json manifest{{"dimension", s.dim}, {"keys", s.keys}};
        write_text_file(dir / (std::string(to_string(kind)) + ".manifest.json"),
                        manifest.dump(2) + "\n");
    }
}

VectorIndex VectorIndex::load(const std::filesystem::path& dir) {
    VectorIndex index;
    for (int i = 0; i < 4; ++i) {
        const IndexKind kind = static_cast<IndexKind>(i);
        const std::filesystem::path manifest_path =
            dir / (std::string(to_string(kind)) + ".manifest.json");
        if (!std::filesystem::exists(manifest_path)) continue;

        json manifest = json::parse(read_text_file(manifest_path));
        const int dim = manifest.at("dimension").get<int>();
        const auto keys = manifest.at("keys").get<std::vector<std::string>>();

        const std::filesystem::path f32_path = dir / (std::string(to_string(kind)) + ".f32");
        std::ifstream in(f32_path, std::ios::binary);
        if (!in) throw Error("cannot read index matrix: " + f32_path.string());
        std::vector<float> matrix(keys.size() * static_cast<std::size_t>(dim));
        in.read(reinterpret_cast<char*>(matrix.data()),
                static_cast<std::streamsize>(matrix.size() * sizeof(float)));
        if (in.gcount() != static_cast<std::streamsize>(matrix.size() * sizeof(float)))
            throw Error("index matrix truncated: " + f32_path.string());

        Store& s = index.store(kind);
        s.dim = dim;
        s.keys = keys;
        s.matrix = std::move(matrix);
        for (std::size_t row = 0; row < s.keys.size(); ++row) s.row_of[s.keys[row]] = row;
        if (s.row_of.size() != s.keys.size())
            throw Error("duplicate keys in index manifest: " + manifest_path.string());
    }
    return index;
}

}  // namespace gosu
