#include "increcon/voxel_grid.hpp"

#include <cstring>
#include <fstream>

namespace increcon {

SparseVoxelGrid<TsdfVoxel> sparsify(const SparseVoxelGrid<TsdfVoxel>& grid, double theta) {
    if (!(theta > 0.0 && theta < 1.0)) fail("sparsify: theta must be in (0,1)");
    SparseVoxelGrid<TsdfVoxel> out(grid.level, grid.voxel_size, grid.origin);
    for (const auto& [c, v] : grid.cells)
        if (v.o >= float(theta)) out.cells.emplace(c, v);
    return out;
}

namespace {

constexpr char kMagic[4] = {'S', 'V', 'X', 'G'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& is, const std::string& path) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) fail("truncated volume file: ", path);
    return v;
}

struct Header {
    uint32_t level;
    float voxel_size;
    float origin[3];
    uint32_t payload_kind;
    uint64_t cell_count;
};

template <typename P, typename PayloadWriter>
void write_grid(const std::string& path, const SparseVoxelGrid<P>& grid, uint32_t kind,
                PayloadWriter&& write_payload) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail("cannot write volume: ", path);
    os.write(kMagic, 4);
    put(os, kVersion);
    put(os, uint32_t(grid.level));
    put(os, float(grid.voxel_size));
    for (int d = 0; d < 3; ++d) put(os, float(grid.origin[d]));
    put(os, kind);
    put(os, uint64_t(grid.cells.size()));
    for (const VoxelCoord& c : grid.sorted_coords()) {
        put(os, c.i);
        put(os, c.j);
        put(os, c.k);
        write_payload(os, grid.cells.at(c));
    }
    if (!os) fail("write error: ", path);
}

Header read_header(std::istream& is, const std::string& path) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) fail("bad volume magic in ", path);
    const uint32_t version = get<uint32_t>(is, path);
    if (version != kVersion) fail("unsupported volume version ", version, " in ", path);
    Header h;
    h.level = get<uint32_t>(is, path);
    h.voxel_size = get<float>(is, path);
    for (int d = 0; d < 3; ++d) h.origin[d] = get<float>(is, path);
    h.payload_kind = get<uint32_t>(is, path);
    h.cell_count = get<uint64_t>(is, path);
    return h;
}

template <typename P, typename PayloadReader>
SparseVoxelGrid<P> read_grid(const std::string& path, uint32_t expected_kind,
                             PayloadReader&& read_payload) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail("cannot open volume: ", path);
    const Header h = read_header(is, path);
    if (expected_kind != 0 && h.payload_kind != expected_kind)
        fail("volume ", path, " has payload kind ", h.payload_kind, ", expected ", expected_kind);
    SparseVoxelGrid<P> grid(int(h.level), double(h.voxel_size),
                            Vec3(h.origin[0], h.origin[1], h.origin[2]));
    grid.cells.reserve(h.cell_count);
    for (uint64_t n = 0; n < h.cell_count; ++n) {
        VoxelCoord c;
        c.i = get<int32_t>(is, path);
        c.j = get<int32_t>(is, path);
        c.k = get<int32_t>(is, path);
        grid.cells.emplace(c, read_payload(is, h));
    }
    return grid;
}

}  // namespace

void save_volume(const std::string& path, const SparseVoxelGrid<TsdfVoxel>& grid) {
    write_grid(path, grid, kPayloadTsdf, [](std::ostream& os, const TsdfVoxel& v) {
        put(os, v.o);
        put(os, v.x);
    });
}

void save_volume(const std::string& path, const SparseVoxelGrid<WeightedTsdfVoxel>& grid) {
    write_grid(path, grid, kPayloadWeightedTsdf, [](std::ostream& os, const WeightedTsdfVoxel& v) {
        put(os, v.tsdf);
        put(os, v.weight);
    });
}

void save_volume(const std::string& path, const SparseVoxelGrid<GlobalTsdfCell>& grid) {
    write_grid(path, grid, kPayloadGlobalTsdf, [](std::ostream& os, const GlobalTsdfCell& v) {
        put(os, v.o);
        put(os, v.x);
        put(os, v.weight);
        put(os, float(v.updated_at));
    });
}

void save_volume(const std::string& path, const SparseVoxelGrid<FeatureVec>& grid) {
    uint32_t channels = 0;
    for (const auto& [c, f] : grid.cells) {
        if (channels == 0) channels = uint32_t(f.size());
        if (f.size() != channels) fail("feature grid has inconsistent channel counts");
    }
    write_grid(path, grid, kPayloadFeatureBase + channels,
               [](std::ostream& os, const FeatureVec& f) {
                   os.write(reinterpret_cast<const char*>(f.data()),
                            std::streamsize(f.size() * sizeof(float)));
               });
}

uint32_t peek_volume_kind(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail("cannot open volume: ", path);
    return read_header(is, path).payload_kind;
}

SparseVoxelGrid<TsdfVoxel> load_tsdf_volume(const std::string& path) {
    return read_grid<TsdfVoxel>(path, kPayloadTsdf, [&](std::istream& is, const Header&) {
        TsdfVoxel v;
        v.o = get<float>(is, path);
        v.x = get<float>(is, path);
        return v;
    });
}

SparseVoxelGrid<WeightedTsdfVoxel> load_weighted_volume(const std::string& path) {
    return read_grid<WeightedTsdfVoxel>(
        path, kPayloadWeightedTsdf, [&](std::istream& is, const Header&) {
            WeightedTsdfVoxel v;
            v.tsdf = get<float>(is, path);
            v.weight = get<float>(is, path);
            return v;
        });
}

SparseVoxelGrid<GlobalTsdfCell> load_global_volume(const std::string& path) {
    return read_grid<GlobalTsdfCell>(path, kPayloadGlobalTsdf, [&](std::istream& is, const Header&) {
        GlobalTsdfCell v;
        v.o = get<float>(is, path);
        v.x = get<float>(is, path);
        v.weight = get<float>(is, path);
        v.updated_at = uint32_t(get<float>(is, path));
        return v;
    });
}

SparseVoxelGrid<FeatureVec> load_feature_volume(const std::string& path) {
    return read_grid<FeatureVec>(path, 0, [&](std::istream& is, const Header& h) {
        if (h.payload_kind < kPayloadFeatureBase)
            fail("volume ", path, " is not a feature grid (kind ", h.payload_kind, ")");
        const uint32_t channels = h.payload_kind - kPayloadFeatureBase;
        FeatureVec f(channels);
        is.read(reinterpret_cast<char*>(f.data()), std::streamsize(channels * sizeof(float)));
        if (!is) fail("truncated volume file: ", path);
        return f;
    });
}

}  // namespace increcon
