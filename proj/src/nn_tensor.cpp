#include "increcon/nn/tensor.hpp"

#include <cstring>
#include <fstream>

namespace increcon::nn {

namespace {
constexpr char kMagic[4] = {'N', 'R', 'W', 'T'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& is, const std::string& path) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) fail("truncated weight file: ", path);
    return v;
}
}  // namespace

void save_weights(const WeightSet& set, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail("cannot write weights: ", path);
    os.write(kMagic, 4);
    put(os, kVersion);
    put(os, uint32_t(set.size()));
    for (const auto& [name, t] : set) {
        if (t.data.size() != t.count())
            fail("tensor '", name, "' has ", t.data.size(), " values, dims say ", t.count());
        put(os, uint16_t(name.size()));
        os.write(name.data(), std::streamsize(name.size()));
        put(os, uint8_t(t.dims.size()));
        for (uint32_t d : t.dims) put(os, d);
        os.write(reinterpret_cast<const char*>(t.data.data()),
                 std::streamsize(t.data.size() * sizeof(float)));
    }
    if (!os) fail("write error: ", path);
}

WeightSet load_weights(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail("cannot open weights: ", path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) fail("bad weight-file magic in ", path);
    const uint32_t version = get<uint32_t>(is, path);
    if (version != kVersion) fail("unsupported weight-file version ", version, " in ", path);
    const uint32_t count = get<uint32_t>(is, path);
    WeightSet set;
    for (uint32_t n = 0; n < count; ++n) {
        const uint16_t name_len = get<uint16_t>(is, path);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) fail("truncated weight file: ", path);
        Tensor t;
        const uint8_t rank = get<uint8_t>(is, path);
        t.dims.resize(rank);
        for (int d = 0; d < rank; ++d) t.dims[d] = get<uint32_t>(is, path);
        t.data.resize(t.count());
        is.read(reinterpret_cast<char*>(t.data.data()),
                std::streamsize(t.data.size() * sizeof(float)));
        if (!is) fail("truncated weight file: ", path);
        set.emplace(std::move(name), std::move(t));
    }
    return set;
}

const Tensor& require_tensor(const WeightSet& set, const std::string& name) {
    auto it = set.find(name);
    if (it == set.end()) fail("missing required tensor '", name, "'");
    return it->second;
}

const Tensor& require_tensor(const WeightSet& set, const std::string& name,
                             const std::vector<uint32_t>& dims) {
    const Tensor& t = require_tensor(set, name);
    if (t.dims != dims) {
        std::string want, got;
        for (uint32_t d : dims) want += cat(d, ",");
        for (uint32_t d : t.dims) got += cat(d, ",");
        fail("tensor '", name, "' has shape [", got, "], expected [", want, "]");
    }
    return t;
}

}  // namespace increcon::nn
