#pragma once

#include "increcon/core.hpp"

#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

namespace increcon::nn {

struct Tensor {
    std::vector<uint32_t> dims;
    std::vector<float> data;

    size_t count() const {
        return std::accumulate(dims.begin(), dims.end(), size_t(1),
                               [](size_t a, uint32_t d) { return a * d; });
    }
};

// Named tensors, ordered by name so files serialize deterministically.
using WeightSet = std::map<std::string, Tensor>;

// Weight file (binary, little-endian): header {magic "NRWT", version u32,
// tensor_count u32}; per tensor {name_len u16, name utf-8, rank u8,
// dims u32 x rank, data f32 x prod(dims)}.
void save_weights(const WeightSet& set, const std::string& path);
WeightSet load_weights(const std::string& path);

const Tensor& require_tensor(const WeightSet& set, const std::string& name);
const Tensor& require_tensor(const WeightSet& set, const std::string& name,
                             const std::vector<uint32_t>& dims);

}  // namespace increcon::nn
