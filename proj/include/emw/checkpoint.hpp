#pragma once

#include <string>
#include <vector>

namespace emw {

struct NamedTensor {
    std::string name;
    std::vector<int> shape;
    std::vector<double> values;
};

// Binary container, little-endian throughout:
//   magic "EMWT", tensor count u32, then per tensor: name length u32, UTF-8
//   name bytes, rank u32, dims u32 each, row-major f64 payload.
void write_checkpoint(const std::string& path,
                      const std::vector<NamedTensor>& tensors);

std::vector<NamedTensor> read_checkpoint(const std::string& path);

// Lookup by exact name; throws if absent.
const NamedTensor& find_tensor(const std::vector<NamedTensor>& tensors,
                               const std::string& name);

}  // namespace emw
