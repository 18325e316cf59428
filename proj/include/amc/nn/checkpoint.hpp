#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "amc/nn/tensor.hpp"

namespace amc::nn {

// Weight file: "HIQW" | version u16 | entry count u16 | per entry: name
// length u16, UTF-8 name, rank u8, dims u32[rank], float32 values. All
// integers and floats little-endian.
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct NamedTensor {
    std::string name;
    Tensor<float> tensor;
};

void save_checkpoint(const std::vector<NamedTensor>& entries, const std::filesystem::path& path);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

}  // namespace amc::nn
