#pragma once

// IDX container parsing (the MNIST file format): big-endian 32-bit magic
// and dimension sizes followed by unsigned byte payload. Image files carry
// magic 2051 with three dimensions, label files magic 2049 with one.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "permpoint/network.hpp"

namespace permpoint {

struct IdxTensor {
    std::uint32_t magic = 0;
    std::vector<std::uint32_t> dims;
    std::vector<std::uint8_t> payload;

    std::size_t element_count() const;
};

inline constexpr std::uint32_t kIdxImageMagic = 2051;  // 0x00000803
inline constexpr std::uint32_t kIdxLabelMagic = 2049;  // 0x00000801

// Bad magic throws FormatError; a payload shorter than the dimension
// product throws FormatError as well.
IdxTensor load_idx(const std::filesystem::path& path);
IdxTensor parse_idx(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> serialize_idx(const IdxTensor& tensor);
void save_idx(const IdxTensor& tensor, const std::filesystem::path& path);

enum class Downsample { none, x2, x4 };

Downsample downsample_from_string(const std::string& name);

// Loads an image/label pair into a regression dataset: pixels scaled to
// [0,1] (optionally average-pooled 2x or 4x), targets one-hot over the ten
// classes, original labels retained for accuracy tracking. `limit` of 0
// keeps every sample.
Dataset load_mnist_pair(const std::filesystem::path& images,
                        const std::filesystem::path& labels,
                        Downsample downsample = Downsample::none,
                        std::size_t limit = 0);

// Average pooling used by the loader, exposed for direct use on already
// scaled rows; `factor` must divide both sides.
DenseMatrix average_pool(const DenseMatrix& rows, std::size_t side,
                         std::size_t factor);

}  // namespace permpoint
