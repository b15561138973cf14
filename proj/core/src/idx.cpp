#include "permpoint/idx.hpp"

#include <algorithm>
#include <fstream>

#include "permpoint/errors.hpp"

namespace permpoint {

std::size_t IdxTensor::element_count() const {
    std::size_t n = 1;
    for (std::uint32_t d : dims) n *= d;
    return dims.empty() ? 0 : n;
}

namespace {

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t pos) {
    return (static_cast<std::uint32_t>(bytes[pos]) << 24) |
           (static_cast<std::uint32_t>(bytes[pos + 1]) << 16) |
           (static_cast<std::uint32_t>(bytes[pos + 2]) << 8) |
           static_cast<std::uint32_t>(bytes[pos + 3]);
}

void write_be32(std::vector<std::uint8_t>& bytes, std::uint32_t v) {
    bytes.push_back(static_cast<std::uint8_t>(v >> 24));
    bytes.push_back(static_cast<std::uint8_t>(v >> 16));
    bytes.push_back(static_cast<std::uint8_t>(v >> 8));
    bytes.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

IdxTensor parse_idx(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4) throw FormatError("idx: file shorter than the magic field");
    IdxTensor t;
    t.magic = read_be32(bytes, 0);
    std::size_t n_dims;
    if (t.magic == kIdxImageMagic)
        n_dims = 3;
    else if (t.magic == kIdxLabelMagic)
        n_dims = 1;
    else
        throw FormatError("idx: unexpected magic " + std::to_string(t.magic));
    if (bytes.size() < 4 + 4 * n_dims)
        throw FormatError("idx: truncated dimension header");
    for (std::size_t d = 0; d < n_dims; ++d)
        t.dims.push_back(read_be32(bytes, 4 + 4 * d));
    const std::size_t offset = 4 + 4 * n_dims;
    const std::size_t expected = t.element_count();
    if (bytes.size() - offset < expected)
        throw FormatError("idx: payload holds " + std::to_string(bytes.size() - offset) +
                          " bytes, header promises " + std::to_string(expected));
    t.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                     bytes.begin() + static_cast<std::ptrdiff_t>(offset + expected));
    return t;
}

IdxTensor load_idx(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return parse_idx(bytes);
}

std::vector<std::uint8_t> serialize_idx(const IdxTensor& tensor) {
    std::vector<std::uint8_t> bytes;
    write_be32(bytes, tensor.magic);
    for (std::uint32_t d : tensor.dims) write_be32(bytes, d);
    bytes.insert(bytes.end(), tensor.payload.begin(), tensor.payload.end());
    return bytes;
}

void save_idx(const IdxTensor& tensor, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    auto bytes = serialize_idx(tensor);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

Downsample downsample_from_string(const std::string& name) {
    if (name == "none") return Downsample::none;
    if (name == "2x") return Downsample::x2;
    if (name == "4x") return Downsample::x4;
    throw DomainError("unknown downsample mode: " + name);
}

DenseMatrix average_pool(const DenseMatrix& rows, std::size_t side, std::size_t factor) {
    if (side * side != rows.cols)
        throw DimensionError("average_pool: rows are not side*side wide");
    if (factor == 0 || side % factor != 0)
        throw DimensionError("average_pool: factor must divide the side");
    const std::size_t out_side = side / factor;
    DenseMatrix out(rows.rows, out_side * out_side);
    const double inv = 1.0 / static_cast<double>(factor * factor);
    for (std::size_t mu = 0; mu < rows.rows; ++mu) {
        for (std::size_t r = 0; r < out_side; ++r) {
            for (std::size_t c = 0; c < out_side; ++c) {
                double s = 0.0;
                for (std::size_t dr = 0; dr < factor; ++dr)
                    for (std::size_t dc = 0; dc < factor; ++dc)
                        s += rows.at(mu, (r * factor + dr) * side + (c * factor + dc));
                out.at(mu, r * out_side + c) = s * inv;
            }
        }
    }
    return out;
}

Dataset load_mnist_pair(const std::filesystem::path& images,
                        const std::filesystem::path& labels, Downsample downsample,
                        std::size_t limit) {
    IdxTensor img = load_idx(images);
    IdxTensor lab = load_idx(labels);
    if (img.magic != kIdxImageMagic)
        throw FormatError("idx: " + images.string() + " is not an image file");
    if (lab.magic != kIdxLabelMagic)
        throw FormatError("idx: " + labels.string() + " is not a label file");
    if (img.dims[0] != lab.dims[0])
        throw FormatError("idx: image and label counts differ");

    std::size_t count = img.dims[0];
    if (limit > 0) count = std::min<std::size_t>(count, limit);
    const std::size_t h = img.dims[1], w = img.dims[2];
    if (h != w) throw FormatError("idx: non-square images are not supported");

    DenseMatrix pixels(count, h * w);
    for (std::size_t mu = 0; mu < count; ++mu)
        for (std::size_t p = 0; p < h * w; ++p)
            pixels.at(mu, p) = static_cast<double>(img.payload[mu * h * w + p]) / 255.0;

    std::size_t factor = 1;
    if (downsample == Downsample::x2) factor = 2;
    if (downsample == Downsample::x4) factor = 4;
    Dataset data;
    data.inputs = factor == 1 ? std::move(pixels) : average_pool(pixels, h, factor);

    data.targets = DenseMatrix(count, 10, 0.0);
    data.labels.resize(count);
    for (std::size_t mu = 0; mu < count; ++mu) {
        std::uint8_t label = lab.payload[mu];
        if (label > 9) throw FormatError("idx: label out of range");
        data.targets.at(mu, label) = 1.0;
        data.labels[mu] = label;
    }
    return data;
}

}  // namespace permpoint
