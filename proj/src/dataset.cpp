#include "spheres/dataset.hpp"

#include "spheres/error.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace spheres {

void SphereConfig::validate() const {
    if (n < 2) throw DomainError("SphereConfig: dimension n must be at least 2");
    if (!(radius > 1.0) || !std::isfinite(radius)) {
        throw DomainError("SphereConfig: outer radius R must be finite and exceed 1");
    }
}

namespace {

// Writes r·z/‖z‖ into `out`, redrawing z in the (practically impossible) case
// that its norm underflows.
template <typename Row>
void draw_on_shell(std::size_t n, double r, RngStream& stream, Row&& out) {
    for (;;) {
        double sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double z = stream.normal();
            out[static_cast<Eigen::Index>(i)] = z;
            sq += z * z;
        }
        const double norm = std::sqrt(sq);
        if (norm > 1e-150) {
            const double scale = r / norm;
            for (std::size_t i = 0; i < n; ++i) out[static_cast<Eigen::Index>(i)] *= scale;
            return;
        }
    }
}

}  // namespace

Vector sample_shell(const SphereConfig& config, Shell shell, RngStream& stream) {
    Vector x(static_cast<Eigen::Index>(config.n));
    draw_on_shell(config.n, config.shell_radius(shell), stream, x);
    return x;
}

Sample sample_sphere(const SphereConfig& config, RngStream& stream) {
    Sample s;
    s.label = stream.coin() ? 1 : 0;
    s.x = sample_shell(config, static_cast<Shell>(s.label), stream);
    return s;
}

Batch sample_batch(const SphereConfig& config, std::size_t count, RngStream& stream) {
    Batch b;
    b.x.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(config.n));
    b.labels.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const int label = stream.coin() ? 1 : 0;
        b.labels[i] = label;
        draw_on_shell(config.n, config.shell_radius(static_cast<Shell>(label)), stream,
                      b.x.row(static_cast<Eigen::Index>(i)));
    }
    return b;
}

Matrix sample_shell_batch(const SphereConfig& config, Shell shell, std::size_t count,
                          RngStream& stream) {
    Matrix x(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(config.n));
    for (std::size_t i = 0; i < count; ++i) {
        draw_on_shell(config.n, config.shell_radius(shell), stream, x.row(static_cast<Eigen::Index>(i)));
    }
    return x;
}

Sample FixedDataset::sample(std::size_t i) const {
    return Sample{x.row(static_cast<Eigen::Index>(i)).transpose(), labels.at(i)};
}

FixedDataset make_training_set(const SphereConfig& config, std::size_t count) {
    config.validate();
    if (count == 0) throw DomainError("make_training_set: N must be positive");
    RngStream stream(config.seed, kTrainingSetStream);
    Batch b = sample_batch(config, count, stream);
    return FixedDataset{config, std::move(b.x), std::move(b.labels)};
}

// ---------------------------------------------------------------------------
// Dataset cache

namespace {

constexpr char kCacheMagic[8] = {'S', 'P', 'H', 'D', 'S', 'E', 'T', '1'};

template <typename T>
void put_le(std::ostream& os, T value) {
    static_assert(std::endian::native == std::endian::little, "cache format assumes little-endian host");
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
    T value{};
    is.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!is) throw FormatError("dataset cache: truncated file");
    return value;
}

}  // namespace

void save_dataset_cache(const FixedDataset& data, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("dataset cache: cannot open " + path.string() + " for writing");
    os.write(kCacheMagic, sizeof(kCacheMagic));
    put_le<std::uint64_t>(os, data.config.n);
    put_le<double>(os, data.config.radius);
    put_le<std::uint64_t>(os, data.size());
    put_le<std::uint64_t>(os, data.config.seed);
    os.write(reinterpret_cast<const char*>(data.x.data()),
             static_cast<std::streamsize>(data.x.size() * sizeof(double)));
    for (int label : data.labels) os.put(static_cast<char>(label));
    if (!os) throw FormatError("dataset cache: write failed for " + path.string());
}

FixedDataset load_dataset_cache(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("dataset cache: cannot open " + path.string());
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kCacheMagic, sizeof(magic)) != 0) {
        throw FormatError("dataset cache: bad magic in " + path.string());
    }
    FixedDataset out;
    out.config.n = get_le<std::uint64_t>(is);
    out.config.radius = get_le<double>(is);
    const auto count = get_le<std::uint64_t>(is);
    out.config.seed = get_le<std::uint64_t>(is);
    out.config.validate();
    out.x.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(out.config.n));
    is.read(reinterpret_cast<char*>(out.x.data()), static_cast<std::streamsize>(out.x.size() * sizeof(double)));
    out.labels.resize(count);
    for (auto& label : out.labels) {
        const int c = is.get();
        if (c != 0 && c != 1) throw FormatError("dataset cache: truncated or invalid label");
        label = c;
    }
    if (!is) throw FormatError("dataset cache: truncated payload");
    return out;
}

// ---------------------------------------------------------------------------
// IDX

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset, const char* what) {
    if (bytes.size() < offset + 4) {
        throw IdxError(IdxError::Kind::Truncated, offset,
                       std::string("IDX: file ends inside the ") + what + " field");
    }
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::string hex32(std::uint32_t v) {
    std::ostringstream os;
    os << "0x" << std::hex << v;
    return os.str();
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IdxError(IdxError::Kind::Io, 0, "IDX: cannot open " + path.string());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes) {
    const std::uint32_t magic = read_be32(bytes, 0, "magic");
    if (magic != kIdxImagesMagic) {
        throw IdxError(IdxError::Kind::BadMagic, 0,
                       "IDX images: bad magic number " + hex32(magic) + ", expected 0x803");
    }
    IdxImages img;
    img.count = read_be32(bytes, 4, "image count");
    img.rows = read_be32(bytes, 8, "row count");
    img.cols = read_be32(bytes, 12, "column count");
    const std::uint64_t payload = std::uint64_t{img.count} * img.rows * img.cols;
    constexpr std::size_t header = 16;
    if (bytes.size() - header < payload) {
        throw IdxError(IdxError::Kind::Truncated, bytes.size(),
                       "IDX images: payload truncated, expected " + std::to_string(payload) +
                           " pixel bytes but found " + std::to_string(bytes.size() - header));
    }
    img.pixels.assign(bytes.begin() + header, bytes.begin() + static_cast<std::ptrdiff_t>(header + payload));
    return img;
}

std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes) {
    const std::uint32_t magic = read_be32(bytes, 0, "magic");
    if (magic != kIdxLabelsMagic) {
        throw IdxError(IdxError::Kind::BadMagic, 0,
                       "IDX labels: bad magic number " + hex32(magic) + ", expected 0x801");
    }
    const std::uint32_t count = read_be32(bytes, 4, "label count");
    constexpr std::size_t header = 8;
    if (bytes.size() - header < count) {
        throw IdxError(IdxError::Kind::Truncated, bytes.size(),
                       "IDX labels: payload truncated, expected " + std::to_string(count) + " labels");
    }
    return {bytes.begin() + header, bytes.begin() + static_cast<std::ptrdiff_t>(header + count)};
}

std::vector<std::uint8_t> encode_idx_images(const IdxImages& images) {
    std::vector<std::uint8_t> out;
    out.reserve(16 + images.pixels.size());
    write_be32(out, kIdxImagesMagic);
    write_be32(out, images.count);
    write_be32(out, images.rows);
    write_be32(out, images.cols);
    out.insert(out.end(), images.pixels.begin(), images.pixels.end());
    return out;
}

std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels) {
    std::vector<std::uint8_t> out;
    out.reserve(8 + labels.size());
    write_be32(out, kIdxLabelsMagic);
    write_be32(out, static_cast<std::uint32_t>(labels.size()));
    out.insert(out.end(), labels.begin(), labels.end());
    return out;
}

MnistSet decode_idx_pair(std::span<const std::uint8_t> image_bytes,
                         std::span<const std::uint8_t> label_bytes, std::size_t required_pixels) {
    const IdxImages img = parse_idx_images(image_bytes);
    const std::vector<std::uint8_t> labels = parse_idx_labels(label_bytes);
    if (labels.size() != img.count) {
        throw IdxError(IdxError::Kind::CountMismatch, 4,
                       "IDX: image count " + std::to_string(img.count) + " does not match label count " +
                           std::to_string(labels.size()));
    }
    const std::size_t pixels = std::size_t{img.rows} * img.cols;
    if (required_pixels != 0 && pixels != required_pixels) {
        throw IdxError(IdxError::Kind::BadDimensions, 8,
                       "IDX images: " + std::to_string(img.rows) + "x" + std::to_string(img.cols) +
                           " images, expected " + std::to_string(required_pixels) + " pixels");
    }
    MnistSet set;
    set.rows = img.rows;
    set.cols = img.cols;
    set.images.resize(img.count, static_cast<Eigen::Index>(pixels));
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        set.images.data()[i] = static_cast<double>(img.pixels[i]) / 255.0;
    }
    set.labels.assign(labels.begin(), labels.end());
    return set;
}

MnistSet load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                  std::size_t required_pixels) {
    const auto image_bytes = read_file(images_path);
    const auto label_bytes = read_file(labels_path);
    return decode_idx_pair(image_bytes, label_bytes, required_pixels);
}

}  // namespace spheres
