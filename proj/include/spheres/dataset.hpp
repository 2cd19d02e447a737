#pragma once

// The concentric-spheres distribution, fixed training sets drawn from it, and
// the IDX container used by MNIST.

#include "spheres/numerics.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace spheres {

inline constexpr double kDefaultOuterRadius = 1.3;

/// Inner shell (norm 1) is label 0, outer shell (norm R) is label 1.
enum class Shell : int { Inner = 0, Outer = 1 };

struct SphereConfig {
    std::size_t n = 500;
    double radius = kDefaultOuterRadius;  ///< R, must exceed 1
    std::uint64_t seed = 0;

    /// Throws DomainError unless n >= 2 and R > 1.
    void validate() const;
    double shell_radius(Shell shell) const { return shell == Shell::Inner ? 1.0 : radius; }
};

struct Sample {
    Vector x;
    int label = 0;
};

/// One draw: fair-coin label, then x = r·z/‖z‖ with z ~ N(0, I).
Sample sample_sphere(const SphereConfig& config, RngStream& stream);

/// A point drawn uniformly from one shell.
Vector sample_shell(const SphereConfig& config, Shell shell, RngStream& stream);

/// `count` draws of sample_sphere packed row-wise. Consumes the stream in the
/// same order as repeated sample_sphere calls.
struct Batch {
    Matrix x;
    std::vector<int> labels;
};
Batch sample_batch(const SphereConfig& config, std::size_t count, RngStream& stream);

/// `count` points from a single shell packed row-wise.
Matrix sample_shell_batch(const SphereConfig& config, Shell shell, std::size_t count,
                          RngStream& stream);

/// A finite training set. Rows of `x` are the samples.
struct FixedDataset {
    SphereConfig config;  ///< provenance: n, R and the seed the set was drawn with
    Matrix x;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    Sample sample(std::size_t i) const;
};

/// Stream index reserved for training-set generation, so that a training set
/// never shares draws with minibatch or evaluation streams of the same seed.
inline constexpr std::uint64_t kTrainingSetStream = 0x7472'6169'6e00ULL;

/// N independent sample_sphere draws from RngStream(config.seed, kTrainingSetStream).
FixedDataset make_training_set(const SphereConfig& config, std::size_t count);

/// Binary cache: "SPHDSET1", then little-endian u64 n, f64 R, u64 N, u64 seed,
/// then N·n f64 coordinates row-major and N label bytes.
void save_dataset_cache(const FixedDataset& data, const std::filesystem::path& path);
FixedDataset load_dataset_cache(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// IDX (MNIST) files. Big-endian. Images: magic 0x00000803, u32 count, rows,
// cols, then count·rows·cols unsigned bytes. Labels: magic 0x00000801, u32
// count, then count unsigned bytes.

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803U;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801U;
inline constexpr std::size_t kMnistPixels = 784;

struct IdxImages {
    std::uint32_t count = 0;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::vector<std::uint8_t> pixels;  ///< count·rows·cols, row-major per image
};

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_idx_images(const IdxImages& images);
std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels);

struct MnistSet {
    Matrix images;            ///< N × (rows·cols), pixels / 255
    std::vector<int> labels;  ///< 0–9
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
};

/// Reads an image/label IDX pair and scales pixels to [0, 1].
/// `required_pixels` (784 for MNIST) is enforced unless zero.
MnistSet load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                  std::size_t required_pixels = kMnistPixels);

/// Same as load_idx on in-memory buffers.
MnistSet decode_idx_pair(std::span<const std::uint8_t> image_bytes,
                         std::span<const std::uint8_t> label_bytes,
                         std::size_t required_pixels = kMnistPixels);

}  // namespace spheres
