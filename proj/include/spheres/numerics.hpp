#pragma once

// Deterministic random numbers, Gaussian special functions and the dense
// array types shared by the whole library.

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>

namespace spheres {

/// Dense column vector of doubles.
using Vector = Eigen::VectorXd;
/// Dense row-major matrix of doubles; rows are samples wherever a matrix holds a batch.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// True when every entry is finite.
template <class Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
    return x.allFinite();
}

/// Counter-based random stream built on Philox4x32-10 (Salmon et al., SC'11).
///
/// The 64-bit seed is the Philox key. The 128-bit counter is split into a
/// 64-bit stream index (high half) and a 64-bit block counter (low half), so
/// streams `(seed, i)` and `(seed, j)` with i != j never share a counter
/// value: each has 2^64 blocks of four 32-bit words before wrapping.
///
/// Doubles use the top 53 bits of a 64-bit draw. Normals use the Marsaglia
/// polar method; the second variate of each accepted pair is cached.
///
/// A stream is single-owner. Hand out `substream()`s for concurrent work.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_index() const noexcept { return stream_; }

    /// Independent stream keyed by `index`. Stream indices of substreams are
    /// derived with a SplitMix64 finaliser from (this stream, index).
    RngStream substream(std::uint64_t index) const noexcept;

    std::uint32_t next_u32() noexcept;
    std::uint64_t next_u64() noexcept;

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;
    /// Uniform integer in [0, bound). `bound` must be positive.
    std::uint64_t below(std::uint64_t bound) noexcept;
    bool coin() noexcept { return (next_u32() >> 31) != 0U; }
    /// Standard normal draw (polar method).
    double normal() noexcept;

    /// Raw Philox4x32-10 block function, exposed for known-answer tests.
    static std::array<std::uint32_t, 4> philox(std::array<std::uint32_t, 4> counter,
                                               std::array<std::uint32_t, 2> key) noexcept;

private:
    void refill() noexcept;

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buffer_{};
    int used_ = 4;
    std::optional<double> spare_normal_;
};

/// Fills a vector with `count` iid standard normals drawn from `stream`.
Vector standard_normals(RngStream& stream, std::size_t count);

/// Standard normal CDF, Φ(x) = erfc(-x/√2)/2. Accurate to a few ulp in both tails.
double normal_cdf(double x) noexcept;

/// Standard normal density.
double normal_pdf(double x) noexcept;

/// Inverse of normal_cdf on (0, 1). Throws DomainError outside the open interval.
///
/// Wichura's AS241 (PPND16) rational approximation followed by one Newton
/// step against normal_cdf.
double normal_quantile(double p);

}  // namespace spheres
