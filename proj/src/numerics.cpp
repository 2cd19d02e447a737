#include "spheres/numerics.hpp"

#include "spheres/error.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace spheres {


namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53U;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57U;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9U;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85U;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(product >> 32);
    lo = static_cast<std::uint32_t>(product);
}

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

std::array<std::uint32_t, 4> RngStream::philox(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) noexcept {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kPhiloxW0;
            key[1] += kPhiloxW1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
        mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream) noexcept
    : seed_(seed), stream_(stream) {}

RngStream RngStream::substream(std::uint64_t index) const noexcept {
    return RngStream(seed_, splitmix64(stream_ ^ splitmix64(index)));
}

void RngStream::refill() noexcept {
    const std::array<std::uint32_t, 4> counter = {
        static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
        static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
    const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_),
                                              static_cast<std::uint32_t>(seed_ >> 32)};
    buffer_ = philox(counter, key);
    ++block_;
    used_ = 0;
}

std::uint32_t RngStream::next_u32() noexcept {
    if (used_ == 4) refill();
    return buffer_[used_++];
}

std::uint64_t RngStream::next_u64() noexcept {
    const std::uint64_t hi = next_u32();
    const std::uint64_t lo = next_u32();
    return (hi << 32) | lo;
}

double RngStream::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::below(std::uint64_t bound) noexcept {
    // Rejection on the top of the range keeps the result unbiased.
    const std::uint64_t limit = bound * (UINT64_MAX / bound);
    std::uint64_t draw;
    do {
        draw = next_u64();
    } while (draw >= limit);
    return draw % bound;
}

double RngStream::normal() noexcept {
    if (spare_normal_) {
        const double value = *spare_normal_;
        spare_normal_.reset();
        return value;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    spare_normal_ = v * factor;
    return u * factor;
}

Vector standard_normals(RngStream& stream, std::size_t count) {
    Vector out(static_cast<Eigen::Index>(count));
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = stream.normal();
    return out;
}

double normal_cdf(double x) noexcept {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double normal_pdf(double x) noexcept {
    constexpr double kInvSqrt2Pi = 0.3989422804014326779399;
    return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

namespace {

// Wichura, Algorithm AS241, PPND16. Coefficients in ascending powers.
template <std::size_t N>
double horner(const double (&c)[N], double r) {
    double acc = c[N - 1];
    for (std::size_t i = N - 1; i-- > 0;) acc = acc * r + c[i];
    return acc;
}

constexpr double kA[] = {3.387132872796366608,   133.14166789178437745, 1971.5909503065514427,
                         13731.693765509461125,  45921.953931549871457, 67265.770927008700853,
                         33430.575583588128105,  2509.0809287301226727};
constexpr double kB[] = {1.0,                    42.313330701600911252, 687.1870074920579083,
                         5394.1960214247511077,  21213.794301586595867, 39307.89580009271061,
                         28729.085735721942674,  5226.495278852545925};
constexpr double kC[] = {1.42343711074968357734,   4.6303378461565452959,   5.7694972214606914055,
                         3.64784832476320460504,   1.27045825245236838258,  0.24178072517745061177,
                         0.0227238449892691845833, 7.7454501427834140764e-4};
constexpr double kD[] = {1.0,                      2.05319162663775882187,  1.6763848301838038494,
                         0.68976733498510000455,   0.14810397642748007459,  0.0151986665636164571966,
                         5.475938084995344946e-4,  1.05075007164441684324e-9};
constexpr double kE[] = {6.6579046435011037772,    5.4637849111641143699,   1.7848265399172913358,
                         0.29656057182850489123,   0.026532189526576123093, 0.0012426609473880784386,
                         2.71155556874348757815e-5, 2.01033439929228813265e-7};
constexpr double kF[] = {1.0,                       0.59983220655588793769,  0.13692988092273580531,
                         0.0148753612908506148525,  7.868691311456132591e-4, 1.8463183175100546818e-5,
                         1.4215117583164458887e-7,  2.04426310338993978564e-15};

double ppnd16(double p) {
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q * horner(kA, r) / horner(kB, r);
    }
    double r = std::sqrt(-std::log(q < 0.0 ? p : 1.0 - p));
    double x;
    if (r <= 5.0) {
        r -= 1.6;
        x = horner(kC, r) / horner(kD, r);
    } else {
        r -= 5.0;
        x = horner(kE, r) / horner(kF, r);
    }
    return q < 0.0 ? -x : x;
}

}  // namespace

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw DomainError("normal_quantile: p must lie in (0, 1), got " + std::to_string(p));
    }
    // Work in the lower tail, where normal_cdf has full relative accuracy.
    if (p > 0.5) return -normal_quantile(1.0 - p);
    double x = ppnd16(p);
    const double density = normal_pdf(x);
    if (density > 0.0) x -= (normal_cdf(x) - p) / density;
    return x;
}

}  // namespace spheres
