#include "mfg/paths.hpp"

#include <cmath>
#include <numbers>

namespace mfg {

TimeGrid::TimeGrid(double T_, int J_) : T(T_), J(J_), dt(T_ / J_)
{
    if (!(T_ > 0.0) || J_ < 1) throw ConfigError("time grid needs T > 0 and J >= 1");
}

Philox4x32::Counter Philox4x32::block(Counter ctr, Key key)
{
    constexpr std::uint64_t m0 = 0xD2511F53, m1 = 0xCD9E8D57;
    constexpr std::uint32_t w0 = 0x9E3779B9, w1 = 0xBB67AE85;
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += w0;
            key[1] += w1;
        }
        const std::uint64_t p0 = m0 * ctr[0];
        const std::uint64_t p1 = m1 * ctr[2];
        ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
               static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    }
    return ctr;
}

namespace {

Philox4x32::Counter draw(std::uint64_t seed, StreamRole role, std::uint32_t a, std::uint32_t b,
                         std::uint32_t c, std::uint32_t d)
{
    const Philox4x32::Key key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    return Philox4x32::block({a, b, (c & 0x00ffffffu) | (static_cast<std::uint32_t>(role) << 24), d}, key);
}

// Uniform on (0, 1) from the top 53 bits of a 64-bit word.
double to_unit(std::uint32_t hi, std::uint32_t lo)
{
    const std::uint64_t w = (static_cast<std::uint64_t>(hi) << 32) | lo;
    return (static_cast<double>(w >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

double uniform_at(std::uint64_t seed, StreamRole role, std::uint32_t a, std::uint32_t b, std::uint32_t c,
                  std::uint32_t d)
{
    const auto r = draw(seed, role, a, b, c, d);
    return to_unit(r[0], r[1]);
}

double normal_at(std::uint64_t seed, StreamRole role, std::uint32_t a, std::uint32_t b, std::uint32_t c,
                 std::uint32_t d)
{
    const auto r = draw(seed, role, a, b, c, d);
    const double u1 = to_unit(r[0], r[1]);
    const double u2 = to_unit(r[2], r[3]);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double common_increment(std::uint64_t seed, double dt, int p, int j)
{
    return std::sqrt(dt) * normal_at(seed, StreamRole::Common, static_cast<std::uint32_t>(j), 0u, 0u,
                                     static_cast<std::uint32_t>(p));
}

double particle_increment(std::uint64_t seed, double dt, int p, int k, int i, int j)
{
    return std::sqrt(dt) * normal_at(seed, StreamRole::Particle, static_cast<std::uint32_t>(j),
                                     static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(k),
                                     static_cast<std::uint32_t>(p));
}

std::size_t ensemble_bytes(const TimeGrid& grid, int P, int M, int K)
{
    const auto J = static_cast<std::size_t>(grid.J);
    return sizeof(double) * J * static_cast<std::size_t>(P) * (1 + static_cast<std::size_t>(K) * M);
}

NoiseEnsemble sample_ensemble(const TimeGrid& grid, int P, int M, int K, std::uint64_t seed, std::size_t cap_bytes)
{
    if (P < 1 || M < 1 || K < 1) throw ConfigError("ensemble needs P, M, K >= 1");
    if (K >= (1 << 24)) throw ConfigError("too many minor types");
    const std::size_t bytes = ensemble_bytes(grid, P, M, K);
    if (bytes > cap_bytes)
        throw CapacityError("noise ensemble needs " + std::to_string(bytes >> 20) + " MiB, cap is " +
                            std::to_string(cap_bytes >> 20) + " MiB");
    NoiseEnsemble e;
    e.grid = grid;
    e.P = P;
    e.M = M;
    e.K = K;
    e.seed = seed;
    e.dW0.resize(static_cast<std::size_t>(grid.J) * P);
    e.dW.resize(static_cast<std::size_t>(grid.J) * P * K * M);
    const double dt = grid.dt;
#pragma omp parallel for schedule(static)
    for (int j = 0; j < grid.J; ++j) {
        for (int p = 0; p < P; ++p) {
            e.dW0[static_cast<std::size_t>(j) * P + p] = common_increment(seed, dt, p, j);
            for (int k = 0; k < K; ++k)
                for (int i = 0; i < M; ++i)
                    e.dW[((static_cast<std::size_t>(j) * P + p) * K + k) * M + i] =
                        particle_increment(seed, dt, p, k, i, j);
        }
    }
    return e;
}

Vector conditional_mean(const double* values, int count, int n)
{
    if (count < 1) throw PreconditionError("conditional mean of an empty particle set");
    Vector s = Vector::Zero(n);
    for (int i = 0; i < count; ++i) s += Eigen::Map<const Vector>(values + static_cast<std::size_t>(i) * n, n);
    return s / count;
}

Vector conditional_mean(const std::vector<Vector>& values)
{
    if (values.empty()) throw PreconditionError("conditional mean of an empty particle set");
    Vector s = Vector::Zero(values.front().size());
    for (const auto& v : values) s += v;
    return s / static_cast<double>(values.size());
}

Vector phi_field(const std::vector<Vector>& means, const Vector& pi)
{
    if (means.size() != static_cast<std::size_t>(pi.size()) || means.empty())
        throw StructuralError("phi_field needs one mean per type");
    Vector s = Vector::Zero(means.front().size());
    for (std::size_t k = 0; k < means.size(); ++k) s += pi[static_cast<Eigen::Index>(k)] * means[k];
    return s;
}

}  // namespace mfg
