#pragma once

#include "mfg/types.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace mfg {

struct TimeGrid {
    TimeGrid() = default;
    TimeGrid(double T, int J);

    double T = 1.0;
    int J = 1;
    double dt = 1.0;

    /// Node time; t(J) == T exactly.
    double t(int j) const { return j == J ? T : j * dt; }
};

/// Philox4x32-10 counter-based generator (Salmon et al., SC11).
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;
    static Counter block(Counter ctr, Key key);
};

/// Stream roles keep the counter spaces of different consumers disjoint.
enum class StreamRole : std::uint32_t { Common = 0, Particle = 1, Agent = 2, Sampling = 3 };

/// Standard normal addressed by (seed, role, a, b, c, d); c must fit in 24 bits.
double normal_at(std::uint64_t seed, StreamRole role, std::uint32_t a, std::uint32_t b,
                 std::uint32_t c, std::uint32_t d);

/// Uniform on (0, 1) addressed like normal_at.
double uniform_at(std::uint64_t seed, StreamRole role, std::uint32_t a, std::uint32_t b,
                  std::uint32_t c, std::uint32_t d);

/// Brownian increments for P common paths and M particles per type per path.
///
/// Layout is node-major: dW0 at j*P + p, dW at ((j*P + p)*K + k)*M + i.
/// Increment (p, k, i, j) is a pure function of (seed, p, k, i, j).
struct NoiseEnsemble {
    TimeGrid grid;
    int P = 0, M = 0, K = 0;
    std::uint64_t seed = 0;
    std::vector<double> dW0;
    std::vector<double> dW;

    double common(int p, int j) const { return dW0[static_cast<std::size_t>(j) * P + p]; }
    double particle(int p, int k, int i, int j) const
    {
        return dW[((static_cast<std::size_t>(j) * P + p) * K + k) * M + i];
    }
};

/// Increment dW0(p, j) regenerated from its stream address.
double common_increment(std::uint64_t seed, double dt, int p, int j);

/// Increment dW_k,i(p, j) regenerated from its stream address.
double particle_increment(std::uint64_t seed, double dt, int p, int k, int i, int j);

std::size_t ensemble_bytes(const TimeGrid& grid, int P, int M, int K);

/// Throws CapacityError when the increments alone would exceed cap_bytes.
NoiseEnsemble sample_ensemble(const TimeGrid& grid, int P, int M, int K, std::uint64_t seed,
                              std::size_t cap_bytes = std::size_t(4) << 30);

/// Arithmetic mean of count n-vectors stored contiguously.
Vector conditional_mean(const double* values, int count, int n);
Vector conditional_mean(const std::vector<Vector>& values);

/// Sum over k of pi_k * means[k].
Vector phi_field(const std::vector<Vector>& means, const Vector& pi);

}  // namespace mfg
