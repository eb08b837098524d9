#pragma once

#include "mfg/model.hpp"
#include "mfg/solver.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mfg {

struct SolverConfig {
    int J = 100;
    int P = 64;
    int M = 256;
    std::uint64_t seed = 1;
    double local_eps = 0.01;
    SolverOptions options;
};

struct StudyConfig {
    std::string kind = "state-gap";
    std::vector<int> Ns{8, 16, 32, 64, 128};
    int replications = 64;
    std::uint64_t seed = 1;
    int agent = 1;
};

struct RunConfig {
    ModelSpec spec;
    SolverConfig solver;
    StudyConfig study;
};

/// JSON document with sections "model", "constraints", "solver" and "study".
///
/// Matrices are nested arrays, a bare number s for s*I, or {"segments": [{"t": t, "value": M}, ...]}
/// for piecewise coefficients. Missing coefficients are zero, missing R is the identity
/// and missing type weights are uniform. Errors name the line or the field path.
RunConfig parse_config(const std::string& text, const std::string& origin = "<config>");
RunConfig load_config(const std::string& path);

/// Canonical JSON text of a config; equal configs give equal text.
std::string dump_config(const RunConfig& cfg);

}  // namespace mfg
