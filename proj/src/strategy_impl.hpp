#pragma once

#include "mfg/solver.hpp"

#include "node_model.hpp"

namespace mfg::detail {

using CVec = Eigen::Map<const Vector>;

/// Limiting type-k agent on common path `path` with a prebuilt coefficient table.
void agent_path(const CCSolution& sol, const ModelTable& tab, int type, const double* dW, int path, AgentPath& out);

/// Limiting major agent on common path `path`.
void major_path(const CCSolution& sol, const ModelTable& tab, int path, AgentPath& out);

void check_solution(const CCSolution& sol, int path);

}  // namespace mfg::detail
