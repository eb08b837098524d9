#pragma once

#include "mfg/convex.hpp"
#include "mfg/model.hpp"
#include "mfg/paths.hpp"

#include <vector>

namespace mfg::detail {

struct MinorNode {
    SMat A, D, Kb, Kd;  // Kb = R^{-1}B', Kd = R^{-1}D'
};

/// Coefficients frozen on one grid step [t_j, t_{j+1}).
struct NodeModel {
    SMat A0, B0, C0, D0, F01, F02, K0b, K0d;
    SVec b0, s0;
    SMat B, C, F1, F2, H;
    SVec b, s;
    std::vector<MinorNode> types;
};

struct ModelTable {
    int n = 0, m = 0, K = 0;
    std::vector<NodeModel> nodes;  // J + 1 entries
    SMat Q0, G0, Q, G;
    double rho0 = 0, rho = 0;
    SVec x0, x;
    std::vector<double> pi;
    Projector major;
    std::vector<Projector> minor;

    ModelTable(const ModelSpec& spec, const TimeGrid& grid);
};

inline ModelTable::ModelTable(const ModelSpec& spec, const TimeGrid& grid)
    : n(spec.n), m(spec.m), K(spec.K())
{
    const auto& M0 = spec.major;
    const auto& mi = spec.minor;
    const Matrix R0i = M0.R.inverse();
    std::vector<Matrix> Ri;
    for (const auto& t : spec.types) Ri.push_back(t.R.inverse());
    nodes.resize(grid.J + 1);
    for (int j = 0; j <= grid.J; ++j) {
        const double t = grid.t(j);
        auto& nd = nodes[j];
        nd.A0 = M0.A.at(t);
        nd.B0 = M0.B.at(t);
        nd.C0 = M0.C.at(t);
        nd.D0 = M0.D.at(t);
        nd.F01 = M0.F1.at(t);
        nd.F02 = M0.F2.at(t);
        nd.K0b = R0i * M0.B.at(t).transpose();
        nd.K0d = R0i * M0.D.at(t).transpose();
        nd.b0 = M0.b.at(t);
        nd.s0 = M0.sigma.at(t);
        nd.B = mi.B.at(t);
        nd.C = mi.C.at(t);
        nd.F1 = mi.F1.at(t);
        nd.F2 = mi.F2.at(t);
        nd.H = mi.H.at(t);
        nd.b = mi.b.at(t);
        nd.s = mi.sigma.at(t);
        for (int k = 0; k < K; ++k) {
            const auto& ty = spec.types[k];
            nd.types.push_back(MinorNode{ty.A.at(t), ty.D.at(t), Ri[k] * mi.B.at(t).transpose(),
                                         Ri[k] * ty.D.at(t).transpose()});
        }
    }
    Q0 = M0.Q;
    G0 = M0.G;
    Q = mi.Q;
    G = mi.G;
    rho0 = M0.rho;
    rho = mi.rho;
    x0 = M0.x0;
    x = mi.x0;
    for (const auto& t : spec.types) pi.push_back(t.pi);
    major = Projector(M0.gamma, WeightedMetric(M0.R));
    for (const auto& t : spec.types) minor.emplace_back(t.gamma, WeightedMetric(t.R));
}

}  // namespace mfg::detail
