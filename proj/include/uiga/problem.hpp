#pragma once

// Patch hierarchy plus boundary-condition assignments and the manufactured solution id.

#include <string>
#include <vector>

#include "uiga/splines.hpp"

namespace uiga {

enum class BcType { dirichlet, neumann };

struct BoundaryCondition {
    int patch = 0;
    Side side = Side::left;
    BcType type = BcType::dirichlet;
};

/// Unlisted external boundary pieces are Neumann with data grad(u).n of the solution.
struct Problem {
    std::string name;
    std::vector<SplinePatch> patches;  ///< index 0 is the bottom of the hierarchy
    std::vector<BoundaryCondition> bcs;
    std::string solution = "zero";
};

/// Uniform refinement of every patch (each element split n x n).
inline Problem refined(const Problem& p, int n_subdiv) {
    Problem out = p;
    for (auto& patch : out.patches) patch = patch.h_refine(n_subdiv);
    return out;
}

}  // namespace uiga
