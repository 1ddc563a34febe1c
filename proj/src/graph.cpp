#include "otrack/graph.hpp"

#include <queue>
#include <stdexcept>
#include <vector>

namespace otrack {

Topology build_topology(const IntMatrix& adjacency, const IntVector& leader_links) {
    const Eigen::Index n = adjacency.rows();
    if (adjacency.cols() != n)
        throw std::invalid_argument("build_topology: adjacency must be square");
    if (leader_links.size() != n)
        throw std::invalid_argument("build_topology: leader link length mismatch");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (adjacency(i, i) != 0)
            throw std::invalid_argument("build_topology: nonzero diagonal in adjacency");
        if (leader_links(i) != 0 && leader_links(i) != 1)
            throw std::invalid_argument("build_topology: leader links must be 0/1");
        for (Eigen::Index j = 0; j < n; ++j) {
            if (adjacency(i, j) != 0 && adjacency(i, j) != 1)
                throw std::invalid_argument("build_topology: adjacency entries must be 0/1");
            if (adjacency(i, j) != adjacency(j, i))
                throw std::invalid_argument(
                    "build_topology: follower adjacency must be symmetric");
        }
    }
    return Topology{static_cast<int>(n), adjacency, leader_links};
}

bool leader_reaches_all(const Topology& t) {
    const int n = t.n_followers;
    std::vector<char> seen(static_cast<size_t>(n), 0);
    std::queue<int> frontier;
    for (int i = 0; i < n; ++i) {
        if (t.leader_links(i) != 0) {
            seen[static_cast<size_t>(i)] = 1;
            frontier.push(i);
        }
    }
    while (!frontier.empty()) {
        const int u = frontier.front();
        frontier.pop();
        for (int v = 0; v < n; ++v) {
            if (t.follower_adjacency(u, v) != 0 && !seen[static_cast<size_t>(v)]) {
                seen[static_cast<size_t>(v)] = 1;
                frontier.push(v);
            }
        }
    }
    for (int i = 0; i < n; ++i)
        if (!seen[static_cast<size_t>(i)]) return false;
    return true;
}

SpectralSummary spectral_summary(const Topology& t) {
    const int n = t.n_followers;
    Matrix lap = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        int deg = 0;
        for (int j = 0; j < n; ++j) {
            deg += t.follower_adjacency(i, j);
            if (i != j) lap(i, j) = -static_cast<double>(t.follower_adjacency(i, j));
        }
        lap(i, i) = static_cast<double>(deg);
    }
    Matrix f = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) f(i, i) = static_cast<double>(t.leader_links(i));
    Eigen::SelfAdjointEigenSolver<Matrix> es(lap + f);
    SpectralSummary s;
    s.laplacian = lap;
    s.leader_diag = f;
    s.lambda1 = es.eigenvalues().minCoeff();
    s.has_spanning_tree = leader_reaches_all(t);
    return s;
}

SelectorMatrices selector_matrices(const Topology& t, int i, int j) {
    const int n = t.n_followers;
    if (i < 1 || i > n || j < 1 || j > n)
        throw std::invalid_argument("selector_matrices: index out of range");
    SelectorMatrices s;
    s.s1 = IntMatrix::Zero(n, n);
    s.s1_bar = IntMatrix::Zero(n, n);
    s.s2 = IntMatrix::Zero(n, n);
    s.s2_bar = IntMatrix::Zero(n, n);
    const int aij = t.follower_adjacency(i - 1, j - 1);
    const int ai0 = t.leader_links(i - 1);
    s.s1(i - 1, i - 1) = aij;
    s.s1_bar(i - 1, i - 1) = ai0;
    s.s2(i - 1, i - 1) = -aij;
    s.s2(i - 1, j - 1) += aij;  // i == j leaves the zero matrix
    s.s2_bar(i - 1, i - 1) = ai0;
    return s;
}

}  // namespace otrack
