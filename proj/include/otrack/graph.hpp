#pragma once

#include "otrack/numerics.hpp"

namespace otrack {

/// Communication topology: undirected {0,1} adjacency among N followers plus
/// binary leader links. Immutable after construction through build_topology.
struct Topology {
    int n_followers;
    IntMatrix follower_adjacency;  // N x N, symmetric, zero diagonal
    IntVector leader_links;        // length N, a_{i0}

    bool has_edge(int i, int j) const { return follower_adjacency(i - 1, j - 1) != 0; }
    bool has_leader_link(int i) const { return leader_links(i - 1) != 0; }
};

Topology build_topology(const IntMatrix& adjacency, const IntVector& leader_links);

struct SpectralSummary {
    Matrix laplacian;      // L of the follower graph
    Matrix leader_diag;    // F = diag(a_10, ..., a_N0)
    double lambda1;        // smallest eigenvalue of L + F
    bool has_spanning_tree;
};

SpectralSummary spectral_summary(const Topology& t);

/// Breadth-first reachability of every follower from the leader through
/// leader links and undirected follower edges.
bool leader_reaches_all(const Topology& t);

/// The four selector matrices of the observer error diffusion, for follower
/// pair (i, j), 1-based. S1 carries a_ij at (i,i); S1bar carries a_i0 at
/// (i,i); S2 carries -a_ij at (i,i) and a_ij at (i,j); S2bar carries a_i0 at
/// (i,i).
struct SelectorMatrices {
    IntMatrix s1;
    IntMatrix s1_bar;
    IntMatrix s2;
    IntMatrix s2_bar;
};

SelectorMatrices selector_matrices(const Topology& t, int i, int j);

}  // namespace otrack
