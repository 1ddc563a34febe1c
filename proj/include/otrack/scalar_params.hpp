#pragma once

namespace otrack {

/// Parameters of the one-dimensional star-topology closed loop used by the
/// scalar bounds and closed-form oracles.
struct ScalarParams {
    double a0 = 0.0;
    double ai = 0.0;
    double bi = 1.0;
    double ci = 1.0;
    double c0 = 1.0;
    double k = 1.0;    // leader-observer injection gain (G_2i = k)
    double k1i = 0.0;
    double k2i = 0.0;
    double sigma_i0 = 0.0;    // multiplicative intensity on the leader edge
    double upsilon_i0 = 0.0;  // additive intensity on the leader edge
    double g = 0.0;           // leader-observer gain in the tracking dichotomy
};

}  // namespace otrack
