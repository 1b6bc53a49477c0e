#pragma once

#include <stdexcept>

namespace loadfc {

inline void check_tau(double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("quantile level must lie in (0, 1)");
}

/// tau * (y - yhat) when y > yhat, otherwise (1 - tau) * (yhat - y).
inline double pinball_loss(double y, double yhat, double tau) {
    check_tau(tau);
    return y > yhat ? tau * (y - yhat) : (1.0 - tau) * (yhat - y);
}

/// d/dyhat of pinball_loss; the tie y == yhat takes the (1 - tau) branch.
inline double pinball_grad(double y, double yhat, double tau) {
    check_tau(tau);
    return y > yhat ? -tau : 1.0 - tau;
}

}  // namespace loadfc
