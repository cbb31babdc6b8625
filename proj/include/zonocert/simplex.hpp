#pragma once

#include <Eigen/Dense>

namespace zonocert::cert {

struct LpResult {
    enum class Status { Optimal, Infeasible, IterationLimit } status = Status::Optimal;
    double value = 0.0;
    Eigen::VectorXd x;
};

// maximize c.x  subject to  A x <= b  and  lo <= x <= hi.
// Dense two-phase tableau simplex; sized for the small systems produced by
// branch-and-bound leaves. IterationLimit is returned instead of looping
// forever and callers must treat it as "undecided".
LpResult solve_lp_box(const Eigen::VectorXd& c, const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                      const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

} // namespace zonocert::cert
