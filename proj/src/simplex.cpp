#include "zonocert/simplex.hpp"

#include <vector>

#include "zonocert/errors.hpp"

namespace zonocert::cert {

namespace {

constexpr double kReducedCostTol = 1e-9;
constexpr double kPivotTol = 1e-11;
constexpr double kFeasTol = 1e-8;

struct Tableau {
    Eigen::MatrixXd t;       // rows x cols, last column is the rhs
    Eigen::VectorXd obj;     // reduced costs, cols-1 entries
    double value = 0.0;
    std::vector<int> basis;  // basic variable per row
    int rows = 0, cols = 0;  // structural sizes (cols excludes rhs)
    int first_artificial = 0;

    void pivot(int row, int col) {
        t.row(row) /= t(row, col);
        for (int i = 0; i < rows; ++i) {
            if (i == row) continue;
            const double f = t(i, col);
            if (f != 0.0) t.row(i) -= f * t.row(row);
        }
        const double f = obj[col];
        if (f != 0.0) {
            obj -= f * t.row(row).head(cols);
            value += f * t(row, cols);
        }
        basis[static_cast<std::size_t>(row)] = col;
    }

    // Maximizes the current objective row. Returns false on iteration limit.
    bool run(bool allow_artificial_entering, long max_iters) {
        long iters = 0;
        while (true) {
            if (++iters > max_iters) return false;
            const bool bland = iters > max_iters / 2;
            int enter = -1;
            double best = kReducedCostTol;
            const int limit = allow_artificial_entering ? cols : first_artificial;
            for (int j = 0; j < limit; ++j) {
                if (obj[j] > best) {
                    enter = j;
                    if (bland) break;
                    best = obj[j];
                }
            }
            if (enter < 0) return true;
            int leave = -1;
            double best_ratio = 0.0;
            for (int i = 0; i < rows; ++i) {
                const double a = t(i, enter);
                if (a <= kPivotTol) continue;
                const double ratio = t(i, cols) / a;
                if (leave < 0 || ratio < best_ratio - 1e-15 ||
                    (ratio < best_ratio + 1e-15 && basis[static_cast<std::size_t>(i)] <
                                                       basis[static_cast<std::size_t>(leave)])) {
                    leave = i;
                    best_ratio = ratio;
                }
            }
            if (leave < 0) {
                // Unbounded direction; cannot happen with box-bounded variables
                // but guard anyway.
                return false;
            }
            pivot(leave, enter);
        }
    }
};

} // namespace

LpResult solve_lp_box(const Eigen::VectorXd& c, const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                      const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    const int n = static_cast<int>(c.size());
    const int s = static_cast<int>(A.rows());
    if (A.cols() != n || b.size() != s || lo.size() != n || hi.size() != n) {
        throw ShapeError("solve_lp_box: inconsistent sizes");
    }
    for (int j = 0; j < n; ++j) {
        if (lo[j] > hi[j] + kFeasTol) return {LpResult::Status::Infeasible, 0.0, {}};
    }

    // Shift to u = x - lo >= 0 with rows [A; I] u <= [b - A lo; hi - lo].
    const int rows = s + n;
    Eigen::VectorXd rhs(rows);
    rhs.head(s) = b - A * lo;
    rhs.tail(n) = hi - lo;

    Tableau tb;
    tb.rows = rows;
    tb.basis.assign(static_cast<std::size_t>(rows), -1);

    // Count artificials (rows whose rhs is negative).
    int k = 0;
    for (int i = 0; i < rows; ++i) {
        if (rhs[i] < 0.0) ++k;
    }
    tb.first_artificial = n + rows;
    tb.cols = n + rows + k;
    tb.t = Eigen::MatrixXd::Zero(rows, tb.cols + 1);
    int art = 0;
    for (int i = 0; i < rows; ++i) {
        const double sign = rhs[i] < 0.0 ? -1.0 : 1.0;
        if (i < s) {
            tb.t.row(i).head(n) = sign * A.row(i);
        } else {
            tb.t(i, i - s) = sign;
        }
        tb.t(i, n + i) = sign; // slack
        tb.t(i, tb.cols) = sign * rhs[i];
        if (sign < 0.0) {
            tb.t(i, tb.first_artificial + art) = 1.0;
            tb.basis[static_cast<std::size_t>(i)] = tb.first_artificial + art;
            ++art;
        } else {
            tb.basis[static_cast<std::size_t>(i)] = n + i;
        }
    }

    const long max_iters = 4000 + 40L * (rows + tb.cols);

    if (k > 0) {
        // Phase 1: maximize -sum(artificials); canonical reduced costs are the
        // sums of the artificial rows.
        tb.obj = Eigen::VectorXd::Zero(tb.cols);
        tb.value = 0.0;
        for (int i = 0; i < rows; ++i) {
            if (tb.basis[static_cast<std::size_t>(i)] >= tb.first_artificial) {
                tb.obj += tb.t.row(i).head(tb.cols);
                tb.value -= tb.t(i, tb.cols);
            }
        }
        for (int j = tb.first_artificial; j < tb.cols; ++j) tb.obj[j] = 0.0;
        if (!tb.run(false, max_iters)) return {LpResult::Status::IterationLimit, 0.0, {}};
        if (tb.value < -kFeasTol) return {LpResult::Status::Infeasible, 0.0, {}};
        // Degenerate artificials may remain basic at zero; pivot them out when
        // a structural column is available.
        for (int i = 0; i < rows; ++i) {
            if (tb.basis[static_cast<std::size_t>(i)] < tb.first_artificial) continue;
            for (int j = 0; j < tb.first_artificial; ++j) {
                if (std::abs(tb.t(i, j)) > 1e-7) {
                    tb.pivot(i, j); // phase-2 objective is rebuilt below
                    break;
                }
            }
        }
    }

    // Phase 2 objective over the shifted variables.
    tb.obj = Eigen::VectorXd::Zero(tb.cols);
    tb.obj.head(n) = c;
    tb.value = 0.0;
    for (int i = 0; i < rows; ++i) {
        const int bi = tb.basis[static_cast<std::size_t>(i)];
        double cb = 0.0;
        if (bi < n) cb = c[bi];
        if (cb != 0.0) {
            tb.obj -= cb * tb.t.row(i).head(tb.cols);
            tb.value += cb * tb.t(i, tb.cols);
        }
    }
    if (!tb.run(false, max_iters)) return {LpResult::Status::IterationLimit, 0.0, {}};

    Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < rows; ++i) {
        const int bi = tb.basis[static_cast<std::size_t>(i)];
        if (bi < n) u[bi] = tb.t(i, tb.cols);
    }
    LpResult out;
    out.status = LpResult::Status::Optimal;
    out.x = lo + u;
    // Clamp tiny numerical overshoot back into the box.
    for (int j = 0; j < n; ++j) out.x[j] = std::min(std::max(out.x[j], lo[j]), hi[j]);
    out.value = c.dot(out.x);
    return out;
}

} // namespace zonocert::cert
