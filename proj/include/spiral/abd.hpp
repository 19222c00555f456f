#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace spiral {

/// Linear system with the almost-block-diagonal structure of piecewise
/// collocation plus one dense border column (the frequency unknown):
///
///   rows:  left BC (nl x n) on u_0
///          interval j (p*n rows) on nodes u_{jp}..u_{jp+p} + border column
///          right BC (nr x n) on u_{pM}
///
/// Unknowns are the node values u_0..u_{pM} (n each) and the scalar border.
/// Well-posedness requires nl + nr == n + 1.
struct AbdSystem {
    int n = 0;         // state dimension per node
    int p = 0;         // collocation points per interval
    int intervals = 0; // M

    std::vector<Eigen::MatrixXd> blocks;  // per interval: (p*n) x ((p+1)*n)
    std::vector<Eigen::VectorXd> border;  // per interval: (p*n) border column
    Eigen::MatrixXd left_bc;              // nl x n
    Eigen::VectorXd left_border;          // nl
    Eigen::MatrixXd right_bc;             // nr x n
    Eigen::VectorXd right_border;         // nr

    int node_count() const { return p * intervals + 1; }
    int unknown_count() const { return n * node_count() + 1; }
    int row_count() const {
        return static_cast<int>(left_bc.rows() + right_bc.rows()) + p * n * intervals;
    }
};

struct SingularSystemError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Structured solve by interval condensation and a stabilized forward sweep
/// with row pivoting. Destroys the system blocks. `rhs` holds one column per
/// right-hand side, rows ordered [left BC, interval 0.., right BC]. Returns
/// [u_0; u_1; ...; u_{pM}; border] per column.
Eigen::MatrixXd abd_solve(AbdSystem& sys, Eigen::MatrixXd rhs);

} // namespace spiral
