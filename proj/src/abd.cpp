#include "spiral/abd.hpp"

#include <cmath>

namespace spiral {

namespace {

constexpr double kPivotTol = 1e-300;

// Row-pivoted in-place elimination of the contiguous columns
// [col0, col0 + ne) of P, pivoting over all rows. Blocked right-looking;
// multipliers are stored in place, rows are physically swapped so that rows
// 0..ne-1 end up as the pivot rows in elimination order.
void eliminate_columns(Eigen::MatrixXd& P, int col0, int ne) {
    const int rows = static_cast<int>(P.rows());
    const int cols = static_cast<int>(P.cols());
    const int nb = 48;
    for (int i0 = 0; i0 < ne; i0 += nb) {
        const int ib = std::min(nb, ne - i0);
        // Unblocked factorization of the block columns.
        for (int ii = 0; ii < ib; ++ii) {
            const int i = i0 + ii;
            const int c = col0 + i;
            int rel = 0;
            P.col(c).segment(i, rows - i).cwiseAbs().maxCoeff(&rel);
            const int piv = i + rel;
            if (std::abs(P(piv, c)) < kPivotTol)
                throw SingularSystemError("abd_solve: zero pivot during condensation");
            if (piv != i)
                P.row(i).swap(P.row(piv));
            const double inv = 1.0 / P(i, c);
            P.col(c).segment(i + 1, rows - i - 1) *= inv;
            const int bcols = (i0 + ib - 1) - i; // remaining columns inside the block
            if (bcols > 0 && i + 1 < rows)
                P.block(i + 1, c + 1, rows - i - 1, bcols).noalias() -=
                    P.col(c).segment(i + 1, rows - i - 1) * P.row(i).segment(c + 1, bcols);
        }
        // Trailing update: U12 = L11^{-1} A12, A22 -= L21 * U12.
        const int tc0 = col0 + i0 + ib;      // first trailing column
        const int ntrail = cols - tc0;       // includes border + rhs columns
        const int lead = col0;               // leading columns (u_j block) also trail-update
        if (ntrail > 0 || lead > 0) {
            auto L11 = P.block(i0, col0 + i0, ib, ib);
            auto apply = [&](int c0, int nc) {
                if (nc <= 0)
                    return;
                auto U12 = P.block(i0, c0, ib, nc);
                L11.template triangularView<Eigen::UnitLower>().solveInPlace(U12);
                if (i0 + ib < rows)
                    P.block(i0 + ib, c0, rows - i0 - ib, nc).noalias() -=
                        P.block(i0 + ib, col0 + i0, rows - i0 - ib, ib) * U12;
            };
            apply(tc0, ntrail);
            apply(0, lead); // columns left of the eliminated range
        }
    }
}

// Solve for the ne eliminated values from the stored pivot rows, given the
// already-known trailing columns packed as `known` (coefficients times values
// already subtracted from rhs by the caller). Columns [col0, col0+ne) of the
// pivot rows form the upper-triangular factor.
void backsolve_pivot_rows(const Eigen::MatrixXd& P, int col0, int ne,
                          const Eigen::VectorXd& rhs_minus_known, Eigen::VectorXd& out) {
    out.resize(ne);
    for (int i = ne - 1; i >= 0; --i) {
        double s = rhs_minus_known[i];
        for (int j = i + 1; j < ne; ++j)
            s -= P(i, col0 + j) * out[j];
        out[i] = s / P(i, col0 + i);
    }
}

} // namespace

Eigen::MatrixXd abd_solve(AbdSystem& sys, Eigen::MatrixXd rhs) {
    const int n = sys.n;
    const int p = sys.p;
    const int M = sys.intervals;
    const int nl = static_cast<int>(sys.left_bc.rows());
    const int nr = static_cast<int>(sys.right_bc.rows());
    const int nrhs = static_cast<int>(rhs.cols());
    const int pn = p * n;
    const int ne = (p - 1) * n; // interior columns per interval
    if (nl + nr != n + 1)
        throw std::invalid_argument("abd_solve: boundary row counts must sum to n+1");
    if (rhs.rows() != sys.row_count())
        throw std::invalid_argument("abd_solve: rhs row count mismatch");

    // Phase 1: per-interval condensation (parallel; intervals are independent).
    // Panel layout: [u_j | interior | u_{j+1} | border | rhs...]
    const int pw = (p + 1) * n + 1 + nrhs;
    std::vector<Eigen::MatrixXd> panels(M);
    bool singular = false;
#pragma omp parallel for schedule(dynamic)
    for (int j = 0; j < M; ++j) {
        Eigen::MatrixXd P(pn, pw);
        P.leftCols((p + 1) * n) = sys.blocks[j];
        P.col((p + 1) * n) = sys.border[j];
        P.rightCols(nrhs) = rhs.middleRows(nl + j * pn, pn);
        sys.blocks[j].resize(0, 0);
        try {
            if (ne > 0)
                eliminate_columns(P, n, ne);
        } catch (const SingularSystemError&) {
#pragma omp atomic write
            singular = true;
        }
        panels[j] = std::move(P);
    }
    if (singular)
        throw SingularSystemError("abd_solve: singular interval block");

    // Phase 2: forward sweep eliminating u_j. Carry starts from the left BC.
    // Sweep panel layout: [u_j | u_{j+1} | border | rhs...]
    const int sw = 2 * n + 1 + nrhs;
    Eigen::MatrixXd carry(nl, n + 1 + nrhs); // [u_cur | border | rhs...]
    carry.leftCols(n) = sys.left_bc;
    carry.col(n) = sys.left_border;
    carry.rightCols(nrhs) = rhs.topRows(nl);
    std::vector<Eigen::MatrixXd> sweep(M);
    for (int j = 0; j < M; ++j) {
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(nl + n, sw);
        T.block(0, 0, nl, n) = carry.leftCols(n);
        T.block(0, 2 * n, nl, 1 + nrhs) = carry.rightCols(1 + nrhs);
        const auto& P = panels[j];
        T.block(nl, 0, n, n) = P.block(ne, 0, n, n);
        T.block(nl, n, n, n) = P.block(ne, n + ne, n, n);
        T.block(nl, 2 * n, n, 1 + nrhs) = P.block(ne, (p + 1) * n, n, 1 + nrhs);
        eliminate_columns(T, 0, n);
        carry.leftCols(n) = T.block(n, n, nl, n);
        carry.rightCols(1 + nrhs) = T.block(n, 2 * n, nl, 1 + nrhs);
        sweep[j] = std::move(T);
    }

    // Phase 3: dense (n+1) x (n+1) endpoint system for u_M and the border.
    Eigen::MatrixXd A(nl + nr, n + 1);
    Eigen::MatrixXd b(nl + nr, nrhs);
    A.topLeftCorner(nl, n) = carry.leftCols(n);
    A.block(0, n, nl, 1) = carry.col(n);
    A.bottomLeftCorner(nr, n) = sys.right_bc;
    A.block(nl, n, nr, 1) = sys.right_border;
    b.topRows(nl) = carry.rightCols(nrhs);
    b.bottomRows(nr) = rhs.bottomRows(nr);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    if (std::abs(lu.determinant()) == 0.0)
        throw SingularSystemError("abd_solve: singular endpoint system");
    Eigen::MatrixXd end = lu.solve(b); // rows: u_M (n), border (1)

    Eigen::MatrixXd out(sys.unknown_count(), nrhs);
    out.bottomRows(1) = end.bottomRows(1);
    out.middleRows(n * p * M, n) = end.topRows(n);

    // Phase 4: recover u_j backwards from the sweep pivot rows.
    for (int rh = 0; rh < nrhs; ++rh) {
        const double omega = end(n, rh);
        Eigen::VectorXd u_next = end.col(rh).head(n);
        for (int j = M - 1; j >= 0; --j) {
            const auto& T = sweep[j];
            Eigen::VectorXd r(n);
            for (int i = 0; i < n; ++i)
                r[i] = T(i, 2 * n + 1 + rh) - T.row(i).segment(n, n).dot(u_next) -
                       T(i, 2 * n) * omega;
            Eigen::VectorXd u_j;
            backsolve_pivot_rows(T, 0, n, r, u_j);
            out.col(rh).segment(n * p * j, n) = u_j;
            u_next = u_j;
        }
    }

    // Phase 5: recover interior node values per interval.
    if (ne > 0) {
#pragma omp parallel for schedule(dynamic)
        for (int j = 0; j < M; ++j) {
            const auto& P = panels[j];
            for (int rh = 0; rh < nrhs; ++rh) {
                const double omega = out(sys.unknown_count() - 1, rh);
                const auto u_l = out.col(rh).segment(n * p * j, n);
                const auto u_r = out.col(rh).segment(n * p * (j + 1), n);
                Eigen::VectorXd r(ne);
                for (int i = 0; i < ne; ++i)
                    r[i] = P(i, (p + 1) * n + 1 + rh) - P.row(i).head(n).dot(u_l) -
                           P.row(i).segment(n + ne, n).dot(u_r) - P(i, (p + 1) * n) * omega;
                Eigen::VectorXd v;
                backsolve_pivot_rows(P, n, ne, r, v);
                out.col(rh).segment(n * (p * j + 1), ne) = v;
            }
        }
    }
    return out;
}

} // namespace spiral
