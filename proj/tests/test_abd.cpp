#include <doctest.h>

#include <random>

#include "spiral/abd.hpp"

using namespace spiral;

namespace {

// Dense layout equivalent to the structured system, for cross-checking.
Eigen::MatrixXd densify(const AbdSystem& sys) {
    const int n = sys.n, p = sys.p, M = sys.intervals;
    const int nl = int(sys.left_bc.rows()), nr = int(sys.right_bc.rows());
    const int rows = nl + nr + p * n * M;
    const int cols = sys.unknown_count();
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(rows, cols);
    D.block(0, 0, nl, n) = sys.left_bc;
    D.block(0, cols - 1, nl, 1) = sys.left_border;
    for (int j = 0; j < M; ++j) {
        D.block(nl + j * p * n, j * p * n, p * n, (p + 1) * n) = sys.blocks[j];
        D.block(nl + j * p * n, cols - 1, p * n, 1) = sys.border[j];
    }
    D.block(rows - nr, n * p * M, nr, n) = sys.right_bc;
    D.block(rows - nr, cols - 1, nr, 1) = sys.right_border;
    return D;
}

AbdSystem random_system(int n, int p, int M, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss;
    AbdSystem sys;
    sys.n = n;
    sys.p = p;
    sys.intervals = M;
    const int nl = n / 2, nr = n + 1 - nl;
    sys.left_bc = Eigen::MatrixXd::NullaryExpr(nl, n, [&] { return gauss(rng); });
    sys.right_bc = Eigen::MatrixXd::NullaryExpr(nr, n, [&] { return gauss(rng); });
    sys.left_border = Eigen::VectorXd::NullaryExpr(nl, [&] { return gauss(rng); });
    sys.right_border = Eigen::VectorXd::NullaryExpr(nr, [&] { return gauss(rng); });
    for (int j = 0; j < M; ++j) {
        sys.blocks.push_back(
            Eigen::MatrixXd::NullaryExpr(p * n, (p + 1) * n, [&] { return gauss(rng); }));
        // diagonal boost keeps the random systems comfortably nonsingular
        for (int i = 0; i < p * n; ++i)
            sys.blocks.back()(i, i) += 4.0;
        sys.border.push_back(Eigen::VectorXd::NullaryExpr(p * n, [&] { return gauss(rng); }));
    }
    return sys;
}

} // namespace

TEST_CASE("structured solve matches dense solve") {
    std::mt19937_64 rng(21);
    for (auto [n, p, M] : {std::tuple{4, 3, 5}, {6, 4, 3}, {2, 1, 4}, {8, 2, 1}}) {
        AbdSystem sys = random_system(n, p, M, rng);
        const Eigen::MatrixXd dense = densify(sys);
        std::normal_distribution<double> gauss;
        Eigen::MatrixXd rhs =
            Eigen::MatrixXd::NullaryExpr(dense.rows(), 2, [&] { return gauss(rng); });
        const Eigen::MatrixXd expect = dense.fullPivLu().solve(rhs);
        const Eigen::MatrixXd got = abd_solve(sys, rhs);
        REQUIRE(got.rows() == expect.rows());
        CHECK((got - expect).lpNorm<Eigen::Infinity>() <
              1e-9 * (1.0 + expect.lpNorm<Eigen::Infinity>()));
    }
}

TEST_CASE("residual of the structured solution is small") {
    std::mt19937_64 rng(23);
    AbdSystem sys = random_system(6, 4, 8, rng);
    const Eigen::MatrixXd dense = densify(sys);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd rhs = Eigen::MatrixXd::NullaryExpr(dense.rows(), 1, [&] { return gauss(rng); });
    const Eigen::MatrixXd x = abd_solve(sys, rhs);
    CHECK((dense * x - rhs).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("singular system reported") {
    std::mt19937_64 rng(27);
    AbdSystem sys = random_system(4, 2, 3, rng);
    sys.left_bc.setZero();
    sys.left_border.setZero(); // left BC rows identically zero -> singular
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Ones(sys.row_count(), 1);
    CHECK_THROWS_AS(abd_solve(sys, rhs), SingularSystemError);
}
