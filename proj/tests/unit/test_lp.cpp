#include <functional>
#include <random>
#include <sstream>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <commsynth/lp.hpp>

using namespace commsynth;

namespace {

// Best vertex by enumerating every choice of n tight constraints among rows and bounds.
double vertex_enumeration_optimum(const LinearProgram& lp, bool& feasible) {
    const int n = lp.num_variables(), m = lp.num_rows();
    const int total = m + n;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(total, n);
    Eigen::VectorXd b(total);
    for (int i = 0; i < m; ++i) {
        for (const auto& e : lp.row(i).entries) A(i, e.index) += e.value;
        b[i] = lp.row(i).rhs;
    }
    for (int j = 0; j < n; ++j) {
        A(m + j, j) = 1.0;
        b[m + j] = 0.0;
    }
    feasible = false;
    double best = lp.sense() == ObjectiveSense::maximize ? -1e300 : 1e300;
    std::vector<int> pick(n);
    std::function<void(int, int)> rec = [&](int start, int depth) {
        if (depth == n) {
            Eigen::MatrixXd M(n, n);
            Eigen::VectorXd r(n);
            for (int k = 0; k < n; ++k) {
                M.row(k) = A.row(pick[k]);
                r[k] = b[pick[k]];
            }
            Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
            if (lu.rank() < n) return;
            Eigen::VectorXd x = lu.solve(r);
            std::vector<double> xv(x.data(), x.data() + n);
            if (lp.primal_residual(xv) > 1e-9) return;
            for (int i = 0; i < m; ++i)
                if (lp.row(i).sense == RowSense::equal) {
                    double s = 0.0;
                    for (const auto& e : lp.row(i).entries) s += e.value * xv[e.index];
                    if (std::abs(s - lp.row(i).rhs) > 1e-9) return;
                }
            feasible = true;
            double obj = lp.objective(xv);
            best = lp.sense() == ObjectiveSense::maximize ? std::max(best, obj) : std::min(best, obj);
            return;
        }
        for (int k = start; k < total; ++k) {
            pick[depth] = k;
            rec(k + 1, depth + 1);
        }
    };
    rec(0, 0);
    return best;
}

}  // namespace

TEST(Simplex, SmallKnownMaximum) {
    LinearProgram lp;
    lp.set_sense(ObjectiveSense::maximize);
    int x = lp.add_variable(3.0), y = lp.add_variable(2.0);
    lp.add_row({{x, 1}, {y, 1}}, RowSense::less_equal, 4);
    lp.add_row({{x, 1}, {y, 3}}, RowSense::less_equal, 6);
    lp.add_row({{x, 1}}, RowSense::less_equal, 3);
    auto sol = solve_lp(lp);
    ASSERT_EQ(sol.status, LpStatus::optimal);
    EXPECT_NEAR(sol.objective_value, 11.0, 1e-9);
    EXPECT_NEAR(sol.values[x], 3.0, 1e-9);
    EXPECT_NEAR(sol.values[y], 1.0, 1e-9);
}

TEST(Simplex, DetectsInfeasible) {
    LinearProgram lp;
    int x = lp.add_variable(1.0);
    lp.add_row({{x, 1}}, RowSense::greater_equal, 2);
    lp.add_row({{x, 1}}, RowSense::less_equal, 1);
    EXPECT_EQ(solve_lp(lp).status, LpStatus::infeasible);
}

TEST(Simplex, DetectsUnbounded) {
    LinearProgram lp;
    lp.set_sense(ObjectiveSense::maximize);
    int x = lp.add_variable(1.0), y = lp.add_variable(0.0);
    lp.add_row({{x, 1}, {y, -1}}, RowSense::less_equal, 1);
    EXPECT_EQ(solve_lp(lp).status, LpStatus::unbounded);
}

TEST(Simplex, NegativeRhsEquality) {
    LinearProgram lp;
    int x = lp.add_variable(1.0), y = lp.add_variable(2.0);
    lp.add_row({{x, -1}, {y, -1}}, RowSense::equal, -3);
    auto sol = solve_lp(lp);
    ASSERT_EQ(sol.status, LpStatus::optimal);
    EXPECT_NEAR(sol.objective_value, 3.0, 1e-9);
}

TEST(Simplex, FixedZeroColumnStaysOut) {
    LinearProgram lp;
    lp.set_sense(ObjectiveSense::maximize);
    int x = lp.add_variable(5.0, true), y = lp.add_variable(1.0);
    lp.add_row({{x, 1}, {y, 1}}, RowSense::less_equal, 2);
    auto sol = solve_lp(lp);
    ASSERT_EQ(sol.status, LpStatus::optimal);
    EXPECT_EQ(sol.values[x], 0.0);
    EXPECT_NEAR(sol.objective_value, 2.0, 1e-12);
}

TEST(Simplex, RandomProgramsMatchVertexEnumeration) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int checked = 0;
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 2 + trial % 3, m = 1 + trial % 3;
        LinearProgram lp;
        lp.set_sense(trial % 2 ? ObjectiveSense::maximize : ObjectiveSense::minimize);
        std::vector<Entry> box;
        for (int j = 0; j < n; ++j) {
            lp.add_variable(u(rng));
            box.push_back({j, 1.0});
        }
        lp.add_row(box, RowSense::less_equal, 5.0);
        for (int i = 0; i < m; ++i) {
            std::vector<Entry> row;
            for (int j = 0; j < n; ++j) row.push_back({j, u(rng)});
            auto sense = static_cast<RowSense>(i % 3);
            lp.add_row(row, sense, u(rng));
        }
        bool feasible = false;
        double expect = vertex_enumeration_optimum(lp, feasible);
        auto sol = solve_lp(lp);
        if (!feasible) {
            EXPECT_EQ(sol.status, LpStatus::infeasible) << "trial " << trial;
            continue;
        }
        ASSERT_EQ(sol.status, LpStatus::optimal) << "trial " << trial;
        EXPECT_NEAR(sol.objective_value, expect, 1e-7 * std::max(1.0, std::abs(expect))) << "trial " << trial;
        EXPECT_LE(sol.residual, 1e-8);
        ++checked;
    }
    EXPECT_GT(checked, 20);
}

TEST(Simplex, ReoptimizeMatchesFreshSolve) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    LinearProgram lp;
    const int n = 6;
    std::vector<Entry> all;
    for (int j = 0; j < n; ++j) {
        lp.add_variable(u(rng));
        all.push_back({j, 1.0});
    }
    lp.add_row(all, RowSense::equal, 1.0);
    lp.add_row({{0, 1}, {1, 1}, {2, -1}}, RowSense::greater_equal, 0.1);
    SimplexSolver solver(lp);
    ASSERT_EQ(solver.solve().status, LpStatus::optimal);
    for (int k = 0; k < 5; ++k) {
        std::vector<double> c(n);
        for (auto& v : c) v = u(rng) - 0.5;
        auto warm = solver.reoptimize(c);
        LinearProgram fresh = lp;
        for (int j = 0; j < n; ++j) fresh.set_cost(j, c[j]);
        auto cold = solve_lp(fresh);
        ASSERT_EQ(warm.status, LpStatus::optimal);
        ASSERT_EQ(cold.status, LpStatus::optimal);
        EXPECT_NEAR(warm.objective_value, cold.objective_value, 1e-10);
    }
}

TEST(Simplex, MpsExportHasSections) {
    LinearProgram lp;
    int x = lp.add_variable(1.0, true);
    lp.add_row({{x, 2.0}}, RowSense::greater_equal, 1.0);
    std::ostringstream out;
    write_mps(lp, out, "tiny");
    auto s = out.str();
    for (const char* sec : {"NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"})
        EXPECT_NE(s.find(sec), std::string::npos) << sec;
    EXPECT_NE(s.find(" FX "), std::string::npos);
}
