#include "commsynth/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <fmt/format.h>

#include "commsynth/error.hpp"
#include "commsynth/tolerances.hpp"

namespace commsynth {

int LinearProgram::add_variable(double cost, bool fixed_zero) {
    costs_.push_back(cost);
    fixed_.push_back(fixed_zero ? 1 : 0);
    return static_cast<int>(costs_.size()) - 1;
}

int LinearProgram::add_row(std::vector<Entry> entries, RowSense sense, double rhs) {
    rows_.push_back(LpRow{std::move(entries), sense, rhs});
    return static_cast<int>(rows_.size()) - 1;
}

std::size_t LinearProgram::num_nonzeros() const {
    std::size_t nz = 0;
    for (const auto& r : rows_) nz += r.entries.size();
    return nz;
}

double LinearProgram::primal_residual(std::span<const double> x) const {
    double worst = 0.0;
    for (int j = 0; j < num_variables(); ++j) {
        worst = std::max(worst, -x[j]);
        if (fixed_[j]) worst = std::max(worst, std::abs(x[j]));
    }
    for (const auto& r : rows_) {
        double lhs = 0.0;
        for (const auto& e : r.entries) lhs += e.value * x[e.index];
        double v = lhs - r.rhs;
        switch (r.sense) {
            case RowSense::equal: worst = std::max(worst, std::abs(v)); break;
            case RowSense::less_equal: worst = std::max(worst, v); break;
            case RowSense::greater_equal: worst = std::max(worst, -v); break;
        }
    }
    return worst;
}

double LinearProgram::objective(std::span<const double> x) const {
    double v = 0.0;
    for (int j = 0; j < num_variables(); ++j) v += costs_[j] * x[j];
    return v;
}

void LinearProgram::validate() const {
    for (double c : costs_)
        if (!std::isfinite(c)) throw InputError("LP objective has a non-finite coefficient");
    for (const auto& r : rows_) {
        if (!std::isfinite(r.rhs)) throw InputError("LP row has a non-finite right-hand side");
        for (const auto& e : r.entries) {
            if (e.index < 0 || e.index >= num_variables()) throw InputError("LP row references an unknown variable");
            if (!std::isfinite(e.value)) throw InputError("LP row has a non-finite coefficient");
        }
    }
}

const char* to_string(LpStatus status) {
    switch (status) {
        case LpStatus::optimal: return "optimal";
        case LpStatus::infeasible: return "infeasible";
        case LpStatus::unbounded: return "unbounded";
        case LpStatus::iteration_limit: return "iteration_limit";
        case LpStatus::numerical_failure: return "numerical_failure";
    }
    return "unknown";
}

namespace {

enum class ColKind : std::uint8_t { structural, slack, artificial };
enum class RunResult { optimal, unbounded, iteration_limit, singular };

}  // namespace

struct SimplexSolver::Impl {
    const LinearProgram* lp = nullptr;
    SimplexOptions opt;
    int m = 0;
    int n_struct = 0;
    int n_total = 0;

    std::vector<double> b;
    std::vector<double> row_sign;
    std::vector<std::size_t> col_start;
    std::vector<int> row_idx;
    std::vector<double> val;
    std::vector<ColKind> kind;
    std::vector<char> may_enter;
    std::vector<int> slack_of_row;
    std::vector<int> art_of_row;
    double b_scale = 1.0;

    std::vector<double> cost;  // active phase costs, minimization
    std::vector<double> phase2_cost;

    std::vector<int> basis;
    std::vector<int> pos;
    Eigen::MatrixXd Binv;
    Eigen::VectorXd xB;
    Eigen::VectorXd y;
    Eigen::VectorXd cB;
    Eigen::VectorXd d;
    bool feasible = false;
    int since_refactor = 0;
    int iterations = 0;
    std::size_t cursor = 0;
    int scratch_retries = 1;

    explicit Impl(const LinearProgram& program, SimplexOptions options) : lp(&program), opt(options) {
        program.validate();
        m = program.num_rows();
        n_struct = program.num_variables();
        b.resize(m);
        row_sign.resize(m);
        slack_of_row.assign(m, -1);
        art_of_row.assign(m, -1);

        std::vector<std::vector<Entry>> cols(n_struct);
        for (int i = 0; i < m; ++i) {
            const auto& r = program.row(i);
            row_sign[i] = r.rhs < 0.0 ? -1.0 : 1.0;
            b[i] = r.rhs * row_sign[i];
            for (const auto& e : r.entries)
                if (e.value != 0.0) cols[e.index].push_back(Entry{i, e.value * row_sign[i]});
        }
        col_start.push_back(0);
        for (int j = 0; j < n_struct; ++j) {
            std::sort(cols[j].begin(), cols[j].end(), [](const Entry& a, const Entry& c) { return a.index < c.index; });
            // merge duplicate entries
            for (std::size_t k = 0; k < cols[j].size(); ++k) {
                if (k > 0 && cols[j][k].index == row_idx.back() && col_start.back() < row_idx.size()) {
                    val.back() += cols[j][k].value;
                } else {
                    row_idx.push_back(cols[j][k].index);
                    val.push_back(cols[j][k].value);
                }
            }
            col_start.push_back(row_idx.size());
            kind.push_back(ColKind::structural);
            may_enter.push_back(program.fixed_zero(j) ? 0 : 1);
        }
        for (int i = 0; i < m; ++i) {
            const auto& r = program.row(i);
            if (r.sense == RowSense::equal) continue;
            double coef = (r.sense == RowSense::less_equal ? 1.0 : -1.0) * row_sign[i];
            row_idx.push_back(i);
            val.push_back(coef);
            col_start.push_back(row_idx.size());
            kind.push_back(ColKind::slack);
            may_enter.push_back(1);
            slack_of_row[i] = static_cast<int>(kind.size()) - 1;
        }
        for (int i = 0; i < m; ++i) {
            row_idx.push_back(i);
            val.push_back(1.0);
            col_start.push_back(row_idx.size());
            kind.push_back(ColKind::artificial);
            may_enter.push_back(0);
            art_of_row[i] = static_cast<int>(kind.size()) - 1;
        }
        n_total = static_cast<int>(kind.size());
        b_scale = 1.0;
        for (double v : b) b_scale = std::max(b_scale, std::abs(v));
        phase2_cost.assign(n_total, 0.0);
        set_costs(program.costs());
        pos.assign(n_total, -1);
        y.resize(m);
        cB.resize(m);
        d.resize(m);
    }

    void set_costs(std::span<const double> c) {
        const double sgn = lp->sense() == ObjectiveSense::maximize ? -1.0 : 1.0;
        for (int j = 0; j < n_struct; ++j) phase2_cost[j] = sgn * c[j];
    }

    void ftran(int j, Eigen::VectorXd& out) const {
        out.setZero();
        for (std::size_t k = col_start[j]; k < col_start[j + 1]; ++k) out.noalias() += val[k] * Binv.col(row_idx[k]);
    }

    double dot_y(int j) const {
        double s = 0.0;
        for (std::size_t k = col_start[j]; k < col_start[j + 1]; ++k) s += y[row_idx[k]] * val[k];
        return s;
    }

    bool refactor() {
        std::vector<Eigen::Triplet<double>> trip;
        for (int r = 0; r < m; ++r) {
            int j = basis[r];
            for (std::size_t k = col_start[j]; k < col_start[j + 1]; ++k) trip.emplace_back(row_idx[k], r, val[k]);
        }
        Eigen::SparseMatrix<double> B(m, m);
        B.setFromTriplets(trip.begin(), trip.end());
        B.makeCompressed();
        Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
        lu.compute(B);
        if (lu.info() != Eigen::Success) return false;
        Binv = lu.solve(Eigen::MatrixXd::Identity(m, m));
        if (lu.info() != Eigen::Success || !Binv.allFinite()) return false;
        // reject near-singular bases: the inverse would amplify round-off
        if (Binv.cwiseAbs().maxCoeff() > 1e12) return false;
        Eigen::Map<const Eigen::VectorXd> bv(b.data(), m);
        xB = Binv * bv;
        since_refactor = 0;
        return true;
    }

    void set_basis(const std::vector<int>& cols) {
        basis = cols;
        std::fill(pos.begin(), pos.end(), -1);
        for (int r = 0; r < m; ++r) pos[basis[r]] = r;
    }

    void pivot(int q, int r, double theta) {
        xB.noalias() -= theta * d;
        xB[r] = theta;
        Eigen::RowVectorXd rowr = Binv.row(r) / d[r];
        Eigen::VectorXd u = d;
        u[r] -= 1.0;
        Binv.noalias() -= u * rowr;
        pos[basis[r]] = -1;
        basis[r] = q;
        pos[q] = r;
        ++since_refactor;
    }

    RunResult run(bool phase1) {
        int degenerate = 0;
        const std::size_t block = std::max<std::size_t>(256, static_cast<std::size_t>(n_total) / 12);
        while (true) {
            if (iterations >= opt.max_iterations) return RunResult::iteration_limit;
            if (since_refactor >= opt.refactor_interval && !refactor()) return RunResult::singular;
            for (int r = 0; r < m; ++r) cB[r] = cost[basis[r]];
            y.noalias() = Binv.transpose() * cB;

            const bool bland = degenerate > opt.degenerate_limit;
            int q = -1;
            double best = -tol::kLpOptimality;
            if (bland) {
                for (int j = 0; j < n_total; ++j) {
                    if (pos[j] >= 0 || !may_enter[j]) continue;
                    if (cost[j] - dot_y(j) < -tol::kLpOptimality) {
                        q = j;
                        break;
                    }
                }
            } else {
                std::size_t scanned = 0;
                std::size_t j = cursor % static_cast<std::size_t>(std::max(n_total, 1));
                while (scanned < static_cast<std::size_t>(n_total)) {
                    std::size_t end = std::min<std::size_t>(scanned + block, n_total);
                    for (; scanned < end; ++scanned) {
                        if (pos[j] < 0 && may_enter[j]) {
                            double dj = cost[j] - dot_y(static_cast<int>(j));
                            if (dj < best) {
                                best = dj;
                                q = static_cast<int>(j);
                            }
                        }
                        if (++j == static_cast<std::size_t>(n_total)) j = 0;
                    }
                    if (q >= 0) break;
                }
                cursor = j;
            }
            if (q < 0) return RunResult::optimal;

            ftran(q, d);
            int r = -1;
            if (bland) {
                double min_ratio = std::numeric_limits<double>::infinity();
                for (int i = 0; i < m; ++i)
                    if (d[i] > tol::kLpPivot) min_ratio = std::min(min_ratio, std::max(xB[i], 0.0) / d[i]);
                for (int i = 0; i < m; ++i)
                    if (d[i] > tol::kLpPivot && std::max(xB[i], 0.0) / d[i] <= min_ratio + 1e-12 &&
                        (r < 0 || basis[i] < basis[r]))
                        r = i;
            } else {
                double theta_max = std::numeric_limits<double>::infinity();
                for (int i = 0; i < m; ++i)
                    if (d[i] > tol::kLpPivot) theta_max = std::min(theta_max, (xB[i] + tol::kLpFeasibility) / d[i]);
                double big = 0.0;
                for (int i = 0; i < m; ++i)
                    if (d[i] > tol::kLpPivot && xB[i] / d[i] <= theta_max && d[i] > big) {
                        big = d[i];
                        r = i;
                    }
            }
            if (r < 0) return phase1 ? RunResult::singular : RunResult::unbounded;
            double theta = std::max(xB[r] / d[r], 0.0);
            degenerate = theta <= 1e-12 ? degenerate + 1 : 0;
            pivot(q, r, theta);
            ++iterations;
        }
    }

    double artificial_sum() const {
        double s = 0.0;
        for (int r = 0; r < m; ++r)
            if (kind[basis[r]] == ColKind::artificial) s += std::abs(xB[r]);
        return s;
    }

    void drive_out_artificials() {
        for (int r = 0; r < m; ++r) {
            if (kind[basis[r]] != ColKind::artificial) continue;
            Eigen::RowVectorXd rowr = Binv.row(r);
            int best_j = -1;
            double best_a = 1e-9;
            for (int j = 0; j < n_total; ++j) {
                if (pos[j] >= 0 || !may_enter[j]) continue;
                double a = 0.0;
                for (std::size_t k = col_start[j]; k < col_start[j + 1]; ++k) a += rowr[row_idx[k]] * val[k];
                if (std::abs(a) > best_a) {
                    best_a = std::abs(a);
                    best_j = j;
                }
            }
            if (best_j < 0) continue;  // redundant row, artificial stays basic at zero
            ftran(best_j, d);
            pivot(best_j, r, xB[r] / d[r]);
        }
    }

    bool try_hint(const BasisHint& hint) {
        if (hint.columns.empty() || hint.columns.size() != hint.rows.size()) return false;
        std::vector<int> cols(m, -1);
        for (std::size_t k = 0; k < hint.columns.size(); ++k) {
            int j = hint.columns[k], r = hint.rows[k];
            if (j < 0 || j >= n_struct || r < 0 || r >= m || cols[r] >= 0 || !may_enter[j]) return false;
            cols[r] = j;
        }
        for (int r = 0; r < m; ++r)
            if (cols[r] < 0) cols[r] = slack_of_row[r] >= 0 ? slack_of_row[r] : art_of_row[r];
        std::vector<int> sorted = cols;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) return false;
        set_basis(cols);
        if (!refactor()) return false;
        for (int r = 0; r < m; ++r) {
            if (xB[r] < -tol::kLpFeasibility * b_scale) return false;
            if (kind[basis[r]] == ColKind::artificial && std::abs(xB[r]) > tol::kLpFeasibility * b_scale) return false;
        }
        return true;
    }

    LpSolution finish(RunResult rr) {
        LpSolution sol;
        sol.iterations = iterations;
        if (rr == RunResult::unbounded) {
            sol.status = LpStatus::unbounded;
            return sol;
        }
        if (rr == RunResult::iteration_limit) {
            sol.status = LpStatus::iteration_limit;
            return sol;
        }
        if (rr == RunResult::singular) {
            sol.status = LpStatus::numerical_failure;
            feasible = false;
            return sol;
        }
        auto extract = [&] {
            sol.values.assign(n_struct, 0.0);
            for (int r = 0; r < m; ++r)
                if (basis[r] < n_struct) sol.values[basis[r]] = std::max(xB[r], 0.0);
            sol.residual = lp->primal_residual(sol.values);
        };
        extract();
        const double limit = tol::kLpFeasibility * b_scale;
        if (sol.residual > limit) {
            if (refactor()) extract();
            if (sol.residual > limit) {
                sol.status = LpStatus::numerical_failure;
                return sol;
            }
        }
        sol.status = LpStatus::optimal;
        const double sgn = lp->sense() == ObjectiveSense::maximize ? -1.0 : 1.0;
        for (int j = 0; j < n_struct; ++j) sol.objective_value += sgn * phase2_cost[j] * sol.values[j];
        return sol;
    }

    LpSolution phase2() {
        cost = phase2_cost;
        RunResult rr = run(false);
        if (rr == RunResult::optimal && since_refactor > 0 && !refactor()) rr = RunResult::singular;
        if (rr == RunResult::optimal) {
            // a fresh factorization can expose small infeasibilities; polish once
            bool bad = false;
            for (int r = 0; r < m; ++r)
                if (xB[r] < -tol::kLpFeasibility * b_scale) bad = true;
            if (bad) {
                feasible = false;
                if (scratch_retries-- > 0) return solve_from_scratch();
                return finish(RunResult::singular);
            }
        }
        return finish(rr);
    }

    LpSolution solve_from_scratch() {
        std::vector<int> cols(m);
        for (int r = 0; r < m; ++r) {
            int s = slack_of_row[r];
            bool plus = s >= 0 && val[col_start[s]] > 0.0;
            cols[r] = plus ? s : art_of_row[r];
        }
        set_basis(cols);
        if (!refactor()) return finish(RunResult::singular);
        cost.assign(n_total, 0.0);
        for (int j = 0; j < n_total; ++j)
            if (kind[j] == ColKind::artificial) cost[j] = 1.0;
        RunResult rr = run(true);
        if (rr == RunResult::iteration_limit) return finish(rr);
        if (rr != RunResult::optimal || (since_refactor > 0 && !refactor())) return finish(RunResult::singular);
        if (artificial_sum() > tol::kLpFeasibility * b_scale) {
            LpSolution sol;
            sol.status = LpStatus::infeasible;
            sol.iterations = iterations;
            return sol;
        }
        drive_out_artificials();
        if (!refactor()) return finish(RunResult::singular);
        feasible = true;
        return phase2();
    }
};

SimplexSolver::SimplexSolver(const LinearProgram& lp, SimplexOptions options)
    : impl_(std::make_unique<Impl>(lp, options)) {}
SimplexSolver::~SimplexSolver() = default;
SimplexSolver::SimplexSolver(SimplexSolver&&) noexcept = default;
SimplexSolver& SimplexSolver::operator=(SimplexSolver&&) noexcept = default;

LpSolution SimplexSolver::solve(const BasisHint& hint) {
    auto& s = *impl_;
    s.iterations = 0;
    s.scratch_retries = 1;
    s.set_costs(s.lp->costs());
    if (s.m == 0) {
        LpSolution sol;
        sol.values.assign(s.n_struct, 0.0);
        for (int j = 0; j < s.n_struct; ++j)
            if (s.may_enter[j] && s.phase2_cost[j] < 0.0) {
                sol.status = LpStatus::unbounded;
                return sol;
            }
        sol.status = LpStatus::optimal;
        return sol;
    }
    if (s.try_hint(hint)) {
        s.feasible = true;
        return s.phase2();
    }
    return s.solve_from_scratch();
}

LpSolution SimplexSolver::reoptimize(std::span<const double> costs) {
    auto& s = *impl_;
    if (static_cast<int>(costs.size()) != s.n_struct) throw InputError("cost vector has the wrong length");
    s.iterations = 0;
    s.scratch_retries = 1;
    s.set_costs(costs);
    if (!s.feasible || s.m == 0) {
        // solve() resets costs from the program, so go through the scratch path directly
        if (s.m == 0) {
            LpSolution sol;
            sol.values.assign(s.n_struct, 0.0);
            sol.status = LpStatus::optimal;
            return sol;
        }
        return s.solve_from_scratch();
    }
    return s.phase2();
}

bool SimplexSolver::has_feasible_basis() const { return impl_->feasible; }

LpSolution solve_lp(const LinearProgram& lp, const SimplexOptions& options) {
    SimplexSolver solver(lp, options);
    return solver.solve();
}

void write_mps(const LinearProgram& lp, std::ostream& out, std::string_view name) {
    const bool negate = lp.sense() == ObjectiveSense::maximize;
    auto var = [](int j) { return fmt::format("X{:07d}", j + 1); };
    auto row = [](int i) { return fmt::format("R{:07d}", i + 1); };
    auto num = [](double v) { return fmt::format("{:<12.12g}", v); };
    out << fmt::format("{:<14}{}\n", "NAME", name);
    if (negate) out << "* objective negated: the program maximizes\n";
    out << "ROWS\n N  COST\n";
    for (int i = 0; i < lp.num_rows(); ++i) {
        char t = lp.row(i).sense == RowSense::equal ? 'E' : lp.row(i).sense == RowSense::less_equal ? 'L' : 'G';
        out << ' ' << t << "  " << row(i) << '\n';
    }
    std::vector<std::vector<Entry>> cols(lp.num_variables());
    for (int i = 0; i < lp.num_rows(); ++i)
        for (const auto& e : lp.row(i).entries) cols[e.index].push_back(Entry{i, e.value});
    out << "COLUMNS\n";
    for (int j = 0; j < lp.num_variables(); ++j) {
        double c = negate ? -lp.cost(j) : lp.cost(j);
        out << fmt::format("    {:<8}  {:<8}  {}\n", var(j), "COST", num(c));
        for (const auto& e : cols[j]) out << fmt::format("    {:<8}  {:<8}  {}\n", var(j), row(e.index), num(e.value));
    }
    out << "RHS\n";
    for (int i = 0; i < lp.num_rows(); ++i)
        if (lp.row(i).rhs != 0.0) out << fmt::format("    {:<8}  {:<8}  {}\n", "RHS", row(i), num(lp.row(i).rhs));
    out << "BOUNDS\n";
    for (int j = 0; j < lp.num_variables(); ++j)
        if (lp.fixed_zero(j)) out << fmt::format(" FX {:<8}  {:<8}  {}\n", "BND", var(j), num(0.0));
    out << "ENDATA\n";
}

}  // namespace commsynth
