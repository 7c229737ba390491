#pragma once

#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace commsynth {

enum class RowSense { equal, less_equal, greater_equal };
enum class ObjectiveSense { minimize, maximize };

struct Entry {
    int index = 0;
    double value = 0.0;
};

struct LpRow {
    std::vector<Entry> entries;
    RowSense sense = RowSense::equal;
    double rhs = 0.0;
};

// All variables are >= 0; a variable may additionally be fixed to 0.
class LinearProgram {
public:
    int add_variable(double cost = 0.0, bool fixed_zero = false);
    int add_row(std::vector<Entry> entries, RowSense sense, double rhs);
    void set_sense(ObjectiveSense sense) { sense_ = sense; }
    void set_cost(int var, double cost) { costs_[var] = cost; }
    void fix_zero(int var) { fixed_[var] = 1; }

    ObjectiveSense sense() const { return sense_; }
    int num_variables() const { return static_cast<int>(costs_.size()); }
    int num_rows() const { return static_cast<int>(rows_.size()); }
    double cost(int var) const { return costs_[var]; }
    const std::vector<double>& costs() const { return costs_; }
    bool fixed_zero(int var) const { return fixed_[var] != 0; }
    const LpRow& row(int i) const { return rows_[i]; }
    std::size_t num_nonzeros() const;

    // max violation of rows and bounds at x
    double primal_residual(std::span<const double> x) const;
    double objective(std::span<const double> x) const;
    void validate() const;

private:
    ObjectiveSense sense_ = ObjectiveSense::minimize;
    std::vector<double> costs_;
    std::vector<char> fixed_;
    std::vector<LpRow> rows_;
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit, numerical_failure };
const char* to_string(LpStatus status);

struct LpSolution {
    LpStatus status = LpStatus::numerical_failure;
    std::vector<double> values;
    double objective_value = 0.0;
    int iterations = 0;
    double residual = 0.0;
};

struct SimplexOptions {
    int max_iterations = 500000;
    int refactor_interval = 80;
    int degenerate_limit = 300;  // consecutive degenerate pivots before Bland's rule
};

// Revised simplex with an explicit dense basis inverse and product-form updates.
// The solver keeps its basis between calls so that changing the objective and
// re-optimizing starts from the previous optimal vertex.
class SimplexSolver {
public:
    explicit SimplexSolver(const LinearProgram& lp, SimplexOptions options = {});
    ~SimplexSolver();
    SimplexSolver(SimplexSolver&&) noexcept;
    SimplexSolver& operator=(SimplexSolver&&) noexcept;

    // The hint pairs structural columns with the rows they should cover; remaining rows take
    // their slack. Phase 1 runs only if the hinted basis is singular or infeasible.
    struct BasisHint {
        std::vector<int> columns;
        std::vector<int> rows;
    };
    LpSolution solve(const BasisHint& hint = {});
    // replaces the objective (in the program's own sense) and re-optimizes from the current basis
    LpSolution reoptimize(std::span<const double> costs);
    bool has_feasible_basis() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

LpSolution solve_lp(const LinearProgram& lp, const SimplexOptions& options = {});

void write_mps(const LinearProgram& lp, std::ostream& out, std::string_view name);

}  // namespace commsynth
