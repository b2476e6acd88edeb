#pragma once

// Dense primal-dual interior-point solver for semidefinite feasibility
// problems in standard primal form over a list of PSD blocks plus free
// scalar variables:
//
//   min  trace_weight * sum_b tr(X_b) + <objective, u>
//   s.t. sum_b <A_ib, X_b> + <a_i, u> = b_i      (i = 1..m)
//        X_b >= 0,  u free (or >= 0 per flag)
//
// HKM search direction with a Mehrotra predictor-corrector step. Free
// scalars are split internally into differences of 1x1 cones with a tiny
// shrinkage term so the split stays bounded. Primal infeasibility is
// reported through a Farkas-type dual ray test; stalls surface as
// numerical_failure, never as proven infeasibility.

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace dharc {

struct SdpProblem {
    // PSD matrix variables
    std::vector<int> block_dims;
    std::vector<std::string> block_labels;
    // scalar variables (free unless flagged nonnegative)
    std::vector<std::string> scalar_labels;
    std::vector<bool> scalar_nonneg;

    // Row value convention: each (i, j) pair with i <= j is referenced once
    // and stands for the symmetric entry X[i,j] (= X[j,i]) counted once.
    struct MatEntry {
        int block, i, j;
        double coef;
    };
    struct ScalEntry {
        int var;
        double coef;
    };
    struct Row {
        std::vector<MatEntry> mat;
        std::vector<ScalEntry> lin;
        double rhs = 0.0;
        std::string label;
    };
    std::vector<Row> rows;

    std::vector<ScalEntry> objective;  // linear objective over scalars
    double trace_weight = 1e-6;        // Gram trace regularization

    int add_block(int dim, std::string label);
    int add_scalar(std::string label, bool nonneg = false);
    int num_scalars() const { return static_cast<int>(scalar_labels.size()); }
    int num_blocks() const { return static_cast<int>(block_dims.size()); }
};

enum class SolveStatus { Feasible, Infeasible, NumericalFailure };

std::string solve_status_name(SolveStatus s);

struct SdpSolution {
    SolveStatus status = SolveStatus::NumericalFailure;
    std::vector<Eigen::MatrixXd> blocks;  // one per SdpProblem block
    std::vector<double> scalars;
    int iterations = 0;
    double primal_residual = 0.0;
    double duality_gap = 0.0;
    std::string detail;
};

struct SdpOptions {
    int max_iterations = 100;
    double eq_tol = 1e-9;       // primal equality residual (relative)
    double dual_tol = 1e-8;     // dual residual (relative)
    double gap_tol = 1e-8;      // complementarity mu (relative)
    double farkas_tol = 1e-7;   // lambda_max threshold for the dual ray
    double step_fraction = 0.95;
};

SdpSolution sdp_solve(const SdpProblem& p, const SdpOptions& opt = {});

}  // namespace dharc
