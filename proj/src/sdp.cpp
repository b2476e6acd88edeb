#include "dharc/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <stdexcept>

namespace dharc {

int SdpProblem::add_block(int dim, std::string label) {
    if (dim <= 0) throw std::invalid_argument("block dimension must be positive");
    block_dims.push_back(dim);
    block_labels.push_back(std::move(label));
    return static_cast<int>(block_dims.size()) - 1;
}

int SdpProblem::add_scalar(std::string label, bool nonneg) {
    scalar_labels.push_back(std::move(label));
    scalar_nonneg.push_back(nonneg);
    return static_cast<int>(scalar_labels.size()) - 1;
}

std::string solve_status_name(SolveStatus s) {
    switch (s) {
        case SolveStatus::Feasible: return "feasible";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::NumericalFailure: return "numerical_failure";
    }
    return "?";
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Internal form: every variable is a PSD block. User PSD blocks come first;
// each nonnegative scalar adds one 1x1 block, each free scalar two (u = a-b).
struct Internal {
    std::vector<int> dims;
    std::vector<MatrixXd> C;                  // objective per block
    // per block: touching rows, and the dense symmetric coefficient matrix
    std::vector<std::vector<int>> rows_of_block;
    std::vector<std::vector<MatrixXd>> coef_of_block;  // parallel to rows_of_block
    VectorXd b;
    int m = 0;
    int nuser = 0;                            // user PSD block count
    std::vector<int> scal_pos;                // scalar -> first 1x1 block
    std::vector<bool> scal_split;
};

Internal build_internal(const SdpProblem& p, const std::vector<int>& keep_rows) {
    Internal in;
    in.nuser = p.num_blocks();
    in.dims = p.block_dims;
    in.scal_pos.resize(p.num_scalars());
    in.scal_split.resize(p.num_scalars());
    for (int v = 0; v < p.num_scalars(); ++v) {
        in.scal_pos[v] = static_cast<int>(in.dims.size());
        in.scal_split[v] = !p.scalar_nonneg[v];
        in.dims.push_back(1);
        if (in.scal_split[v]) in.dims.push_back(1);
    }
    int nb = static_cast<int>(in.dims.size());

    double obj_scale = 0.0;
    for (const auto& o : p.objective) obj_scale = std::max(obj_scale, std::abs(o.coef));
    const double shrink = 1e-9 * (1.0 + obj_scale);

    in.C.resize(nb);
    for (int bidx = 0; bidx < nb; ++bidx)
        in.C[bidx] = MatrixXd::Zero(in.dims[bidx], in.dims[bidx]);
    for (int bidx = 0; bidx < in.nuser; ++bidx)
        in.C[bidx].diagonal().setConstant(p.trace_weight);
    for (int v = 0; v < p.num_scalars(); ++v) {
        in.C[in.scal_pos[v]](0, 0) += shrink;
        if (in.scal_split[v]) in.C[in.scal_pos[v] + 1](0, 0) += shrink;
    }
    for (const auto& o : p.objective) {
        in.C[in.scal_pos[o.var]](0, 0) += o.coef;
        if (in.scal_split[o.var]) in.C[in.scal_pos[o.var] + 1](0, 0) -= o.coef;
    }

    in.m = static_cast<int>(keep_rows.size());
    in.b.resize(in.m);
    in.rows_of_block.resize(nb);
    in.coef_of_block.resize(nb);
    for (int r = 0; r < in.m; ++r) {
        const auto& row = p.rows[keep_rows[r]];
        double scale = 0.0;
        for (const auto& e : row.mat) scale = std::max(scale, std::abs(e.coef));
        for (const auto& e : row.lin) scale = std::max(scale, std::abs(e.coef));
        if (scale <= 0.0) scale = 1.0;
        in.b(r) = row.rhs / scale;

        std::map<int, MatrixXd> touched;
        for (const auto& e : row.mat) {
            auto [it, fresh] = touched.try_emplace(e.block);
            if (fresh) it->second = MatrixXd::Zero(in.dims[e.block], in.dims[e.block]);
            double c = e.coef / scale;
            if (e.i == e.j) {
                it->second(e.i, e.i) += c;
            } else {
                it->second(e.i, e.j) += 0.5 * c;
                it->second(e.j, e.i) += 0.5 * c;
            }
        }
        for (const auto& e : row.lin) {
            int blk = in.scal_pos[e.var];
            double c = e.coef / scale;
            {
                auto [it, fresh] = touched.try_emplace(blk);
                if (fresh) it->second = MatrixXd::Zero(1, 1);
                it->second(0, 0) += c;
            }
            if (in.scal_split[e.var]) {
                auto [it, fresh] = touched.try_emplace(blk + 1);
                if (fresh) it->second = MatrixXd::Zero(1, 1);
                it->second(0, 0) -= c;
            }
        }
        for (auto& [blk, mat] : touched) {
            in.rows_of_block[blk].push_back(r);
            in.coef_of_block[blk].push_back(std::move(mat));
        }
    }
    return in;
}

double inner(const MatrixXd& a, const MatrixXd& b) {
    return (a.array() * b.array()).sum();
}

// Largest alpha in (0, 1] with X + alpha*D >= 0, via the smallest eigenvalue
// of L^-1 D L^-T where X = L L^T.
double max_step(const MatrixXd& X, const MatrixXd& D) {
    Eigen::LLT<MatrixXd> llt(X);
    if (llt.info() != Eigen::Success) return 0.0;
    MatrixXd L = llt.matrixL();
    MatrixXd W = L.triangularView<Eigen::Lower>().solve(D);
    W = L.triangularView<Eigen::Lower>().solve(W.transpose()).transpose();
    W = 0.5 * (W + W.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(W, Eigen::EigenvaluesOnly);
    double lmin = es.eigenvalues().minCoeff();
    if (lmin >= -1e-14) return 1.0;
    return std::min(1.0, -1.0 / lmin);
}

}  // namespace

SdpSolution sdp_solve(const SdpProblem& p, const SdpOptions& opt) {
    SdpSolution sol;

    // Presolve: empty rows decide feasibility directly; exact duplicate rows
    // collapse (conflicting right-hand sides are an immediate Farkas pair).
    std::vector<int> keep;
    std::map<std::string, std::pair<int, double>> seen;
    for (int i = 0; i < static_cast<int>(p.rows.size()); ++i) {
        const auto& row = p.rows[i];
        if (row.mat.empty() && row.lin.empty()) {
            if (std::abs(row.rhs) > 1e-12) {
                sol.status = SolveStatus::Infeasible;
                sol.detail = "constant row with nonzero right-hand side";
                return sol;
            }
            continue;
        }
        std::string key;
        key.reserve(row.mat.size() * 20 + row.lin.size() * 12);
        char buf[64];
        for (const auto& e : row.mat) {
            std::snprintf(buf, sizeof(buf), "m%d:%d:%d:%.17g;", e.block, e.i, e.j,
                          e.coef);
            key += buf;
        }
        for (const auto& e : row.lin) {
            std::snprintf(buf, sizeof(buf), "s%d:%.17g;", e.var, e.coef);
            key += buf;
        }
        auto it = seen.find(key);
        if (it == seen.end()) {
            seen.emplace(std::move(key), std::make_pair(i, row.rhs));
            keep.push_back(i);
        } else if (std::abs(it->second.second - row.rhs) > 1e-9) {
            sol.status = SolveStatus::Infeasible;
            sol.detail = "duplicate rows with conflicting right-hand sides";
            return sol;
        }
    }

    Internal in = build_internal(p, keep);
    int nb = static_cast<int>(in.dims.size());
    int m = in.m;
    sol.blocks.resize(p.num_blocks());
    sol.scalars.assign(p.num_scalars(), 0.0);

    if (m == 0) {
        sol.status = SolveStatus::Feasible;
        for (int bidx = 0; bidx < p.num_blocks(); ++bidx)
            sol.blocks[bidx] = MatrixXd::Zero(p.block_dims[bidx], p.block_dims[bidx]);
        return sol;
    }

    double bmax = in.b.cwiseAbs().maxCoeff();
    double cmax = 0.0;
    for (const auto& C : in.C) cmax = std::max(cmax, C.cwiseAbs().maxCoeff());

    double eta = 10.0 * (1.0 + bmax);
    std::vector<MatrixXd> X(nb), Z(nb);
    for (int bidx = 0; bidx < nb; ++bidx) {
        X[bidx] = eta * MatrixXd::Identity(in.dims[bidx], in.dims[bidx]);
        Z[bidx] = std::max(1.0, cmax) * MatrixXd::Identity(in.dims[bidx], in.dims[bidx]);
    }
    VectorXd y = VectorXd::Zero(m);

    double total_dim = 0;
    for (int d : in.dims) total_dim += d;

    auto apply_A = [&](const std::vector<MatrixXd>& XX) {
        VectorXd r = VectorXd::Zero(m);
        for (int bidx = 0; bidx < nb; ++bidx)
            for (size_t k = 0; k < in.rows_of_block[bidx].size(); ++k)
                r(in.rows_of_block[bidx][k]) += inner(in.coef_of_block[bidx][k], XX[bidx]);
        return r;
    };
    auto adjoint_block = [&](const VectorXd& v, int bidx) {
        MatrixXd S = MatrixXd::Zero(in.dims[bidx], in.dims[bidx]);
        for (size_t k = 0; k < in.rows_of_block[bidx].size(); ++k)
            S += v(in.rows_of_block[bidx][k]) * in.coef_of_block[bidx][k];
        return S;
    };

    const bool trace = std::getenv("DHARC_SDP_TRACE") != nullptr;

    int stalls = 0;
    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        sol.iterations = iter + 1;

        VectorXd rp = in.b - apply_A(X);
        std::vector<MatrixXd> Rd(nb);
        double rd_norm = 0.0;
        for (int bidx = 0; bidx < nb; ++bidx) {
            Rd[bidx] = in.C[bidx] - adjoint_block(y, bidx) - Z[bidx];
            rd_norm = std::max(rd_norm, Rd[bidx].cwiseAbs().maxCoeff());
        }
        double mu = 0.0;
        for (int bidx = 0; bidx < nb; ++bidx) mu += inner(X[bidx], Z[bidx]);
        mu /= total_dim;

        double rp_norm = rp.cwiseAbs().maxCoeff();
        double pobj = 0.0;
        for (int bidx = 0; bidx < nb; ++bidx) pobj += inner(in.C[bidx], X[bidx]);
        double dobj = in.b.dot(y);

        if (trace)
            std::fprintf(stderr,
                         "sdp iter %3d  rp %.3e  rd %.3e  mu %.3e  pobj %.6e  "
                         "dobj %.6e\n",
                         iter, rp_norm, rd_norm, mu, pobj, dobj);

        if (rp_norm <= opt.eq_tol * (1.0 + bmax) &&
            rd_norm <= opt.dual_tol * (1.0 + cmax) &&
            mu * total_dim <= opt.gap_tol * (1.0 + std::abs(pobj) + std::abs(dobj))) {
            sol.status = SolveStatus::Feasible;
            sol.primal_residual = rp_norm;
            sol.duality_gap = mu * total_dim;
            break;
        }

        // Farkas-type certificate of primal infeasibility: a dual ray y with
        // b'y = 1 and A*(y) <= 0 proves no X >= 0 satisfies AX = b.
        if (dobj > 100.0 * (1.0 + std::abs(pobj))) {
            VectorXd ray = y / dobj;
            double lmax = -1e300;
            for (int bidx = 0; bidx < nb; ++bidx) {
                MatrixXd S = adjoint_block(ray, bidx);
                if (S.rows() == 1) {
                    lmax = std::max(lmax, S(0, 0));
                } else {
                    Eigen::SelfAdjointEigenSolver<MatrixXd> es(S, Eigen::EigenvaluesOnly);
                    lmax = std::max(lmax, es.eigenvalues().maxCoeff());
                }
            }
            if (lmax <= opt.farkas_tol * (1.0 + ray.cwiseAbs().maxCoeff())) {
                sol.status = SolveStatus::Infeasible;
                sol.detail = "dual ray found (certified)";
                return sol;
            }
            if (dobj > 1e12) {
                sol.status = SolveStatus::NumericalFailure;
                sol.detail = "dual objective diverged without a certified ray";
                return sol;
            }
        }

        // Schur complement M(i,j) = sum_b <A_ib, X A_jb Z^-1>.
        std::vector<MatrixXd> Zinv(nb);
        bool chol_ok = true;
        for (int bidx = 0; bidx < nb; ++bidx) {
            Eigen::LLT<MatrixXd> llt(Z[bidx]);
            if (llt.info() != Eigen::Success) {
                chol_ok = false;
                break;
            }
            Zinv[bidx] = llt.solve(MatrixXd::Identity(in.dims[bidx], in.dims[bidx]));
        }
        if (!chol_ok) {
            sol.status = SolveStatus::NumericalFailure;
            sol.detail = "dual block lost positive definiteness";
            return sol;
        }

        MatrixXd M = MatrixXd::Zero(m, m);
        // Cache X*A_jb*Z^-1 per touching row of each block.
        std::vector<std::vector<MatrixXd>> T(nb);
        for (int bidx = 0; bidx < nb; ++bidx) {
            size_t k = in.rows_of_block[bidx].size();
            T[bidx].resize(k);
            for (size_t j = 0; j < k; ++j)
                T[bidx][j] = X[bidx] * in.coef_of_block[bidx][j] * Zinv[bidx];
            for (size_t i = 0; i < k; ++i) {
                int ri = in.rows_of_block[bidx][i];
                for (size_t j = 0; j < k; ++j)
                    M(ri, in.rows_of_block[bidx][j]) += inner(in.coef_of_block[bidx][i], T[bidx][j]);
            }
        }
        Eigen::PartialPivLU<MatrixXd> lu(M);

        auto solve_direction = [&](const std::vector<MatrixXd>& Rc, VectorXd& dy,
                                   std::vector<MatrixXd>& dX,
                                   std::vector<MatrixXd>& dZ) {
            VectorXd rhs = rp;
            for (int bidx = 0; bidx < nb; ++bidx) {
                MatrixXd G = (Rc[bidx] - X[bidx] * Rd[bidx]) * Zinv[bidx];
                for (size_t k = 0; k < in.rows_of_block[bidx].size(); ++k)
                    rhs(in.rows_of_block[bidx][k]) -= inner(in.coef_of_block[bidx][k], G);
            }
            dy = lu.solve(rhs);
            dX.resize(nb);
            dZ.resize(nb);
            for (int bidx = 0; bidx < nb; ++bidx) {
                dZ[bidx] = Rd[bidx] - adjoint_block(dy, bidx);
                MatrixXd DX = (Rc[bidx] - X[bidx] * dZ[bidx]) * Zinv[bidx];
                dX[bidx] = 0.5 * (DX + DX.transpose());
            }
        };

        // Predictor (sigma = 0)
        std::vector<MatrixXd> Rc(nb);
        for (int bidx = 0; bidx < nb; ++bidx) Rc[bidx] = -X[bidx] * Z[bidx];
        VectorXd dy;
        std::vector<MatrixXd> dX, dZ;
        solve_direction(Rc, dy, dX, dZ);

        double ap = 1.0, ad = 1.0;
        for (int bidx = 0; bidx < nb; ++bidx) {
            ap = std::min(ap, max_step(X[bidx], dX[bidx]));
            ad = std::min(ad, max_step(Z[bidx], dZ[bidx]));
        }
        double mu_aff = 0.0;
        for (int bidx = 0; bidx < nb; ++bidx)
            mu_aff += inner(X[bidx] + ap * dX[bidx], Z[bidx] + ad * dZ[bidx]);
        mu_aff = std::max(mu_aff / total_dim, 0.0);
        double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 1e-8, 1.0);

        // Corrector
        for (int bidx = 0; bidx < nb; ++bidx)
            Rc[bidx] = sigma * mu * MatrixXd::Identity(in.dims[bidx], in.dims[bidx]) -
                       X[bidx] * Z[bidx] - dX[bidx] * dZ[bidx];
        solve_direction(Rc, dy, dX, dZ);

        ap = 1.0;
        ad = 1.0;
        for (int bidx = 0; bidx < nb; ++bidx) {
            ap = std::min(ap, max_step(X[bidx], dX[bidx]));
            ad = std::min(ad, max_step(Z[bidx], dZ[bidx]));
        }
        ap = std::min(1.0, opt.step_fraction * ap);
        ad = std::min(1.0, opt.step_fraction * ad);

        if (trace)
            std::fprintf(stderr,
                         "          ap %.3e  ad %.3e  sigma %.3e  |dy| %.3e\n",
                         ap, ad, sigma, dy.cwiseAbs().maxCoeff());

        bool finite = std::isfinite(ap) && std::isfinite(ad);
        for (int bidx = 0; bidx < nb && finite; ++bidx)
            finite = dX[bidx].allFinite() && dZ[bidx].allFinite();
        if (!finite) {
            sol.status = SolveStatus::NumericalFailure;
            sol.detail = "non-finite search direction";
            return sol;
        }

        for (int bidx = 0; bidx < nb; ++bidx) {
            X[bidx] += ap * dX[bidx];
            Z[bidx] += ad * dZ[bidx];
            X[bidx] = 0.5 * (X[bidx] + X[bidx].transpose());
            Z[bidx] = 0.5 * (Z[bidx] + Z[bidx].transpose());
        }
        y += ad * dy;

        if (ap < 1e-6 && ad < 1e-6) {
            if (++stalls >= 4) {
                sol.status = SolveStatus::NumericalFailure;
                sol.detail = "step lengths collapsed";
                return sol;
            }
        } else {
            stalls = 0;
        }
        if (iter + 1 == opt.max_iterations) {
            sol.status = SolveStatus::NumericalFailure;
            sol.detail = "iteration limit reached";
            return sol;
        }
    }

    if (sol.status != SolveStatus::Feasible) return sol;

    for (int bidx = 0; bidx < p.num_blocks(); ++bidx) sol.blocks[bidx] = X[bidx];
    for (int v = 0; v < p.num_scalars(); ++v) {
        double val = X[in.scal_pos[v]](0, 0);
        if (in.scal_split[v]) val -= X[in.scal_pos[v] + 1](0, 0);
        sol.scalars[v] = val;
    }
    return sol;
}

}  // namespace dharc
