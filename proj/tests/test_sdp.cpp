#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "dharc/sdp.hpp"

using namespace dharc;

namespace {

// max_i |<A_i, X> + <a_i, u> - b_i|
double primal_violation(const SdpProblem& p, const SdpSolution& s) {
    double worst = 0.0;
    for (const auto& row : p.rows) {
        double v = -row.rhs;
        for (const auto& e : row.mat) {
            v += e.coef * s.blocks[e.block](e.i, e.j);
        }
        for (const auto& e : row.lin) v += e.coef * s.scalars[e.var];
        worst = std::max(worst, std::fabs(v));
    }
    return worst;
}

}  // namespace

TEST_CASE("gram of x^2+1 over basis (1,x) is the identity", "[sdp]") {
    SdpProblem p;
    int b = p.add_block(2, "G");
    p.rows.push_back({{{b, 0, 0, 1.0}}, {}, 1.0, "c0"});
    p.rows.push_back({{{b, 0, 1, 2.0}}, {}, 0.0, "c1"});
    p.rows.push_back({{{b, 1, 1, 1.0}}, {}, 1.0, "c2"});
    auto s = sdp_solve(p);
    REQUIRE(s.status == SolveStatus::Feasible);
    CHECK(std::fabs(s.blocks[0](0, 0) - 1.0) < 1e-6);
    CHECK(std::fabs(s.blocks[0](0, 1)) < 1e-6);
    CHECK(std::fabs(s.blocks[0](1, 0)) < 1e-6);
    CHECK(std::fabs(s.blocks[0](1, 1) - 1.0) < 1e-6);
    CHECK(primal_violation(p, s) < 1e-7);
}

TEST_CASE("odd polynomial has no gram representation", "[sdp]") {
    // x = [1 x] G [1 x]' forces G00 = 0, G11 = 0, 2 G01 = 1: not PSD
    SdpProblem p;
    int b = p.add_block(2, "G");
    p.rows.push_back({{{b, 0, 0, 1.0}}, {}, 0.0, "c0"});
    p.rows.push_back({{{b, 0, 1, 2.0}}, {}, 1.0, "c1"});
    p.rows.push_back({{{b, 1, 1, 1.0}}, {}, 0.0, "c2"});
    auto s = sdp_solve(p);
    REQUIRE(s.status == SolveStatus::Infeasible);
}

TEST_CASE("negative scalar block entry is infeasible", "[sdp]") {
    SdpProblem p;
    int b = p.add_block(1, "X");
    p.rows.push_back({{{b, 0, 0, 1.0}}, {}, -1.0, "neg"});
    auto s = sdp_solve(p);
    REQUIRE(s.status == SolveStatus::Infeasible);
}

TEST_CASE("negative trace is infeasible", "[sdp]") {
    SdpProblem p;
    int b = p.add_block(3, "X");
    SdpProblem::Row row;
    for (int i = 0; i < 3; ++i) row.mat.push_back({b, i, i, 1.0});
    row.rhs = -1.0;
    row.label = "tr";
    p.rows.push_back(row);
    auto s = sdp_solve(p);
    REQUIRE(s.status == SolveStatus::Infeasible);
}

TEST_CASE("multiplier identity x = s * x on the half line", "[sdp]") {
    // x = sigma0(x) + s * x with sigma0 = [1 x] G [1 x]', s a 1x1 gram.
    // Matching coefficients: G00 = 0, 2 G01 + s = 1, G11 = 0, so s = 1.
    SdpProblem p;
    int g = p.add_block(2, "G");
    int m = p.add_block(1, "s");
    p.rows.push_back({{{g, 0, 0, 1.0}}, {}, 0.0, "c0"});
    p.rows.push_back({{{g, 0, 1, 2.0}, {m, 0, 0, 1.0}}, {}, 1.0, "c1"});
    p.rows.push_back({{{g, 1, 1, 1.0}}, {}, 0.0, "c2"});
    auto s = sdp_solve(p);
    REQUIRE(s.status == SolveStatus::Feasible);
    CHECK(std::fabs(s.blocks[m](0, 0) - 1.0) < 1e-4);
    CHECK(std::fabs(s.blocks[g](0, 0)) < 1e-5);
    CHECK(primal_violation(p, s) < 1e-6);
}

TEST_CASE("free scalar equality rows", "[sdp]") {
    SdpProblem p;
    int u = p.add_scalar("u");
    int v = p.add_scalar("v");
    p.rows.push_back({{}, {{u, 1.0}}, 5.0, "r0"});
    p.rows.push_back({{}, {{v, 1.0}}, -5.0, "r1"});
    auto s = sdp_solve(p);
    REQUIRE(s.status == SolveStatus::Feasible);
    CHECK(std::fabs(s.scalars[u] - 5.0) < 1e-6);
    CHECK(std::fabs(s.scalars[v] + 5.0) < 1e-6);
}

TEST_CASE("linear objective over nonnegative scalars", "[sdp]") {
    // min u subject to u + v = 3, u, v >= 0: optimum u = 0, v = 3
    SdpProblem p;
    int u = p.add_scalar("u", true);
    int v = p.add_scalar("v", true);
    p.rows.push_back({{}, {{u, 1.0}, {v, 1.0}}, 3.0, "sum"});
    p.objective.push_back({u, 1.0});
    auto s = sdp_solve(p);
    REQUIRE(s.status == SolveStatus::Feasible);
    CHECK(std::fabs(s.scalars[u]) < 1e-5);
    CHECK(std::fabs(s.scalars[v] - 3.0) < 1e-5);
}

TEST_CASE("objective minimized against a slack bound", "[sdp]") {
    // min u subject to u - w = 3, w >= 0: optimum u = 3
    SdpProblem p;
    int u = p.add_scalar("u");
    int w = p.add_scalar("w", true);
    p.rows.push_back({{}, {{u, 1.0}, {w, -1.0}}, 3.0, "bound"});
    p.objective.push_back({u, 1.0});
    auto s = sdp_solve(p);
    REQUIRE(s.status == SolveStatus::Feasible);
    CHECK(std::fabs(s.scalars[u] - 3.0) < 1e-4);
}

TEST_CASE("random feasible problems stay feasible", "[sdp]") {
    std::mt19937 rng(7);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        SdpProblem p;
        int b1 = p.add_block(3, "B1");
        int b2 = p.add_block(2, "B2");
        int u = p.add_scalar("u");
        // planted interior point
        Eigen::MatrixXd R1 = Eigen::MatrixXd::NullaryExpr(3, 3, [&]() { return nd(rng); });
        Eigen::MatrixXd R2 = Eigen::MatrixXd::NullaryExpr(2, 2, [&]() { return nd(rng); });
        Eigen::MatrixXd X1 = R1 * R1.transpose() + Eigen::MatrixXd::Identity(3, 3);
        Eigen::MatrixXd X2 = R2 * R2.transpose() + Eigen::MatrixXd::Identity(2, 2);
        double u0 = nd(rng);
        for (int r = 0; r < 8; ++r) {
            SdpProblem::Row row;
            double rhs = 0.0;
            for (int i = 0; i < 3; ++i) {
                for (int j = i; j < 3; ++j) {
                    double c = nd(rng);
                    if (std::fabs(c) < 0.3) continue;
                    row.mat.push_back({b1, i, j, c});
                    rhs += c * X1(i, j);
                }
            }
            for (int i = 0; i < 2; ++i) {
                for (int j = i; j < 2; ++j) {
                    double c = nd(rng);
                    if (std::fabs(c) < 0.3) continue;
                    row.mat.push_back({b2, i, j, c});
                    rhs += c * X2(i, j);
                }
            }
            double cu = nd(rng);
            row.lin.push_back({u, cu});
            rhs += cu * u0;
            row.rhs = rhs;
            row.label = "r" + std::to_string(r);
            p.rows.push_back(row);
        }
        auto s = sdp_solve(p);
        INFO("trial " << trial << ": " << s.detail);
        REQUIRE(s.status == SolveStatus::Feasible);
        double bmax = 0.0;
        for (const auto& row : p.rows) bmax = std::max(bmax, std::fabs(row.rhs));
        CHECK(primal_violation(p, s) < 1e-6 * (1.0 + bmax));
        // returned blocks must be (numerically) PSD
        for (const auto& X : s.blocks) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X);
            CHECK(es.eigenvalues().minCoeff() > -1e-8);
        }
    }
}

TEST_CASE("duplicate and empty row presolve", "[sdp]") {
    SECTION("exact duplicate rows collapse") {
        SdpProblem p;
        int b = p.add_block(1, "X");
        p.rows.push_back({{{b, 0, 0, 1.0}}, {}, 2.0, "a"});
        p.rows.push_back({{{b, 0, 0, 1.0}}, {}, 2.0, "b"});
        auto s = sdp_solve(p);
        REQUIRE(s.status == SolveStatus::Feasible);
        CHECK(std::fabs(s.blocks[0](0, 0) - 2.0) < 1e-6);
    }
    SECTION("duplicate rows with conflicting rhs are infeasible") {
        SdpProblem p;
        int b = p.add_block(1, "X");
        p.rows.push_back({{{b, 0, 0, 1.0}}, {}, 2.0, "a"});
        p.rows.push_back({{{b, 0, 0, 1.0}}, {}, 3.0, "b"});
        auto s = sdp_solve(p);
        REQUIRE(s.status == SolveStatus::Infeasible);
    }
    SECTION("empty row with nonzero rhs is infeasible") {
        SdpProblem p;
        p.add_block(1, "X");
        p.rows.push_back({{}, {}, 1.0, "ghost"});
        auto s = sdp_solve(p);
        REQUIRE(s.status == SolveStatus::Infeasible);
    }
    SECTION("empty row with zero rhs is dropped") {
        SdpProblem p;
        int b = p.add_block(1, "X");
        p.rows.push_back({{}, {}, 0.0, "ghost"});
        p.rows.push_back({{{b, 0, 0, 1.0}}, {}, 1.0, "a"});
        auto s = sdp_solve(p);
        REQUIRE(s.status == SolveStatus::Feasible);
    }
}

TEST_CASE("solver is deterministic", "[sdp]") {
    auto build = []() {
        SdpProblem p;
        int b = p.add_block(2, "G");
        int u = p.add_scalar("u");
        p.rows.push_back({{{b, 0, 0, 1.0}}, {{u, 0.5}}, 1.0, "c0"});
        p.rows.push_back({{{b, 0, 1, 2.0}}, {{u, -1.0}}, 0.0, "c1"});
        p.rows.push_back({{{b, 1, 1, 1.0}}, {}, 2.0, "c2"});
        return p;
    };
    auto s1 = sdp_solve(build());
    auto s2 = sdp_solve(build());
    REQUIRE(s1.status == SolveStatus::Feasible);
    REQUIRE(s1.status == s2.status);
    REQUIRE(s1.iterations == s2.iterations);
    CHECK(s1.scalars == s2.scalars);
    for (size_t i = 0; i < s1.blocks.size(); ++i)
        CHECK((s1.blocks[i] - s2.blocks[i]).cwiseAbs().maxCoeff() == 0.0);
}
