#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <stdexcept>

#include "dharc/reachavoid.hpp"
#include "dharc/sim.hpp"

using namespace dharc;

namespace {

const std::vector<std::string> kXY = {"x1", "x2"};
const std::vector<std::string> kXYD = {"x1", "x2", "x1_d", "x2_d"};

VectorField delayed_oscillator(double tau) {
    VectorField vf;
    vf.n = 2;
    vf.current_names = {"x1", "x2"};
    vf.delayed_names = {"x1_d", "x2_d"};
    vf.components.entries = {
        Polynomial::parse("0.5*x2 + 0.5*x2_d", kXYD),
        Polynomial::parse("-0.5*x1 - 0.5*x1_d - 1.5*x2", kXYD)};
    vf.delay = tau;
    return vf;
}

SemialgebraicSet disk(double radius_sq) {
    SemialgebraicSet s = SemialgebraicSet::full_space(2);
    Polynomial p = Polynomial::parse("x1^2 + x2^2", kXY);
    p.add_term(Exponents(2, 0), -radius_sq);
    s.constraints.push_back({p, Rel::LE});
    return s;
}

// shared synthesis run: unit-disk safe set, tenth-disk target, tau = 0.1
const RaResult& disk_result() {
    static RaResult r = [] {
        RaQuery q;
        q.vf = delayed_oscillator(0.1);
        q.safe = disk(1.0);
        q.target = disk(0.1);
        return synthesize_rabf(q);
    }();
    return r;
}

// trapezoid evaluation of the functional at knot i of a simulation
double functional_at(const RabfCertificate& c, const DdeStepper& st, int i) {
    int k = st.delay_steps();
    double sum = 0.0;
    for (int j = i - k; j <= i; ++j) {
        double w = (j == i - k || j == i) ? 0.5 : 1.0;
        sum += w * c.h1.eval(st.state_of(j));
    }
    return c.h0.eval(st.state_of(i)) + sum * st.dt();
}

std::vector<std::vector<double>> member_sample(const RabfCertificate& cert,
                                               size_t want) {
    std::vector<std::vector<double>> all;
    auto bb = bounding_box(cert.safe);
    REQUIRE(bb.has_value());
    for_each_grid_point(*bb, 41, [&](const std::vector<double>& p) {
        if (membership_constant(cert, p)) all.push_back(p);
    });
    REQUIRE(!all.empty());
    std::vector<std::vector<double>> picked;
    size_t stride = std::max<size_t>(1, all.size() / want);
    for (size_t i = 0; i < all.size() && picked.size() < want; i += stride)
        picked.push_back(all[i]);
    return picked;
}

}  // namespace

TEST_CASE("synthesis succeeds on the delayed oscillator", "[reachavoid]") {
    const RaResult& r = disk_result();
    INFO(r.detail);
    REQUIRE(r.status == RaStatus::Valid);
    REQUIRE(r.cert.has_value());
    const RabfCertificate& c = *r.cert;
    CHECK(c.tau == Catch::Approx(0.1));
    CHECK(c.margin > 0.0);
    REQUIRE(c.c_bound.size() == 2);
    CHECK(c.c_bound[0] > 0.0);
    CHECK(c.c_bound[1] > 0.0);
    CHECK(r.used_degrees.h <= 6);
    REQUIRE(r.member.has_value());
    CHECK(membership_constant(c, *r.member));
    // every stored witness carries a PSD Gram matrix and a small residual
    REQUIRE(!c.sos_witnesses.empty());
    REQUIRE(c.witness_labels.size() == c.sos_witnesses.size());
    for (const auto& w : c.sos_witnesses) {
        CHECK(w.residual <= 1e-6 * std::max(1.0, w.target.max_abs_coefficient()));
        for (const auto& g : w.grams) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
            CHECK(es.eigenvalues().minCoeff() >= -1e-7);
        }
    }
}

TEST_CASE("field magnitude bound covers sampled argument pairs", "[reachavoid]") {
    const RaResult& r = disk_result();
    REQUIRE(r.status == RaStatus::Valid);
    const RabfCertificate& c = *r.cert;
    VectorField vf = delayed_oscillator(0.1);

    auto bb = bounding_box(c.domain);
    REQUIRE(bb.has_value());
    Box doubled;
    doubled.lo = bb->lo;
    doubled.hi = bb->hi;
    doubled.lo.insert(doubled.lo.end(), bb->lo.begin(), bb->lo.end());
    doubled.hi.insert(doubled.hi.end(), bb->hi.begin(), bb->hi.end());

    int checked = 0;
    for (const auto& pt : halton_points(doubled, 40000)) {
        std::vector<double> x(pt.begin(), pt.begin() + 2);
        std::vector<double> y(pt.begin() + 2, pt.end());
        if (!c.domain.contains(x, 1e-9) || !c.domain.contains(y, 1e-9)) continue;
        ++checked;
        auto fv = vf.eval(x, y);
        for (size_t k = 0; k < fv.size(); ++k)
            REQUIRE(std::fabs(fv[k]) <= c.c_bound[k] + 1e-6);
        if (checked >= 10000) break;
    }
    CHECK(checked >= 10000);
}

TEST_CASE("member constant histories reach the target inside the safe set",
          "[reachavoid]") {
    const RaResult& r = disk_result();
    REQUIRE(r.status == RaStatus::Valid);
    const RabfCertificate& c = *r.cert;
    VectorField vf = delayed_oscillator(0.1);
    SemialgebraicSet safe = disk(1.0), target = disk(0.1);

    auto members = member_sample(c, 15);
    for (const auto& p : members) {
        DdeStepper st(vf, constant_history(p), 0.1 / 64);
        int max_steps = static_cast<int>(std::ceil(50.0 / st.dt()));
        bool hit = target.contains(st.current(), 1e-9);
        int steps = 0;
        while (!hit && steps < max_steps) {
            REQUIRE(st.step());
            ++steps;
            REQUIRE(safe.contains(st.current(), 1e-7));
            hit = target.contains(st.current(), 1e-9);
        }
        INFO("start " << p[0] << ", " << p[1]);
        REQUIRE(hit);

        // the functional decreases along the way (up to quadrature noise)
        int k = st.delay_steps();
        int last = st.knots() - 1;
        if (last > k) {
            double H0 = functional_at(c, st, k);
            CHECK(H0 < 0.0);
            double tol = 1e-3 * std::fabs(H0);
            double prev = H0;
            for (int i = k + 1; i <= last; ++i) {
                double Hi = functional_at(c, st, i);
                CHECK(Hi <= prev + tol);
                prev = Hi;
            }
        }
    }
}

TEST_CASE("the functional is nonnegative on the safe boundary", "[reachavoid]") {
    const RaResult& r = disk_result();
    REQUIRE(r.status == RaStatus::Valid);
    const RabfCertificate& c = *r.cert;
    double quad = 0.0;
    for (size_t k = 0; k < c.c_bound.size(); ++k)
        quad += c.e2.entries[k].eval({0.0, 0.0}) * c.c_bound[k];
    quad *= 0.5 * c.tau * c.tau;
    for (int i = 0; i < 1000; ++i) {
        double th = 2.0 * M_PI * i / 1000.0;
        std::vector<double> p = {std::cos(th), std::sin(th)};
        double v = c.h0.eval(p) + c.tau * c.h1.eval(p) + quad;
        REQUIRE(v >= -1e-6);
    }
}

TEST_CASE("membership agrees between a point and its constant history",
          "[reachavoid]") {
    const RaResult& r = disk_result();
    REQUIRE(r.status == RaStatus::Valid);
    const RabfCertificate& c = *r.cert;

    std::vector<double> inside = *r.member;
    auto const_hist = [&](double) { return inside; };
    CHECK(membership_constant(c, inside));
    CHECK(membership_function(c, const_hist, 64));

    // a point on the safe boundary is never a member: the boundary
    // condition pins the functional to be nonnegative there
    std::vector<double> rim = {1.0, 0.0};
    CHECK_FALSE(membership_constant(c, rim));
    CHECK_FALSE(membership_function(c, [&](double) { return rim; }, 64));
}

TEST_CASE("sampled-history membership is stable under quadrature refinement",
          "[reachavoid]") {
    const RaResult& r = disk_result();
    REQUIRE(r.status == RaStatus::Valid);
    const RabfCertificate& c = *r.cert;
    std::vector<double> p = *r.member;

    // gentle linear drift toward the stored member point
    auto drift = [&](double theta) {
        double sc = 1.0 + 0.3 * theta;  // theta in [-tau, 0]
        return std::vector<double>{p[0] * sc, p[1] * sc};
    };
    bool coarse = membership_function(c, drift, 32);
    bool fine = membership_function(c, drift, 320);
    CHECK(coarse == fine);
    CHECK(coarse);
}

TEST_CASE("histories leaving the safe set are rejected", "[reachavoid]") {
    const RaResult& r = disk_result();
    REQUIRE(r.status == RaStatus::Valid);
    const RabfCertificate& c = *r.cert;

    auto outside = [](double) { return std::vector<double>{1.2, 0.0}; };
    CHECK_THROWS_AS(membership_function(c, outside, 16), std::domain_error);

    // grazing case: inside at theta = -tau, outside by theta = 0
    auto grazing = [&](double theta) {
        return std::vector<double>{1.04 + 0.5 * theta, 0.0};
    };
    CHECK_THROWS_AS(membership_function(c, grazing, 16), std::domain_error);
}

TEST_CASE("membership rejects dimension mismatches", "[reachavoid]") {
    const RaResult& r = disk_result();
    REQUIRE(r.status == RaStatus::Valid);
    CHECK_THROWS_AS(membership_constant(*r.cert, {0.0}), std::invalid_argument);
}

TEST_CASE("certificates round-trip through json", "[reachavoid]") {
    const RaResult& r = disk_result();
    REQUIRE(r.status == RaStatus::Valid);
    const RabfCertificate& c = *r.cert;

    nlohmann::json j = certificate_to_json(c);
    RabfCertificate back = certificate_from_json(j, {});

    CHECK(back.tau == c.tau);
    CHECK(back.margin == c.margin);
    CHECK(back.c_bound == c.c_bound);
    CHECK(back.h0.same_terms(c.h0, 1e-12));
    CHECK(back.h1.same_terms(c.h1, 1e-12));
    CHECK(back.w.same_terms(c.w, 1e-12));
    REQUIRE(back.e1.size() == c.e1.size());
    for (size_t k = 0; k < c.e1.size(); ++k) {
        CHECK(back.e1.entries[k].same_terms(c.e1.entries[k], 1e-12));
        CHECK(back.e2.entries[k].same_terms(c.e2.entries[k], 1e-12));
        CHECK(back.e3.entries[k].same_terms(c.e3.entries[k], 1e-12));
    }
    CHECK(back.safe.constraints.size() == c.safe.constraints.size());
    CHECK(back.domain.constraints.size() == c.domain.constraints.size());
    REQUIRE(back.sos_witnesses.size() == c.sos_witnesses.size());
    CHECK(back.witness_labels == c.witness_labels);
    for (size_t i = 0; i < c.sos_witnesses.size(); ++i) {
        const auto& a = c.sos_witnesses[i];
        const auto& b = back.sos_witnesses[i];
        REQUIRE(b.grams.size() == a.grams.size());
        for (size_t g = 0; g < a.grams.size(); ++g) {
            REQUIRE(b.grams[g].rows() == a.grams[g].rows());
            CHECK((b.grams[g] - a.grams[g]).cwiseAbs().maxCoeff() <= 1e-12);
        }
        CHECK(b.ineq_index == a.ineq_index);
        CHECK(b.eq_index == a.eq_index);
    }

    // serialization is deterministic
    CHECK(certificate_to_json(back).dump() == j.dump());
}

TEST_CASE("equal safe and target sets still admit a certificate",
          "[reachavoid]") {
    RaQuery q;
    q.vf = delayed_oscillator(0.1);
    q.safe = disk(1.0);
    q.target = disk(1.0);
    RaResult r = synthesize_rabf(q);
    INFO(r.detail);
    REQUIRE(r.status == RaStatus::Valid);
    CHECK(r.member.has_value());
}

TEST_CASE("the degree ladder climbs past an infeasible first rung",
          "[reachavoid]") {
    RaQuery q;
    q.vf = delayed_oscillator(0.1);
    q.safe = disk(1.0);
    q.target = disk(0.1);
    // constant templates cannot satisfy the boundary condition together
    // with the anchor normalization, so the first rung must fail
    q.degrees = {{0, 0, 0}, {4, 4, 4}};
    RaResult r = synthesize_rabf(q);
    INFO(r.detail);
    REQUIRE(r.status == RaStatus::Valid);
    CHECK(r.used_degrees.h == 4);
}

TEST_CASE("a target with empty interior is infeasible", "[reachavoid]") {
    RaQuery q;
    q.vf = delayed_oscillator(0.1);
    q.safe = disk(1.0);
    q.target = disk(-1.0);  // no point satisfies the constraint
    RaResult r = synthesize_rabf(q);
    REQUIRE(r.status == RaStatus::Infeasible);
    CHECK(r.detail.find("interior") != std::string::npos);
}
