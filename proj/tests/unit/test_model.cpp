#include <functional>
#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "sparseport/error.hpp"
#include "sparseport/market.hpp"
#include "sparseport/model.hpp"
#include "sparseport/returns.hpp"
#include "sparseport/toy.hpp"
#include "support.hpp"

#include <sstream>

using namespace sparseport;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::Numerical;
}

MarketEstimate flat_market(Index n) { return make_market(VectorXd::Zero(n), MatrixXd::Zero(n, n)); }

// Random strictly feasible point: interior point plus a small null-space move.
VectorXd random_interior(const GeneralForm& form, std::mt19937_64& rng) {
    const Eigen::FullPivLU<MatrixXd> lu(form.A);
    const MatrixXd K = lu.kernel();
    VectorXd x = form.interior;
    if (K.cols() > 0 && K.norm() > 0) {
        VectorXd dir = K * testsupport::random_vector(rng, K.cols());
        const double lim = (x.array() / (dir.array().abs() + 1e-300)).minCoeff();
        x += 0.5 * std::min(1.0, lim) * dir / std::max(1.0, dir.cwiseAbs().maxCoeff());
    }
    return x;
}

}  // namespace

TEST_CASE("estimate_market on tiny series") {
    MatrixXd z(2, 1);
    z << 0.0, 0.0;
    const MarketEstimate a = estimate_market(make_returns({"a"}, z));
    CHECK(a.mean(0) == 0.0);
    CHECK(a.cov(0, 0) == 0.0);

    MatrixXd r(3, 1);
    r << 0.01, 0.02, 0.03;
    const MarketEstimate b = estimate_market(make_returns({"a"}, r));
    CHECK(b.mean(0) == doctest::Approx(0.02).epsilon(1e-14));
    // ((-0.01)^2 + 0 + 0.01^2) / 2
    CHECK(b.cov(0, 0) == doctest::Approx(1e-4).epsilon(1e-12));
}

TEST_CASE("returns validation") {
    MatrixXd r(2, 2);
    r << 0.1, std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0;
    CHECK(kind_of([&] { make_returns({"a", "b"}, r); }) == ErrorKind::Data);
    MatrixXd one(1, 2);
    one << 0.1, 0.2;
    CHECK(kind_of([&] { estimate_market(make_returns({"a", "b"}, one)); }) == ErrorKind::InsufficientData);
    MatrixXd ok = MatrixXd::Zero(3, 2);
    CHECK(kind_of([&] { make_returns({"a", "a"}, ok); }) == ErrorKind::Data);
}

TEST_CASE("returns csv with blanks and prices") {
    std::istringstream in("x,y\n0.1,\n0.2,0.3\n");
    const ReturnsMatrix r = parse_returns_csv(in);
    REQUIRE(r.periods() == 2);
    CHECK(r.data(0, 1) == 0.0);
    CHECK(r.data(1, 1) == 0.3);

    std::istringstream p("x\n100\n110\n99\n");
    const ReturnsMatrix q = parse_returns_csv(p, true);
    REQUIRE(q.periods() == 2);
    CHECK(q.data(0, 0) == doctest::Approx(0.1));
    CHECK(q.data(1, 0) == doctest::Approx(-0.1));
}

TEST_CASE("general form layouts") {
    ModelSpec spec;
    spec.variant = Variant::LpNoShort;
    spec.lambda = 0.1;
    spec.phi = 0.01;
    const ToyInstance t1 = toy_instance(1);
    const GeneralForm f = build_general_form(spec, t1.market);
    CHECK(f.dim() == 3);
    CHECK(f.A.isApprox(MatrixXd::Ones(1, 3)));
    CHECK(f.b(0) == 1.0);
    CHECK(f.reg_set == std::vector<Index>{0, 1, 2});
    CHECK(f.chat.isApprox(0.01 * t1.market.mean));

    ModelSpec l1;
    l1.variant = Variant::L1BallLp;
    l1.lambda = 0.1;
    l1.delta = 1.5;
    const GeneralForm g = build_general_form(l1, flat_market(2));
    REQUIRE(g.dim() == 5);
    MatrixXd A(2, 5);
    A << 1, 1, -1, -1, 0, 1, 1, 1, 1, 1;
    CHECK(g.A.isApprox(A));
    CHECK(g.b(0) == 1.0);
    CHECK(g.b(1) == 1.5);
    CHECK(g.reg_set == std::vector<Index>{0, 1, 2, 3});

    ModelSpec l2;
    l2.variant = Variant::L2Lp;
    l2.lambda = 0.1;
    l2.mu = 0.25;
    std::mt19937_64 rng(11);
    const MarketEstimate mk = testsupport::random_market(rng, 3);
    const GeneralForm h = build_general_form(l2, mk);
    MatrixXd Qa = mk.cov + 0.5 * MatrixXd::Identity(3, 3);
    MatrixXd expect(6, 6);
    expect << Qa, -Qa, -Qa, Qa;
    CHECK((h.Qhat - expect).cwiseAbs().maxCoeff() < 1e-15);

    ModelSpec dyn;
    dyn.variant = Variant::DynamicLp;
    dyn.lambda = 0.1;
    dyn.anchor = VectorXd::Constant(2, 0.5);
    const GeneralForm d = build_general_form(dyn, flat_market(2));
    CHECK(d.dim() == 6);
    CHECK(d.rows() == 3);
    VectorXd y(6);
    y << 0.1, 0.0, 0.0, 0.1, 0.5, 0.4;  // y+, y-, slack
    CHECK((d.A * y - d.b).norm() < 1e-15);
    const VectorXd w = back_map(d, y);
    CHECK(w(0) == doctest::Approx(0.6));
    CHECK(w(1) == doctest::Approx(0.4));
}

TEST_CASE("spec validation") {
    ModelSpec l1;
    l1.variant = Variant::L1BallLp;
    l1.lambda = 0.1;
    l1.delta = 0.9;
    CHECK(kind_of([&] { build_general_form(l1, flat_market(2)); }) == ErrorKind::Spec);

    ModelSpec dyn;
    dyn.variant = Variant::DynamicLp;
    dyn.lambda = 0.1;
    dyn.anchor = VectorXd::Constant(2, 0.7);
    CHECK(kind_of([&] { build_general_form(dyn, flat_market(2)); }) == ErrorKind::Spec);

    ModelSpec neg;
    neg.lambda = -1.0;
    CHECK(kind_of([&] { build_general_form(neg, flat_market(2)); }) == ErrorKind::Spec);
}

TEST_CASE("objective values") {
    ModelSpec spec;
    spec.variant = Variant::LpNoShort;
    spec.phi = 0.01;
    const GeneralForm f = build_general_form(spec, toy_instance(1).market);
    const VectorXd third = VectorXd::Constant(3, 1.0 / 3.0);
    // 1/2 * 12/9 - 0.01 * 2
    CHECK(objective(f, third, 0.0, 0.5) == doctest::Approx(2.0 / 3.0 - 0.02).epsilon(1e-14));

    VectorXd e1 = VectorXd::Zero(3);
    e1(0) = 1.0;
    CHECK(objective(f, e1, 0.3, 0.5) - objective(f, e1, 0.0, 0.5) == doctest::Approx(0.3));

    ModelSpec flat;
    const GeneralForm g = build_general_form(flat, flat_market(4));
    CHECK(objective(g, VectorXd::Constant(4, 0.25), 1.0, 0.5) == doctest::Approx(2.0));

    VectorXd bad = third;
    bad(1) = -0.1;
    CHECK(kind_of([&] { objective(f, bad, 0.1, 0.5); }) == ErrorKind::Domain);
}

TEST_CASE("gradient and hessian closed forms") {
    ModelSpec spec;
    const GeneralForm f = build_general_form(spec, flat_market(1));
    VectorXd x(1);
    x << 4.0;
    const auto [g, H] = gradient_hessian(f, x, 1.0, 0.5);
    CHECK(g(0) == doctest::Approx(0.25));
    CHECK(H(0, 0) == doctest::Approx(-1.0 / 32.0));

    ModelSpec s2;
    s2.phi = 0.01;
    const GeneralForm f2 = build_general_form(s2, toy_instance(3).market);
    const VectorXd z = f2.interior;
    const auto [g0, H0] = gradient_hessian(f2, z, 0.0, 0.5);
    CHECK((g0 - (f2.Qhat * z - f2.chat)).norm() < 1e-15);
    CHECK((H0 - f2.Qhat).norm() == 0.0);

    VectorXd zero = z;
    zero(0) = 0.0;
    CHECK(kind_of([&] { gradient_hessian(f2, zero, 0.1, 0.5); }) == ErrorKind::Domain);
}

TEST_CASE("derivatives match central differences") {
    std::mt19937_64 rng(21);
    const Variant variants[] = {Variant::LpNoShort, Variant::LpShort, Variant::L1BallLp,
                                Variant::L2Lp, Variant::DynamicLp};
    for (int trial = 0; trial < 25; ++trial) {
        const Index n = 2 + static_cast<Index>(rng() % 4);
        ModelSpec spec;
        spec.variant = variants[trial % 5];
        spec.lambda = 0.05;
        spec.p = (trial % 3 == 0) ? 0.3 : (trial % 3 == 1 ? 0.5 : 0.7);
        spec.phi = 0.5;
        spec.delta = 1.7;
        spec.mu = 0.2;
        spec.anchor = VectorXd::Constant(n, 1.0 / static_cast<double>(n));
        const GeneralForm f = build_general_form(spec, testsupport::random_market(rng, n));
        const VectorXd x = random_interior(f, rng);
        const auto [g, H] = gradient_hessian(f, x, spec.lambda, spec.p);
        for (Index j = 0; j < x.size(); ++j) {
            const double h = 1e-6 * x(j);
            VectorXd xp = x, xm = x;
            xp(j) += h;
            xm(j) -= h;
            const double fd = (objective(f, xp, spec.lambda, spec.p) - objective(f, xm, spec.lambda, spec.p)) / (2 * h);
            CHECK(std::abs(fd - g(j)) <= 1e-6 * std::max(1.0, std::abs(g(j))));
            const VectorXd gd = (gradient_hessian(f, xp, spec.lambda, spec.p).first -
                                 gradient_hessian(f, xm, spec.lambda, spec.p).first) / (2 * h);
            CHECK((gd - H.col(j)).cwiseAbs().maxCoeff() <= 1e-5 * std::max(1.0, H.col(j).cwiseAbs().maxCoeff()));
        }
    }
}

TEST_CASE("back map") {
    ModelSpec d;
    const GeneralForm direct = build_general_form(d, flat_market(2));
    VectorXd x(2);
    x << 0.2, 0.8;
    CHECK(back_map(direct, x) == x);

    ModelSpec s;
    s.variant = Variant::LpShort;
    s.lambda = 0.1;
    const GeneralForm split = build_general_form(s, flat_market(2));
    VectorXd xs(4);
    xs << 1.2, 0.0, 0.0, 0.2;
    const VectorXd w = back_map(split, xs);
    CHECK(w(0) == doctest::Approx(1.2));
    CHECK(w(1) == doctest::Approx(-0.2));
}

TEST_CASE("back-mapped interior points are portfolios") {
    std::mt19937_64 rng(31);
    const Variant variants[] = {Variant::Markowitz, Variant::MarkowitzNoShort, Variant::LpNoShort,
                                Variant::LpShort, Variant::L1BallLp, Variant::L2Lp, Variant::DynamicLp};
    for (Variant v : variants) {
        ModelSpec spec;
        spec.variant = v;
        spec.lambda = 0.1;
        spec.delta = 2.0;
        spec.mu = 0.1;
        VectorXd a(4);
        a << 0.4, 0.0, 0.35, 0.25;
        spec.anchor = a;
        const GeneralForm f = build_general_form(spec, testsupport::random_market(rng, 4));
        CHECK((f.A * f.interior - f.b).norm() < 1e-12);
        CHECK(f.interior.minCoeff() > 0.0);
        for (int k = 0; k < 5; ++k) {
            const VectorXd x = random_interior(f, rng);
            CHECK(back_map(f, x).sum() == doctest::Approx(1.0).epsilon(1e-10));
        }
    }
}

TEST_CASE("split objective equals unsplit objective under complementarity") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 10; ++trial) {
        const MarketEstimate mk = testsupport::random_market(rng, 4);
        ModelSpec spec;
        spec.variant = Variant::LpShort;
        spec.lambda = 0.2;
        spec.phi = 0.3;
        const GeneralForm f = build_general_form(spec, mk);
        VectorXd w = testsupport::random_vector(rng, 4);
        w(3) = 1.0 - w.head(3).sum();
        VectorXd x = VectorXd::Zero(8);
        x.head(4) = w.cwiseMax(0.0);
        x.tail(4) = (-w).cwiseMax(0.0);
        const double unsplit = 0.5 * w.dot(mk.cov * w) - 0.3 * mk.mean.dot(w) +
                               0.2 * w.cwiseAbs().cwiseSqrt().sum();
        CHECK(objective(f, x, 0.2, 0.5) == doctest::Approx(unsplit).epsilon(1e-12));
    }
}

TEST_CASE("forms are deterministic") {
    std::mt19937_64 rng(51);
    const MarketEstimate mk = testsupport::random_market(rng, 5);
    ModelSpec spec;
    spec.variant = Variant::L1BallLp;
    spec.lambda = 0.1;
    spec.delta = 1.5;
    const GeneralForm a = build_general_form(spec, mk);
    const GeneralForm b = build_general_form(spec, mk);
    CHECK(a.Qhat == b.Qhat);
    CHECK(a.chat == b.chat);
    CHECK(a.A == b.A);
    CHECK(a.interior == b.interior);
}

TEST_CASE("truncation and support") {
    VectorXd w(4);
    w << 0.5, 5e-7, 0.3, 0.2 - 5e-7;
    const VectorXd t = truncate_weights(w, 1e-6);
    CHECK(t(1) == 0.0);
    CHECK(t.sum() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(support_of(t) == std::vector<Index>{0, 2, 3});
}
