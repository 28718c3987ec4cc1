#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "gprc/operators.hpp"
#include "gprc/problems.hpp"

using namespace gprc;

namespace {

Point pt(double v) { return Eigen::VectorXd::Constant(1, v); }

Values ode_values(double u, double du, double ddu) {
    return {{MultiIndex({0}), u}, {MultiIndex({1}), du}, {MultiIndex({2}), ddu}};
}

}  // namespace

TEST_CASE("oscillator residual vanishes on zero values", "[operators]") {
    const EquationSpec eq = builtin("oscillator").eq;
    const Values v = ode_values(0.0, 0.0, 0.0);
    CHECK(eval_residual(eq, v, pt(1.0), Eigen::Vector2d(1.0, 3.0)) == 0.0);
    CHECK(eval_residual(eq, v, pt(1.0), Eigen::Vector2d(-2.0, 7.0)) == 0.0);
}

TEST_CASE("van der pol residual by direct substitution", "[operators]") {
    const EquationSpec eq = builtin("vdp").eq;
    const Values v = ode_values(0.0, 1.0, 0.0);
    CHECK(eval_residual(eq, v, pt(0.0), Eigen::VectorXd::Constant(1, 0.5)) ==
          Catch::Approx(-0.5));
}

TEST_CASE("missing value raises MissingFieldError", "[operators]") {
    const EquationSpec eq = builtin("oscillator").eq;
    Values v = ode_values(0.0, 0.0, 0.0);
    v.erase(MultiIndex({1}));
    CHECK_THROWS_AS(eval_residual(eq, v, pt(0.0), Eigen::Vector2d(1.0, 3.0)), MissingFieldError);
}

TEST_CASE("kdv residual vanishes on the spectral reference solution", "[operators][slow]") {
    const BuiltinProblem p = builtin("kdv");
    const TruthField truth = truth_field(p);
    std::mt19937_64 rng(17);
    // interior solver nodes inside the observation window
    std::uniform_real_distribution<double> xs(-20.0, 25.0);
    std::uniform_real_distribution<double> ts(15.0, 19.5);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        Point x(2);
        x << xs(rng), ts(rng);
        Values v;
        for (const auto& f : p.eq.derivative_functionals) v[f] = truth.deriv(x, f);
        worst = std::max(worst,
                         std::abs(eval_residual(p.eq, v, x, p.cfg.true_theta)));
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("oscillator linearization has constant coefficients", "[operators]") {
    const EquationSpec eq = builtin("oscillator").eq;
    const LinearOperator L = linearize_equation(eq, Eigen::Vector2d(1.0, 3.0), FrozenFields{});
    REQUIRE(L.terms.size() == 3);
    const Point x = pt(2.0);
    const ParamVector th;
    const FrozenFields fr;
    CHECK(L.terms[0].index == MultiIndex({2}));
    CHECK(L.terms[0].coeff(x, th, fr) == 1.0);
    CHECK(L.terms[1].index == MultiIndex({1}));
    CHECK(L.terms[1].coeff(x, th, fr) == 1.0);
    CHECK(L.terms[2].index == MultiIndex({0}));
    CHECK(L.terms[2].coeff(x, th, fr) == 3.0);
}

TEST_CASE("van der pol linearization freezes u in the damping factor", "[operators]") {
    const EquationSpec eq = builtin("vdp").eq;
    FrozenFields frozen;
    frozen["u"] = [](const Point& x) { return 2.0 * x[0]; };
    const LinearOperator L =
        linearize_equation(eq, Eigen::VectorXd::Constant(1, 0.5), frozen);
    REQUIRE(L.terms.size() == 3);
    const Point x = pt(1.5);  // u0 = 3
    CHECK(L.terms[1].index == MultiIndex({1}));
    CHECK(L.terms[1].coeff(x, ParamVector(), FrozenFields()) ==
          Catch::Approx(-0.5 * (1.0 - 9.0)));
    CHECK(L.terms[0].coeff(x, ParamVector(), FrozenFields()) == 1.0);
    CHECK(L.terms[2].coeff(x, ParamVector(), FrozenFields()) == 1.0);
}

TEST_CASE("van der pol linearization requires the frozen solution", "[operators]") {
    const EquationSpec eq = builtin("vdp").eq;
    CHECK_THROWS_AS(linearize_equation(eq, Eigen::VectorXd::Constant(1, 0.5), FrozenFields{}),
                    MissingFieldError);
}

TEST_CASE("kdv linearization keeps u_x and freezes u", "[operators]") {
    const EquationSpec eq = builtin("kdv").eq;
    FrozenFields frozen;
    frozen["u"] = [](const Point& x) { return x[0] + x[1]; };
    const LinearOperator L = linearize_equation(eq, Eigen::Vector2d(6.0, 1.0), frozen);
    REQUIRE(L.terms.size() == 3);
    Point x(2);
    x << 2.0, 1.0;  // u0 = 3
    CHECK(L.terms[0].index == MultiIndex({0, 1}));
    CHECK(L.terms[0].coeff(x, ParamVector(), FrozenFields()) == 1.0);
    CHECK(L.terms[1].index == MultiIndex({1, 0}));
    CHECK(L.terms[1].coeff(x, ParamVector(), FrozenFields()) == Catch::Approx(18.0));
    CHECK(L.terms[2].index == MultiIndex({3, 0}));
    CHECK(L.terms[2].coeff(x, ParamVector(), FrozenFields()) == 1.0);
}

TEST_CASE("apply_operator sums coefficient times value", "[operators]") {
    const LinearOperator single({constant_term(2.0, MultiIndex({0}))}, 1);
    Values v{{MultiIndex({0}), 3.0}};
    CHECK(apply_operator(single, v, pt(0.0), ParamVector(), FrozenFields()) == 6.0);

    const LinearOperator zero({constant_term(0.0, MultiIndex({0})),
                               constant_term(0.0, MultiIndex({2}))},
                              1);
    Values v2 = ode_values(4.0, -1.0, 9.0);
    CHECK(apply_operator(zero, v2, pt(0.0), ParamVector(), FrozenFields()) == 0.0);

    Values missing{{MultiIndex({1}), 1.0}};
    CHECK_THROWS_AS(apply_operator(single, missing, pt(0.0), ParamVector(), FrozenFields()),
                    MissingFieldError);
}

TEST_CASE("oscillator operator annihilates the analytic solution", "[operators]") {
    const EquationSpec eq = builtin("oscillator").eq;
    const Eigen::Vector2d theta(1.0, 3.0);
    const LinearOperator L = linearize_equation(eq, theta, FrozenFields{});
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> ts(0.0, 10.0);
    for (int rep = 0; rep < 100; ++rep) {
        const double t = ts(rng);
        const OscillatorState s = oscillator_solution(theta, 1.0, 0.0, t);
        const Values v = ode_values(s.u, s.du, s.ddu);
        CHECK(std::abs(apply_operator(L, v, pt(t), theta, FrozenFields())) < 1e-8);
    }
}

TEST_CASE("apply_operator is linear in the values", "[operators]") {
    const EquationSpec eq = builtin("oscillator").eq;
    const Eigen::Vector2d theta(0.7, 2.1);
    const LinearOperator L = linearize_equation(eq, theta, FrozenFields{});
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> val(-3.0, 3.0);
    for (int rep = 0; rep < 20; ++rep) {
        const Values v1 = ode_values(val(rng), val(rng), val(rng));
        const Values v2 = ode_values(val(rng), val(rng), val(rng));
        const double a = val(rng), b = val(rng);
        Values combo;
        for (const auto& [idx, x1] : v1) combo[idx] = a * x1 + b * v2.at(idx);
        const Point x = pt(1.0);
        const double lhs = apply_operator(L, combo, x, theta, FrozenFields());
        const double rhs = a * apply_operator(L, v1, x, theta, FrozenFields()) +
                           b * apply_operator(L, v2, x, theta, FrozenFields());
        CHECK(lhs == Catch::Approx(rhs).margin(1e-12));
    }
}

TEST_CASE("linear equations: residual equals operator application", "[operators]") {
    const EquationSpec eq = builtin("oscillator").eq;
    const Eigen::Vector2d theta(1.4, 2.8);
    const LinearOperator L = linearize_equation(eq, theta, FrozenFields{});
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> val(-5.0, 5.0);
    for (int rep = 0; rep < 20; ++rep) {
        const Values v = ode_values(val(rng), val(rng), val(rng));
        const Point x = pt(0.5);
        CHECK(eval_residual(eq, v, x, theta) ==
              apply_operator(L, v, x, theta, FrozenFields()));
    }
}

TEST_CASE("van der pol linearization is exact at the freeze point", "[operators]") {
    const EquationSpec eq = builtin("vdp").eq;
    const ParamVector mu = Eigen::VectorXd::Constant(1, 0.5);
    // Freeze at a smooth function and evaluate the operator on values taken
    // from that same function.
    auto u0 = [](const Point& x) { return std::sin(x[0]); };
    FrozenFields frozen;
    frozen["u"] = u0;
    const LinearOperator L = linearize_equation(eq, mu, frozen);
    for (double t : {0.0, 0.4, 1.3, 2.9}) {
        const Point x = pt(t);
        const Values v = ode_values(std::sin(t), std::cos(t), -std::sin(t));
        CHECK(apply_operator(L, v, x, mu, frozen) ==
              Catch::Approx(eval_residual(eq, v, x, mu)).margin(1e-12));
    }
}

TEST_CASE("multi-index labels", "[operators]") {
    CHECK(MultiIndex({0}).label() == "u");
    CHECK(MultiIndex({1}).label({"t"}) == "u_t");
    CHECK(MultiIndex({3}).label({"t"}) == "u_ttt");
    CHECK(MultiIndex({1, 0}).label({"x", "t"}) == "u_x");
    CHECK(MultiIndex({0, 1}).label({"x", "t"}) == "u_t");
    CHECK(MultiIndex({3, 0}).label({"x", "t"}) == "u_xxx");
}
