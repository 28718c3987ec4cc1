#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "gprc/kernels.hpp"
#include "gprc/problems.hpp"
#include "oracles.hpp"

using namespace gprc;

namespace {

Point pt(double v) { return Eigen::VectorXd::Constant(1, v); }

KernelHyper hyper1d(double amp2, double prec) {
    return KernelHyper::from_values(amp2, Eigen::VectorXd::Constant(1, prec));
}

LinearOperator oscillator_op(double th1, double th2) {
    return LinearOperator({constant_term(1.0, MultiIndex({2})), constant_term(th1, MultiIndex({1})),
                           constant_term(th2, MultiIndex({0}))},
                          1);
}

}  // namespace

TEST_CASE("rbf basic values", "[kernels]") {
    const KernelHyper h = hyper1d(1.0, 1.0);
    CHECK(rbf(pt(0.3), pt(0.3), h) == Catch::Approx(1.0));
    CHECK(rbf(pt(0.0), pt(1.0), h) == Catch::Approx(std::exp(-0.5)).epsilon(1e-12));
    const KernelHyper h4 = hyper1d(4.0, 2.5);
    CHECK(rbf(pt(1.7), pt(1.7), h4) == Catch::Approx(4.0));
    CHECK(rbf(pt(0.2), pt(1.4), h4) == Catch::Approx(rbf(pt(1.4), pt(0.2), h4)));
}

TEST_CASE("rbf rejects dimension mismatches", "[kernels]") {
    const KernelHyper h = hyper1d(1.0, 1.0);
    Point x2(2);
    x2 << 0.0, 1.0;
    CHECK_THROWS_AS(rbf(x2, x2, h), DimensionError);
}

TEST_CASE("first derivative kernel matches the closed form", "[kernels]") {
    // d/dt k(t,t') = -k * prec * (t - t'), the first-argument convention.
    const double prec = 1.7;
    const KernelHyper h = hyper1d(2.0, prec);
    const double t = 0.4, t2 = -0.9;
    const double k = rbf(pt(t), pt(t2), h);
    const double expected = -k * prec * (t - t2);
    CHECK(rbf_deriv(pt(t), pt(t2), h, MultiIndex({1}), MultiIndex({0})) ==
          Catch::Approx(expected).epsilon(1e-12));
    // Differentiating the second argument flips the sign.
    CHECK(rbf_deriv(pt(t), pt(t2), h, MultiIndex({0}), MultiIndex({1})) ==
          Catch::Approx(-expected).epsilon(1e-12));
}

TEST_CASE("odd total derivative order vanishes at coincident points", "[kernels]") {
    const KernelHyper h = hyper1d(1.3, 0.8);
    CHECK(rbf_deriv(pt(0.7), pt(0.7), h, MultiIndex({1}), MultiIndex({0})) == 0.0);
    CHECK(rbf_deriv(pt(0.7), pt(0.7), h, MultiIndex({2}), MultiIndex({1})) == 0.0);
    CHECK(rbf_deriv(pt(0.7), pt(0.7), h, MultiIndex({3}), MultiIndex({2})) == 0.0);
}

TEST_CASE("kernel derivatives match nested finite differences", "[kernels]") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> coord(-2.0, 2.0);
    std::uniform_real_distribution<double> logprec(std::log(0.1), std::log(10.0));
    std::uniform_real_distribution<double> logamp(std::log(0.5), std::log(4.0));

    for (int rep = 0; rep < 25; ++rep) {
        const double amp2 = std::exp(logamp(rng));
        const double prec = std::exp(logprec(rng));
        const KernelHyper h = hyper1d(amp2, prec);
        const double x = coord(rng);
        const double x2 = coord(rng);
        for (int a = 0; a <= 3; ++a) {
            for (int b = 0; b <= 3; ++b) {
                const double got =
                    rbf_deriv(pt(x), pt(x2), h, MultiIndex({a}), MultiIndex({b}));
                const double want = oracle::fd_kernel_derivative(
                    amp2, Eigen::VectorXd::Constant(1, prec), pt(x), pt(x2), {a}, {b});
                const double scale =
                    amp2 * std::pow(prec, 0.5 * (a + b));  // characteristic magnitude
                CHECK(std::abs(got - want) <= 1e-4 * std::max(std::abs(want), 1e-6 * scale));
            }
        }
    }
}

TEST_CASE("2-D kernel derivatives match nested finite differences", "[kernels]") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> coord(-1.5, 1.5);
    std::uniform_real_distribution<double> logprec(std::log(0.1), std::log(10.0));
    for (int rep = 0; rep < 10; ++rep) {
        Eigen::VectorXd prec(2);
        prec << std::exp(logprec(rng)), std::exp(logprec(rng));
        const KernelHyper h = KernelHyper::from_values(1.5, prec);
        Eigen::VectorXd x(2), x2(2);
        x << coord(rng), coord(rng);
        x2 << coord(rng), coord(rng);
        const std::vector<std::pair<std::vector<int>, std::vector<int>>> cases = {
            {{1, 0}, {0, 1}}, {{2, 1}, {0, 0}}, {{3, 0}, {0, 1}},
            {{1, 1}, {1, 1}}, {{2, 0}, {2, 0}}, {{0, 2}, {3, 0}}};
        for (const auto& [a, b] : cases) {
            const double got = rbf_deriv(x, x2, h, MultiIndex(a), MultiIndex(b));
            const double want = oracle::fd_kernel_derivative(1.5, prec, x, x2, a, b);
            double scale = 1.5;
            for (int d = 0; d < 2; ++d) {
                scale *= std::pow(prec[d], 0.5 * (a[static_cast<std::size_t>(d)] +
                                                  b[static_cast<std::size_t>(d)]));
            }
            CHECK(std::abs(got - want) <= 1e-4 * std::max(std::abs(want), 1e-6 * scale));
        }
    }
}

TEST_CASE("argument-swap symmetry", "[kernels]") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> coord(-2.0, 2.0);
    const KernelHyper h = hyper1d(1.2, 2.3);
    for (int rep = 0; rep < 50; ++rep) {
        const double x = coord(rng), x2 = coord(rng);
        for (int a = 0; a <= 3; ++a) {
            for (int b = 0; b <= 3; ++b) {
                const double lhs = rbf_deriv(pt(x), pt(x2), h, MultiIndex({a}), MultiIndex({b}));
                const double rhs = rbf_deriv(pt(x2), pt(x), h, MultiIndex({b}), MultiIndex({a}));
                CHECK(lhs == Catch::Approx(rhs).margin(1e-13));
            }
        }
    }
}

TEST_CASE("order beyond the supported maximum is rejected", "[kernels]") {
    const KernelHyper h = hyper1d(1.0, 1.0);
    CHECK_THROWS_AS(MultiIndex({4}), OrderError);
    // Combined order within per-index limits is fine up to 2 * kMaxOrder.
    CHECK_NOTHROW(rbf_deriv(pt(0.1), pt(0.2), h, MultiIndex({3}), MultiIndex({3})));
}

TEST_CASE("op_kernel with identity operators reduces to rbf", "[kernels]") {
    const KernelHyper h = hyper1d(2.0, 0.7);
    const LinearOperator ident = LinearOperator::identity(1);
    const ParamVector theta;
    const FrozenFields frozen;
    CHECK(op_kernel(ident, ident, pt(0.5), pt(-0.3), h, theta, frozen) ==
          Catch::Approx(rbf(pt(0.5), pt(-0.3), h)).epsilon(1e-14));
}

TEST_CASE("oscillator operator kernel expands term by term", "[kernels]") {
    const double th1 = 0.8, th2 = 2.4;
    const KernelHyper h = hyper1d(1.5, 1.1);
    const LinearOperator L = oscillator_op(th1, th2);
    const LinearOperator ident = LinearOperator::identity(1);
    const ParamVector theta;
    const FrozenFields frozen;
    const Point x = pt(0.3), x2 = pt(1.9);

    auto kd = [&](int a, int b) {
        return rbf_deriv(x, x2, h, MultiIndex({a}), MultiIndex({b}));
    };

    // k_ru = k_{u''u} + th1 k_{u'u} + th2 k_{uu}
    const double k_ru = op_kernel(L, ident, x, x2, h, theta, frozen);
    CHECK(k_ru == Catch::Approx(kd(2, 0) + th1 * kd(1, 0) + th2 * kd(0, 0)).epsilon(1e-12));

    // k_rr expands with squared and doubled cross coefficients.
    const double k_rr = op_kernel(L, L, x, x2, h, theta, frozen);
    const double expect = kd(2, 2) + th1 * th1 * kd(1, 1) + th2 * th2 * kd(0, 0) +
                          th1 * (kd(2, 1) + kd(1, 2)) + th2 * (kd(2, 0) + kd(0, 2)) +
                          th1 * th2 * (kd(1, 0) + kd(0, 1));
    CHECK(k_rr == Catch::Approx(expect).epsilon(1e-12));
}

TEST_CASE("op_kernel is bilinear in operator coefficients", "[kernels]") {
    const KernelHyper h = hyper1d(1.0, 1.0);
    const ParamVector theta;
    const FrozenFields frozen;
    const Point x = pt(0.2), x2 = pt(-0.4);
    for (double c : {0.5, 2.0, -3.0}) {
        const LinearOperator L1 = oscillator_op(1.0, 3.0);
        LinearOperator scaled({constant_term(c, MultiIndex({2})),
                               constant_term(c * 1.0, MultiIndex({1})),
                               constant_term(c * 3.0, MultiIndex({0}))},
                              1);
        const LinearOperator ident = LinearOperator::identity(1);
        CHECK(op_kernel(scaled, ident, x, x2, h, theta, frozen) ==
              Catch::Approx(c * op_kernel(L1, ident, x, x2, h, theta, frozen)).epsilon(1e-12));
    }
}

TEST_CASE("gram matrices: shape, symmetry, definiteness", "[kernels]") {
    const KernelHyper h = hyper1d(1.0, 1.0);
    const LinearOperator ident = LinearOperator::identity(1);
    const ParamVector theta;
    const FrozenFields frozen;

    Eigen::MatrixXd single(1, 1);
    single << 0.7;
    const Eigen::MatrixXd one = gram(ident, ident, single, single, h, theta, frozen);
    REQUIRE(one.rows() == 1);
    CHECK(one(0, 0) == Catch::Approx(1.0));

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> coord(0.0, 10.0);
    Eigen::MatrixXd X(50, 1);
    for (int i = 0; i < X.rows(); ++i) X(i, 0) = coord(rng);

    const LinearOperator L = oscillator_op(1.0, 3.0);
    const Eigen::MatrixXd Krr = gram(L, L, X, X, h, theta, frozen);
    CHECK((Krr - Krr.transpose()).cwiseAbs().maxCoeff() < 1e-12);

    Eigen::MatrixXd Kuu = gram(ident, ident, X, X, h, theta, frozen);
    Kuu.diagonal().array() += 1e-8;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Kuu, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() >= -1e-6);
    Eigen::LLT<Eigen::MatrixXd> llt(Kuu);
    CHECK(llt.info() == Eigen::Success);
}

TEST_CASE("cross blocks transpose consistently", "[kernels]") {
    const KernelHyper h = hyper1d(1.4, 0.6);
    const LinearOperator ident = LinearOperator::identity(1);
    const LinearOperator L = oscillator_op(0.9, 2.7);
    const ParamVector theta;
    const FrozenFields frozen;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> coord(0.0, 5.0);
    Eigen::MatrixXd X(5, 1), X2(4, 1);
    for (int i = 0; i < X.rows(); ++i) X(i, 0) = coord(rng);
    for (int i = 0; i < X2.rows(); ++i) X2(i, 0) = coord(rng);

    const Eigen::MatrixXd K_ur = gram(ident, L, X, X2, h, theta, frozen);
    const Eigen::MatrixXd K_ru = gram(L, ident, X2, X, h, theta, frozen);
    CHECK((K_ur - K_ru.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gram_grad: amp2 derivative equals the gram matrix", "[kernels]") {
    const KernelHyper h = hyper1d(1.9, 0.9);
    const LinearOperator ident = LinearOperator::identity(1);
    const ParamVector theta;
    const FrozenFields frozen;
    Eigen::MatrixXd X(3, 1);
    X << 0.0, 1.0, 2.5;
    const Eigen::MatrixXd K = gram(ident, ident, X, X, h, theta, frozen);
    const Eigen::MatrixXd G = gram_grad(ident, ident, X, X, h, theta, frozen, HyperId::amp2());
    CHECK((K - G).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gram_grad matches finite differences", "[kernels]") {
    const LinearOperator L = oscillator_op(1.0, 3.0);
    const ParamVector theta;
    const FrozenFields frozen;
    Eigen::MatrixXd X(3, 1);
    X << 0.3, 1.1, 2.9;

    const double amp2 = 1.6, prec = 1.3;
    const KernelHyper h = hyper1d(amp2, prec);
    const Eigen::MatrixXd G = gram_grad(L, L, X, X, h, theta, frozen, HyperId::prec(0));

    const double dl = 1e-6;
    const KernelHyper hp = hyper1d(amp2, std::exp(std::log(prec) + dl));
    const KernelHyper hm = hyper1d(amp2, std::exp(std::log(prec) - dl));
    const Eigen::MatrixXd fd = (gram(L, L, X, X, hp, theta, frozen) -
                                gram(L, L, X, X, hm, theta, frozen)) /
                               (2.0 * dl);
    for (int i = 0; i < G.rows(); ++i) {
        for (int j = 0; j < G.cols(); ++j) {
            CHECK(G(i, j) == Catch::Approx(fd(i, j)).epsilon(1e-6).margin(1e-8));
        }
    }
}

TEST_CASE("gram_grad in a flat coordinate is zero", "[kernels]") {
    // All points share coordinate 1, so the precision of that coordinate
    // cannot matter.
    Eigen::VectorXd prec(2);
    prec << 1.0, 2.0;
    const KernelHyper h = KernelHyper::from_values(1.0, prec);
    const LinearOperator ident = LinearOperator::identity(2);
    Eigen::MatrixXd X(3, 2);
    X << 0.0, 5.0, 1.0, 5.0, 2.0, 5.0;
    const Eigen::MatrixXd G =
        gram_grad(ident, ident, X, X, h, ParamVector(), FrozenFields(), HyperId::prec(1));
    CHECK(G.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("unknown hyperparameter id is rejected", "[kernels]") {
    const KernelHyper h = hyper1d(1.0, 1.0);
    const LinearOperator ident = LinearOperator::identity(1);
    Eigen::MatrixXd X(1, 1);
    X << 0.0;
    CHECK_THROWS_AS(
        gram_grad(ident, ident, X, X, h, ParamVector(), FrozenFields(), HyperId::prec(3)),
        ArgumentError);
}
