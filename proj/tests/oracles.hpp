#pragma once

// Test-side oracles, kept independent of the library implementation paths
// they check: quad-precision nested finite differences for kernel
// derivatives, and explicit-inverse dense Gaussian-process posteriors.

#include <Eigen/Dense>
#include <quadmath.h>

#include <functional>
#include <vector>

#include "gprc/kernels.hpp"
#include "gprc/multi_index.hpp"

namespace oracle {

using quad = __float128;
using QuadVec = std::vector<quad>;
using QuadFn = std::function<quad(const QuadVec&, const QuadVec&)>;

// RBF kernel evaluated in quad precision so that high-order finite
// differences keep enough significant digits.
inline QuadFn rbf_quad(double amp2, const Eigen::VectorXd& prec) {
    return [amp2, prec](const QuadVec& x, const QuadVec& x2) -> quad {
        quad q = 0;
        for (std::size_t d = 0; d < x.size(); ++d) {
            const quad s = x[d] - x2[d];
            q += static_cast<quad>(prec[static_cast<int>(d)]) * s * s;
        }
        return static_cast<quad>(amp2) * expq(-q / 2);
    };
}

// Nested central differences: peels one derivative order at a time, first
// from the x argument, then from x2.
inline quad nested_central_fd(const QuadFn& f, QuadVec x, QuadVec x2, std::vector<int> a,
                              std::vector<int> b, quad h) {
    for (std::size_t d = 0; d < a.size(); ++d) {
        if (a[d] > 0) {
            a[d] -= 1;
            QuadVec xp = x, xm = x;
            xp[d] += h;
            xm[d] -= h;
            return (nested_central_fd(f, xp, x2, a, b, h) -
                    nested_central_fd(f, xm, x2, a, b, h)) /
                   (2 * h);
        }
    }
    for (std::size_t d = 0; d < b.size(); ++d) {
        if (b[d] > 0) {
            b[d] -= 1;
            QuadVec xp = x2, xm = x2;
            xp[d] += h;
            xm[d] -= h;
            return (nested_central_fd(f, x, xp, a, b, h) -
                    nested_central_fd(f, x, xm, a, b, h)) /
                   (2 * h);
        }
    }
    return f(x, x2);
}

inline double fd_kernel_derivative(double amp2, const Eigen::VectorXd& prec,
                                   const Eigen::VectorXd& x, const Eigen::VectorXd& x2,
                                   const std::vector<int>& a, const std::vector<int>& b,
                                   double h = 1e-3) {
    QuadVec xq(static_cast<std::size_t>(x.size())), x2q(static_cast<std::size_t>(x2.size()));
    for (int d = 0; d < x.size(); ++d) xq[static_cast<std::size_t>(d)] = x[d];
    for (int d = 0; d < x2.size(); ++d) x2q[static_cast<std::size_t>(d)] = x2[d];
    // Richardson extrapolation over steps h and h/2 removes the leading
    // truncation term; quad precision keeps the cancellation noise far below
    // the comparison tolerance.
    const quad coarse =
        nested_central_fd(rbf_quad(amp2, prec), xq, x2q, a, b, static_cast<quad>(h));
    const quad fine =
        nested_central_fd(rbf_quad(amp2, prec), xq, x2q, a, b, static_cast<quad>(h) / 2);
    return static_cast<double>((4 * fine - coarse) / 3);
}

// Textbook GP regression posterior by explicit matrix inversion.
struct DensePosterior {
    double mean;
    double var;
};

inline DensePosterior dense_gp_posterior(const Eigen::MatrixXd& K_train,
                                         const Eigen::VectorXd& k_cross, double k_star,
                                         const Eigen::VectorXd& targets) {
    const Eigen::MatrixXd Kinv = K_train.inverse();
    DensePosterior p;
    p.mean = k_cross.dot(Kinv * targets);
    p.var = k_star - k_cross.dot(Kinv * k_cross);
    return p;
}

// Central finite difference of a scalar function of a vector.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-6) {
    Eigen::VectorXd g(x.size());
    for (int i = 0; i < x.size(); ++i) {
        Eigen::VectorXd xp = x, xm = x;
        const double step = h * std::max(1.0, std::abs(x[i]));
        xp[i] += step;
        xm[i] -= step;
        g[i] = (f(xp) - f(xm)) / (2.0 * step);
    }
    return g;
}

}  // namespace oracle
