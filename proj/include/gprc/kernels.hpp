#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <vector>

#include "gprc/errors.hpp"
#include "gprc/multi_index.hpp"
#include "gprc/operators.hpp"

namespace gprc {

// RBF kernel hyperparameters, stored as logarithms so optimization is
// unconstrained: k(x,x') = amp2 * exp(-1/2 sum_d prec_d (x_d - x'_d)^2).
struct KernelHyper {
    double log_amp2 = 0.0;
    Eigen::VectorXd log_prec;

    int dim() const { return static_cast<int>(log_prec.size()); }
    double amp2() const { return std::exp(log_amp2); }
    double prec(int d) const { return std::exp(log_prec[d]); }

    static KernelHyper from_values(double amp2, const Eigen::VectorXd& prec) {
        if (amp2 <= 0.0) throw ArgumentError("amp2 must be positive");
        KernelHyper h;
        h.log_amp2 = std::log(amp2);
        h.log_prec.resize(prec.size());
        for (int d = 0; d < prec.size(); ++d) {
            if (prec[d] <= 0.0) throw ArgumentError("prec must be positive");
            h.log_prec[d] = std::log(prec[d]);
        }
        return h;
    }
};

// Identifies one log-hyperparameter for gradient requests.
struct HyperId {
    enum class Kind { Amp2, Prec };
    Kind kind = Kind::Amp2;
    int dim = 0;

    static HyperId amp2() { return {Kind::Amp2, 0}; }
    static HyperId prec(int d) { return {Kind::Prec, d}; }
};

namespace detail {

inline constexpr int kMaxKernelDims = 8;

// Probabilists' Hermite polynomials He_0..He_n at tau.
inline void hermite_upto(double tau, int n, double* he) {
    he[0] = 1.0;
    if (n >= 1) he[1] = tau;
    for (int k = 1; k < n; ++k) he[k + 1] = tau * he[k] - static_cast<double>(k) * he[k - 1];
}

// d^a/dx^a d^b/dx'^b of the per-dimension Gaussian factor exp(-prec (x-x')^2 / 2):
//   f_m = prec^(m/2) (-1)^a He_m(tau) exp(-tau^2/2),  m = a+b,  tau = sqrt(prec) (x-x').
// The log-prec derivative follows from the same recurrence:
//   d f_m / d log(prec) = (m/2) f_m - (s/2) f_{m+1},  s = x - x'.
struct DimFactor {
    double value;
    double dlog_prec;
};

inline DimFactor dim_factor(double s, double prec, int a, int b, bool want_grad) {
    const int m = a + b;
    const double sqg = std::sqrt(prec);
    const double tau = sqg * s;
    std::array<double, 2 * kMaxOrder + 2> he{};
    hermite_upto(tau, m + 1, he.data());
    const double e = std::exp(-0.5 * tau * tau);
    const double sign = (a % 2 == 0) ? 1.0 : -1.0;
    const double fm = std::pow(sqg, m) * sign * he[static_cast<std::size_t>(m)] * e;
    DimFactor out{fm, 0.0};
    if (want_grad) {
        const double fm1 = std::pow(sqg, m + 1) * sign * he[static_cast<std::size_t>(m) + 1] * e;
        out.dlog_prec = 0.5 * m * fm - 0.5 * s * fm1;
    }
    return out;
}

// Shared implementation: kernel derivative value and, when dlog_prec is
// non-null, its derivatives with respect to every log precision.
inline double rbf_deriv_impl(const double* x, const double* x2, const KernelHyper& h,
                             const MultiIndex& a, const MultiIndex& b, double* dlog_prec) {
    const int dim = h.dim();
    std::array<double, kMaxKernelDims> f{};
    std::array<double, kMaxKernelDims> g{};
    double value = h.amp2();
    for (int d = 0; d < dim; ++d) {
        const DimFactor fd =
            dim_factor(x[d] - x2[d], h.prec(d), a.order(d), b.order(d), dlog_prec != nullptr);
        f[static_cast<std::size_t>(d)] = fd.value;
        g[static_cast<std::size_t>(d)] = fd.dlog_prec;
        value *= fd.value;
    }
    if (dlog_prec != nullptr) {
        for (int d = 0; d < dim; ++d) {
            double prod = h.amp2() * g[static_cast<std::size_t>(d)];
            for (int e = 0; e < dim; ++e) {
                if (e != d) prod *= f[static_cast<std::size_t>(e)];
            }
            dlog_prec[d] = prod;
        }
    }
    return value;
}

inline void check_pair(const Point& x, const Point& x2, const KernelHyper& h) {
    if (x.size() != h.dim() || x2.size() != h.dim()) {
        throw DimensionError("kernel arguments vs hyperparameters");
    }
    if (h.dim() > kMaxKernelDims) throw DimensionError("too many kernel dimensions");
}

inline void check_orders(const MultiIndex& a, const MultiIndex& b, int dim) {
    if (a.dim() != dim || b.dim() != dim) throw DimensionError("multi-index dimension");
    if (a.total() + b.total() > 2 * kMaxOrder) {
        throw OrderError("combined order " + std::to_string(a.total() + b.total()) +
                         " exceeds " + std::to_string(2 * kMaxOrder));
    }
}

}  // namespace detail

inline double rbf(const Point& x, const Point& x2, const KernelHyper& h) {
    detail::check_pair(x, x2, h);
    double q = 0.0;
    for (int d = 0; d < h.dim(); ++d) {
        const double s = x[d] - x2[d];
        q += h.prec(d) * s * s;
    }
    return h.amp2() * std::exp(-0.5 * q);
}

// d^a_x d^b_x' k(x, x'), exact via the per-dimension Hermite recurrence.
// Convention: the minus sign sits on first-argument odd derivatives, i.e.
// d/dx k = -k * prec * (x - x') in one dimension.
inline double rbf_deriv(const Point& x, const Point& x2, const KernelHyper& h,
                        const MultiIndex& a, const MultiIndex& b) {
    detail::check_pair(x, x2, h);
    detail::check_orders(a, b, h.dim());
    return detail::rbf_deriv_impl(x.data(), x2.data(), h, a, b, nullptr);
}

// Derivative of rbf_deriv with respect to one log-hyperparameter.
inline double rbf_deriv_dlog(const Point& x, const Point& x2, const KernelHyper& h,
                             const MultiIndex& a, const MultiIndex& b, const HyperId& which) {
    detail::check_pair(x, x2, h);
    detail::check_orders(a, b, h.dim());
    if (which.kind == HyperId::Kind::Amp2) {
        return detail::rbf_deriv_impl(x.data(), x2.data(), h, a, b, nullptr);
    }
    if (which.dim < 0 || which.dim >= h.dim()) throw ArgumentError("unknown hyperparameter id");
    std::array<double, detail::kMaxKernelDims> grad{};
    detail::rbf_deriv_impl(x.data(), x2.data(), h, a, b, grad.data());
    return grad[static_cast<std::size_t>(which.dim)];
}

// L1_x L2_x' k(x, x'): cross-covariance induced by applying linear operators
// to each kernel argument. Pass LinearOperator::identity(D) for the plain side.
inline double op_kernel(const LinearOperator& L1, const LinearOperator& L2, const Point& x,
                        const Point& x2, const KernelHyper& h, const ParamVector& theta,
                        const FrozenFields& frozen) {
    if (L1.dim != h.dim() || L2.dim != h.dim()) throw DimensionError("operator vs kernel");
    double sum = 0.0;
    for (const auto& t1 : L1.terms) {
        const double c1 = t1.coeff(x, theta, frozen);
        for (const auto& t2 : L2.terms) {
            const double c2 = t2.coeff(x2, theta, frozen);
            sum += c1 * c2 * rbf_deriv(x, x2, h, t1.index, t2.index);
        }
    }
    return sum;
}

namespace detail {

// Operator coefficients evaluated once per point; entries (i, t).
inline Eigen::MatrixXd coeff_table(const LinearOperator& L, const Eigen::MatrixXd& X,
                                   const ParamVector& theta, const FrozenFields& frozen) {
    const int n = static_cast<int>(X.rows());
    const int t = static_cast<int>(L.terms.size());
    Eigen::MatrixXd C(n, t);
    Point xi(X.cols());
    for (int i = 0; i < n; ++i) {
        xi = X.row(i).transpose();
        for (int k = 0; k < t; ++k) C(i, k) = L.terms[static_cast<std::size_t>(k)].coeff(xi, theta, frozen);
    }
    return C;
}

}  // namespace detail

// Cross-covariance matrix between point sets X1, X2 (rows are points).
inline Eigen::MatrixXd gram(const LinearOperator& L1, const LinearOperator& L2,
                            const Eigen::MatrixXd& X1, const Eigen::MatrixXd& X2,
                            const KernelHyper& h, const ParamVector& theta,
                            const FrozenFields& frozen) {
    if (L1.dim != h.dim() || L2.dim != h.dim()) throw DimensionError("operator vs kernel");
    if (X1.cols() != h.dim() || X2.cols() != h.dim()) throw DimensionError("points vs kernel");

    const Eigen::MatrixXd C1 = detail::coeff_table(L1, X1, theta, frozen);
    const Eigen::MatrixXd C2 = detail::coeff_table(L2, X2, theta, frozen);
    // Column-per-point layout keeps the inner loops on contiguous memory.
    const Eigen::MatrixXd X1t = X1.transpose();
    const Eigen::MatrixXd X2t = X2.transpose();

    Eigen::MatrixXd K(X1.rows(), X2.rows());
    for (int i = 0; i < X1.rows(); ++i) {
        for (int j = 0; j < X2.rows(); ++j) {
            double acc = 0.0;
            for (int t1 = 0; t1 < C1.cols(); ++t1) {
                for (int t2 = 0; t2 < C2.cols(); ++t2) {
                    acc += C1(i, t1) * C2(j, t2) *
                           detail::rbf_deriv_impl(X1t.col(i).data(), X2t.col(j).data(), h,
                                                  L1.terms[static_cast<std::size_t>(t1)].index,
                                                  L2.terms[static_cast<std::size_t>(t2)].index,
                                                  nullptr);
                }
            }
            K(i, j) = acc;
        }
    }
    return K;
}

// Elementwise derivative of gram with respect to one log-hyperparameter.
inline Eigen::MatrixXd gram_grad(const LinearOperator& L1, const LinearOperator& L2,
                                 const Eigen::MatrixXd& X1, const Eigen::MatrixXd& X2,
                                 const KernelHyper& h, const ParamVector& theta,
                                 const FrozenFields& frozen, const HyperId& which) {
    if (which.kind == HyperId::Kind::Amp2) {
        // Every entry is proportional to amp2, so the log-amp2 derivative is
        // the matrix itself.
        return gram(L1, L2, X1, X2, h, theta, frozen);
    }
    if (which.dim < 0 || which.dim >= h.dim()) throw ArgumentError("unknown hyperparameter id");
    const Eigen::MatrixXd C1 = detail::coeff_table(L1, X1, theta, frozen);
    const Eigen::MatrixXd C2 = detail::coeff_table(L2, X2, theta, frozen);
    const Eigen::MatrixXd X1t = X1.transpose();
    const Eigen::MatrixXd X2t = X2.transpose();

    Eigen::MatrixXd G(X1.rows(), X2.rows());
    std::array<double, detail::kMaxKernelDims> grad{};
    for (int i = 0; i < X1.rows(); ++i) {
        for (int j = 0; j < X2.rows(); ++j) {
            double acc = 0.0;
            for (int t1 = 0; t1 < C1.cols(); ++t1) {
                for (int t2 = 0; t2 < C2.cols(); ++t2) {
                    detail::rbf_deriv_impl(X1t.col(i).data(), X2t.col(j).data(), h,
                                           L1.terms[static_cast<std::size_t>(t1)].index,
                                           L2.terms[static_cast<std::size_t>(t2)].index,
                                           grad.data());
                    acc += C1(i, t1) * C2(j, t2) * grad[static_cast<std::size_t>(which.dim)];
                }
            }
            G(i, j) = acc;
        }
    }
    return G;
}

}  // namespace gprc
