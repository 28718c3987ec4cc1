#pragma once

#include <Eigen/Core>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "gprc/gp.hpp"
#include "gprc/inference.hpp"
#include "gprc/linearization.hpp"
#include "gprc/operators.hpp"

namespace gprc {

inline Eigen::MatrixXd even_grid_1d(double lo, double hi, int count) {
    if (count < 1) throw ArgumentError("grid needs at least one point");
    Eigen::MatrixXd g(count, 1);
    for (int i = 0; i < count; ++i) {
        g(i, 0) = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (count - 1);
    }
    return g;
}

inline Eigen::MatrixXd lattice_2d(const Domain& window, int n0, int n1) {
    if (window.dim() != 2) throw DimensionError("lattice expects a 2-D window");
    Eigen::MatrixXd g(n0 * n1, 2);
    int row = 0;
    for (int i = 0; i < n0; ++i) {
        const double a = n0 == 1 ? window.bounds[0].first
                                 : window.bounds[0].first + window.diameter(0) * i / (n0 - 1.0);
        for (int j = 0; j < n1; ++j) {
            const double b = n1 == 1 ? window.bounds[1].first
                                     : window.bounds[1].first + window.diameter(1) * j / (n1 - 1.0);
            g(row, 0) = a;
            g(row, 1) = b;
            ++row;
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Damped linear oscillator u'' + theta1 u' + theta2 u = 0, closed form.
// ---------------------------------------------------------------------------

struct OscillatorState {
    double u = 0.0;
    double du = 0.0;
    double ddu = 0.0;
};

inline OscillatorState oscillator_solution(const ParamVector& theta, double u0, double v0,
                                           double t) {
    const double th1 = theta[0];
    const double th2 = theta[1];
    const double disc = th1 * th1 - 4.0 * th2;
    const double lambda = 0.5 * th1;
    OscillatorState s;
    if (disc < -1e-14) {  // underdamped
        const double omega = 0.5 * std::sqrt(-disc);
        const double A = u0;
        const double B = (v0 + lambda * u0) / omega;
        const double e = std::exp(-lambda * t);
        const double c = std::cos(omega * t);
        const double sn = std::sin(omega * t);
        s.u = e * (A * c + B * sn);
        s.du = e * ((-lambda * A + omega * B) * c + (-lambda * B - omega * A) * sn);
    } else if (disc > 1e-14) {  // overdamped
        const double root = std::sqrt(disc);
        const double r1 = 0.5 * (-th1 + root);
        const double r2 = 0.5 * (-th1 - root);
        const double A = (v0 - u0 * r2) / (r1 - r2);
        const double B = u0 - A;
        s.u = A * std::exp(r1 * t) + B * std::exp(r2 * t);
        s.du = A * r1 * std::exp(r1 * t) + B * r2 * std::exp(r2 * t);
    } else {  // critically damped
        const double A = u0;
        const double B = v0 + lambda * u0;
        const double e = std::exp(-lambda * t);
        s.u = e * (A + B * t);
        s.du = e * (B - lambda * A - lambda * B * t);
    }
    s.ddu = -th1 * s.du - th2 * s.u;
    return s;
}

// ---------------------------------------------------------------------------
// Classical fourth-order Runge-Kutta on a fixed time grid.
// ---------------------------------------------------------------------------

using OdeRhs = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;

inline Eigen::MatrixXd rk4_solve(const OdeRhs& f, const Eigen::VectorXd& y0,
                                 const Eigen::VectorXd& t_grid) {
    const int steps = static_cast<int>(t_grid.size());
    if (steps < 1) throw ArgumentError("empty time grid");
    for (int i = 1; i < steps; ++i) {
        if (!(t_grid[i] > t_grid[i - 1])) throw ArgumentError("time grid must increase");
    }
    const int dim = static_cast<int>(y0.size());
    Eigen::MatrixXd traj(steps, dim);
    traj.row(0) = y0.transpose();
    Eigen::VectorXd y = y0;
    for (int i = 1; i < steps; ++i) {
        const double t = t_grid[i - 1];
        const double h = t_grid[i] - t_grid[i - 1];
        const Eigen::VectorXd k1 = f(t, y);
        const Eigen::VectorXd k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
        const Eigen::VectorXd k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
        const Eigen::VectorXd k4 = f(t + h, y + h * k3);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!y.allFinite()) throw SolverBlowupError("ODE state became non-finite",
                                                    static_cast<std::size_t>(i));
        traj.row(i) = y.transpose();
    }
    return traj;
}

inline OdeRhs oscillator_rhs(const ParamVector& theta) {
    return [theta](double, const Eigen::VectorXd& y) {
        Eigen::VectorXd dy(2);
        dy[0] = y[1];
        dy[1] = -theta[0] * y[1] - theta[1] * y[0];
        return dy;
    };
}

inline OdeRhs vdp_rhs(double mu) {
    return [mu](double, const Eigen::VectorXd& y) {
        Eigen::VectorXd dy(2);
        dy[0] = y[1];
        dy[1] = mu * (1.0 - y[0] * y[0]) * y[1] - y[0];
        return dy;
    };
}

// ---------------------------------------------------------------------------
// KdV u_t + theta1 u u_x + theta2 u_xxx = 0 on a periodic interval,
// integrating-factor RK4 in Fourier space (exact linear dispersion).
// ---------------------------------------------------------------------------

struct KdvField {
    Eigen::VectorXd x;  // nx periodic nodes, right endpoint excluded
    Eigen::VectorXd t;  // nt+1 snapshot times starting at 0
    Eigen::MatrixXd u;  // (nt+1) x nx
    double x_lo = 0.0;
    double x_hi = 0.0;

    int nx() const { return static_cast<int>(x.size()); }
    int nt() const { return static_cast<int>(t.size()) - 1; }
    double dx() const { return (x_hi - x_lo) / nx(); }
    double dt() const { return t[1] - t[0]; }

    double mass(int ti) const { return u.row(ti).sum() * dx(); }

    int nearest_x(double xq) const {
        const int i = static_cast<int>(std::lround((xq - x_lo) / dx()));
        return std::min(std::max(i, 0), nx() - 1);
    }
    int nearest_t(double tq) const {
        const int i = static_cast<int>(std::lround(tq / dt()));
        return std::min(std::max(i, 0), nt());
    }

    // Spectral x-derivative of one snapshot.
    Eigen::VectorXd deriv_x(int ti, int order) const {
        Eigen::FFT<double> fft;
        const int n = nx();
        std::vector<std::complex<double>> spec(static_cast<std::size_t>(n));
        std::vector<std::complex<double>> row(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) row[static_cast<std::size_t>(i)] = u(ti, i);
        fft.fwd(spec, row);
        const double scale = 2.0 * std::numbers::pi / (x_hi - x_lo);
        for (int j = 0; j < n; ++j) {
            double k = (j <= n / 2 ? j : j - n) * scale;
            if (j == n / 2) k = 0.0;  // drop the Nyquist mode for odd derivatives
            spec[static_cast<std::size_t>(j)] *=
                std::pow(std::complex<double>(0.0, k), order);
        }
        fft.inv(row, spec);
        Eigen::VectorXd out(n);
        for (int i = 0; i < n; ++i) out[i] = row[static_cast<std::size_t>(i)].real();
        return out;
    }

    // Sixth-order central time derivative; needs three snapshots per side.
    double deriv_t(int ti, int xi) const {
        if (ti < 3 || ti > nt() - 3) throw ArgumentError("time stencil out of range");
        return (-u(ti - 3, xi) + 9.0 * u(ti - 2, xi) - 45.0 * u(ti - 1, xi) +
                45.0 * u(ti + 1, xi) - 9.0 * u(ti + 2, xi) + u(ti + 3, xi)) /
               (60.0 * dt());
    }

    // Bilinear interpolation (periodic in x).
    double value_at(double xq, double tq) const {
        const double L = x_hi - x_lo;
        double xr = std::fmod(xq - x_lo, L);
        if (xr < 0) xr += L;
        const double fx = xr / dx();
        const int i0 = static_cast<int>(std::floor(fx)) % nx();
        const int i1 = (i0 + 1) % nx();
        const double ax = fx - std::floor(fx);
        double ft = std::min(std::max(tq / dt(), 0.0), static_cast<double>(nt()));
        const int j0 = std::min(static_cast<int>(std::floor(ft)), nt() - 1);
        const int j1 = j0 + 1;
        const double at = ft - j0;
        return (1 - at) * ((1 - ax) * u(j0, i0) + ax * u(j0, i1)) +
               at * ((1 - ax) * u(j1, i0) + ax * u(j1, i1));
    }
};

// Exact traveling-wave solution used to validate the spectral integrator.
inline double kdv_soliton(double c, double x0, double theta1, double theta2, double x) {
    const double b = 0.5 * std::sqrt(c / theta2);
    const double sech = 1.0 / std::cosh(b * (x - x0));
    return (3.0 * c / theta1) * sech * sech;
}

inline KdvField kdv_solve(const ParamVector& theta, const std::function<double(double)>& u0,
                          int nx, double x_lo, double x_hi, double t_end, int nt) {
    if (nx < 8 || nt < 1) throw ArgumentError("KdV grid too small");
    if (!(theta[1] > 0.0)) throw ArgumentError("dispersion coefficient must be positive");
    const double theta1 = theta[0];
    const double theta2 = theta[1];
    const double L = x_hi - x_lo;
    const double dx = L / nx;

    KdvField field;
    field.x_lo = x_lo;
    field.x_hi = x_hi;
    field.x.resize(nx);
    for (int i = 0; i < nx; ++i) field.x[i] = x_lo + i * dx;
    field.t.resize(nt + 1);
    for (int j = 0; j <= nt; ++j) field.t[j] = t_end * j / nt;
    field.u.resize(nt + 1, nx);

    using Cplx = std::complex<double>;
    std::vector<double> k(static_cast<std::size_t>(nx));
    const double kscale = 2.0 * std::numbers::pi / L;
    for (int j = 0; j < nx; ++j) {
        double kj = (j <= nx / 2 ? j : j - nx) * kscale;
        if (j == nx / 2) kj = 0.0;
        k[static_cast<std::size_t>(j)] = kj;
    }

    Eigen::FFT<double> fft;
    std::vector<Cplx> v(static_cast<std::size_t>(nx)), buf(static_cast<std::size_t>(nx)),
        w(static_cast<std::size_t>(nx));
    for (int i = 0; i < nx; ++i) {
        const double val = u0(field.x[i]);
        field.u(0, i) = val;
        buf[static_cast<std::size_t>(i)] = val;
    }
    fft.fwd(v, buf);

    const double u_max0 = field.u.row(0).cwiseAbs().maxCoeff();
    const int cutoff = nx / 3;  // 2/3-rule dealiasing of the quadratic term

    // h * N(v): nonlinear advection, u u_x written as (u^2/2)_x.
    auto nonlinear = [&](const std::vector<Cplx>& vin, double h, std::vector<Cplx>& out) {
        fft.inv(buf, vin);
        for (int i = 0; i < nx; ++i) {
            const double ur = buf[static_cast<std::size_t>(i)].real();
            w[static_cast<std::size_t>(i)] = ur * ur;
        }
        fft.fwd(out, w);
        for (int j = 0; j < nx; ++j) {
            const int jw = j <= nx / 2 ? j : j - nx;
            if (std::abs(jw) >= cutoff) {
                out[static_cast<std::size_t>(j)] = 0.0;
            } else {
                out[static_cast<std::size_t>(j)] *=
                    Cplx(0.0, -0.5 * theta1 * h * k[static_cast<std::size_t>(j)]);
            }
        }
    };

    std::vector<Cplx> E(static_cast<std::size_t>(nx)), E2(static_cast<std::size_t>(nx));
    std::vector<Cplx> a(static_cast<std::size_t>(nx)), b(static_cast<std::size_t>(nx)),
        c(static_cast<std::size_t>(nx)), d(static_cast<std::size_t>(nx)),
        tmp(static_cast<std::size_t>(nx));

    const double dt_snap = t_end / nt;
    for (int snap = 1; snap <= nt; ++snap) {
        const double u_max =
            std::max(field.u.row(snap - 1).cwiseAbs().maxCoeff(), 1e-12);
        if (!field.u.row(snap - 1).allFinite() || u_max > 10.0 * std::max(u_max0, 1e-12)) {
            throw SolverBlowupError("KdV field grew beyond the stability heuristic",
                                    static_cast<std::size_t>(snap - 1));
        }
        const double k_adv = kscale * cutoff;
        const double dt_stable = 1.0 / (k_adv * std::abs(theta1) * u_max + 1e-12);
        const int substeps = std::max(1, static_cast<int>(std::ceil(dt_snap / dt_stable)));
        const double h = dt_snap / substeps;
        for (std::size_t j = 0; j < static_cast<std::size_t>(nx); ++j) {
            const double phase = theta2 * k[j] * k[j] * k[j];  // L = i theta2 k^3
            E[j] = std::exp(Cplx(0.0, phase * h * 0.5));
            E2[j] = E[j] * E[j];
        }
        for (int s = 0; s < substeps; ++s) {
            nonlinear(v, h, a);
            for (std::size_t j = 0; j < v.size(); ++j) tmp[j] = E[j] * (v[j] + 0.5 * a[j]);
            nonlinear(tmp, h, b);
            for (std::size_t j = 0; j < v.size(); ++j) tmp[j] = E[j] * v[j] + 0.5 * b[j];
            nonlinear(tmp, h, c);
            for (std::size_t j = 0; j < v.size(); ++j) tmp[j] = E2[j] * v[j] + E[j] * c[j];
            nonlinear(tmp, h, d);
            for (std::size_t j = 0; j < v.size(); ++j) {
                v[j] = E2[j] * v[j] +
                       (E2[j] * a[j] + 2.0 * E[j] * (b[j] + c[j]) + d[j]) / 6.0;
            }
        }
        fft.inv(buf, v);
        for (int i = 0; i < nx; ++i) field.u(snap, i) = buf[static_cast<std::size_t>(i)].real();
        // Re-project onto a real field to stop imaginary round-off drifting.
        for (int i = 0; i < nx; ++i) buf[static_cast<std::size_t>(i)] = field.u(snap, i);
        fft.fwd(v, buf);
    }
    if (!field.u.allFinite()) {
        throw SolverBlowupError("KdV field became non-finite", static_cast<std::size_t>(nt));
    }
    return field;
}

// ---------------------------------------------------------------------------
// Noisy observations y = u(x) + N(0, noise_var), deterministic per seed.
// ---------------------------------------------------------------------------

inline Dataset make_dataset(const std::function<double(const Point&)>& field,
                            const Eigen::MatrixXd& locations, const Domain& domain,
                            double noise_var, std::uint64_t seed) {
    if (noise_var < 0.0) throw ArgumentError("noise variance must be nonnegative");
    Dataset data;
    data.X = locations;
    data.domain = domain;
    data.y.resize(locations.rows());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double sd = std::sqrt(noise_var);
    for (int i = 0; i < locations.rows(); ++i) {
        data.y[i] = field(locations.row(i).transpose()) + sd * gauss(rng);
    }
    return data;
}

// ---------------------------------------------------------------------------
// Built-in experiment setups.
// ---------------------------------------------------------------------------

struct ProblemConfig {
    std::string name;
    ParamVector true_theta;
    Domain domain;  // where observations and collocation points live
    Eigen::VectorXd init_state;
    int obs_count = 0;
    double noise_var = 0.1;
    NoiseConfig noise;
    ChiConfig chi;
    PicardConfig picard;
    double alpha = 100.0;
    Eigen::VectorXd proposal_sd;
    int n_samples = 5000;
    Prior prior;
    ParamVector theta_init;
    Eigen::MatrixXd colloc;
    double burn_in_frac = 0.2;
    // reference-solver settings
    double solver_step = 1e-3;
    int kdv_nx = 512;
    int kdv_nt = 200;
    double kdv_x_lo = -30.0;
    double kdv_x_hi = 30.0;
    double kdv_t_end = 20.0;
};

struct BuiltinProblem {
    EquationSpec eq;
    ProblemConfig cfg;
};

namespace detail {

inline EquationSpec oscillator_equation() {
    EquationSpec eq;
    eq.param_dim = 2;
    eq.dim = 1;
    eq.dim_names = {"t"};
    const MultiIndex u({0}), du({1}), ddu({2});
    eq.derivative_functionals = {u, du, ddu};
    eq.is_linear = true;
    eq.residual = [u, du, ddu](const Values& v, const Point&, const ParamVector& th) {
        return value_of(v, ddu) + th[0] * value_of(v, du) + th[1] * value_of(v, u);
    };
    eq.linearize = [u, du, ddu](const ParamVector& th, const FrozenFields&) {
        return LinearOperator(
            {constant_term(1.0, ddu), constant_term(th[0], du), constant_term(th[1], u)}, 1);
    };
    return eq;
}

inline EquationSpec vdp_equation() {
    EquationSpec eq;
    eq.param_dim = 1;
    eq.dim = 1;
    eq.dim_names = {"t"};
    const MultiIndex u({0}), du({1}), ddu({2});
    eq.derivative_functionals = {u, du, ddu};
    eq.is_linear = false;
    eq.residual = [u, du, ddu](const Values& v, const Point&, const ParamVector& th) {
        const double uu = value_of(v, u);
        return value_of(v, ddu) - th[0] * (1.0 - uu * uu) * value_of(v, du) + uu;
    };
    // Keep u' (the highest factor of the nonlinear term) and freeze u.
    eq.linearize = [u, du, ddu](const ParamVector& th, const FrozenFields& frozen) {
        const auto it = frozen.find("u");
        if (it == frozen.end()) throw MissingFieldError("frozen field 'u'");
        const auto u0 = it->second;
        const double mu = th[0];
        OperatorTerm damping{[u0, mu](const Point& x, const ParamVector&, const FrozenFields&) {
                                 const double v = u0(x);
                                 return -mu * (1.0 - v * v);
                             },
                             du};
        return LinearOperator({constant_term(1.0, ddu), damping, constant_term(1.0, u)}, 1);
    };
    return eq;
}

inline EquationSpec kdv_equation() {
    EquationSpec eq;
    eq.param_dim = 2;
    eq.dim = 2;
    eq.dim_names = {"x", "t"};
    const MultiIndex u({0, 0}), ux({1, 0}), uxxx({3, 0}), ut({0, 1});
    eq.derivative_functionals = {u, ux, uxxx, ut};
    eq.is_linear = false;
    eq.residual = [u, ux, uxxx, ut](const Values& v, const Point&, const ParamVector& th) {
        return value_of(v, ut) + th[0] * value_of(v, u) * value_of(v, ux) +
               th[1] * value_of(v, uxxx);
    };
    // Keep u_x in the advection product and freeze u.
    eq.linearize = [ux, uxxx, ut](const ParamVector& th, const FrozenFields& frozen) {
        const auto it = frozen.find("u");
        if (it == frozen.end()) throw MissingFieldError("frozen field 'u'");
        const auto u0 = it->second;
        const double th1 = th[0];
        OperatorTerm advection{[u0, th1](const Point& x, const ParamVector&, const FrozenFields&) {
                                   return th1 * u0(x);
                               },
                               ux};
        return LinearOperator({constant_term(1.0, ut), advection, constant_term(th[1], uxxx)}, 2);
    };
    return eq;
}

}  // namespace detail

inline BuiltinProblem builtin(const std::string& name) {
    BuiltinProblem p;
    if (name == "oscillator") {
        p.eq = detail::oscillator_equation();
        auto& c = p.cfg;
        c.name = name;
        c.true_theta = Eigen::Vector2d(1.0, 3.0);
        c.domain.bounds = {{0.0, 10.0}};
        c.init_state = Eigen::Vector2d(1.0, 0.0);
        c.obs_count = 21;
        c.noise_var = 0.1;
        c.noise = {0.1, 10.0, true};
        c.chi = {1, Eigen::VectorXd::Zero(1), c.domain};
        c.alpha = 100.0;
        c.proposal_sd = Eigen::Vector2d(0.6, 0.6);
        c.n_samples = 5000;
        c.prior = {Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(5.0, 5.0)};
        c.theta_init = Eigen::Vector2d(2.5, 2.5);
        c.colloc = even_grid_1d(0.0, 10.0, 200);
        c.picard = {1, 1e-3, c.colloc};
    } else if (name == "vdp") {
        p.eq = detail::vdp_equation();
        auto& c = p.cfg;
        c.name = name;
        c.true_theta = Eigen::VectorXd::Constant(1, 0.5);
        c.domain.bounds = {{0.0, 20.0}};
        c.init_state = Eigen::Vector2d(2.0, 0.0);
        c.obs_count = 41;
        c.noise_var = 0.01;
        c.noise = {0.01, 0.1, true};
        c.chi = {10, Eigen::VectorXd::Constant(1, 1.0), c.domain};
        c.alpha = 100.0;
        c.proposal_sd = Eigen::VectorXd::Constant(1, 0.6);
        c.n_samples = 5000;
        c.prior = {Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 2.0)};
        c.theta_init = Eigen::VectorXd::Constant(1, 1.0);
        c.colloc = even_grid_1d(0.0, 20.0, 200);
        c.picard = {1, 1e-3, c.colloc};
    } else if (name == "kdv") {
        p.eq = detail::kdv_equation();
        auto& c = p.cfg;
        c.name = name;
        c.true_theta = Eigen::Vector2d(6.0, 1.0);
        c.domain.bounds = {{-21.0, 26.0}, {15.0, 20.0}};
        c.obs_count = 200;
        c.noise_var = 0.1;
        c.noise = {0.1, 1.0, true};
        c.chi = {1, Eigen::VectorXd::Zero(2), c.domain};
        c.alpha = 100.0;
        c.proposal_sd = Eigen::Vector2d(0.6, 0.6);
        c.n_samples = 5000;
        c.prior = {Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(10.0, 3.0)};
        c.theta_init = Eigen::Vector2d(5.0, 1.5);
        c.colloc = lattice_2d(c.domain, 20, 20);
        c.picard = {1, 1e-3, c.colloc};
    } else {
        throw ArgumentError("unknown problem '" + name + "'");
    }
    return p;
}

// Two-soliton initial condition used for the built-in KdV dataset. Periodic
// images keep the profile smooth across the domain boundary, which matters
// because third derivatives amplify any seam by k^3.
inline std::function<double(double)> kdv_two_soliton_ic(const ParamVector& theta, double x_lo,
                                                        double x_hi) {
    const double L = x_hi - x_lo;
    return [theta, L](double x) {
        double v = 0.0;
        for (int image = -1; image <= 1; ++image) {
            const double xs = x + image * L;
            v += kdv_soliton(2.0, -25.0, theta[0], theta[1], xs) +
                 kdv_soliton(1.0, -15.0, theta[0], theta[1], xs);
        }
        return v;
    };
}

// Clean reference solution plus derivative access for oracle checks.
struct TruthField {
    std::function<double(const Point&)> u;
    // Derivative of u at x; availability depends on the problem family.
    std::function<double(const Point&, const MultiIndex&)> deriv;
};

namespace detail {

inline TruthField ode_truth_from_rk4(const Eigen::VectorXd& t_grid, const Eigen::MatrixXd& traj,
                                     const std::function<double(double, double, double)>& acc) {
    auto shared_t = std::make_shared<Eigen::VectorXd>(t_grid);
    auto shared_y = std::make_shared<Eigen::MatrixXd>(traj);
    auto interp = [shared_t, shared_y](double t, int col) {
        const auto& ts = *shared_t;
        const auto& ys = *shared_y;
        const int n = static_cast<int>(ts.size());
        const double h = ts[1] - ts[0];
        int i = static_cast<int>(std::floor((t - ts[0]) / h));
        i = std::min(std::max(i, 0), n - 2);
        const double a = (t - ts[i]) / h;
        return (1.0 - a) * ys(i, col) + a * ys(i + 1, col);
    };
    TruthField f;
    f.u = [interp](const Point& x) { return interp(x[0], 0); };
    f.deriv = [interp, acc](const Point& x, const MultiIndex& idx) {
        const double u = interp(x[0], 0);
        const double du = interp(x[0], 1);
        switch (idx.order(0)) {
            case 0: return u;
            case 1: return du;
            case 2: return acc(x[0], u, du);
            default: throw OrderError("ODE truth supplies derivatives up to u''");
        }
    };
    return f;
}

}  // namespace detail

inline TruthField truth_field(const BuiltinProblem& p) {
    const auto& c = p.cfg;
    if (c.name == "oscillator") {
        const ParamVector th = c.true_theta;
        const double u0 = c.init_state[0];
        const double v0 = c.init_state[1];
        TruthField f;
        f.u = [th, u0, v0](const Point& x) { return oscillator_solution(th, u0, v0, x[0]).u; };
        f.deriv = [th, u0, v0](const Point& x, const MultiIndex& idx) {
            const OscillatorState s = oscillator_solution(th, u0, v0, x[0]);
            switch (idx.order(0)) {
                case 0: return s.u;
                case 1: return s.du;
                case 2: return s.ddu;
                default: throw OrderError("oscillator truth supplies derivatives up to u''");
            }
        };
        return f;
    }
    if (c.name == "vdp") {
        const double mu = c.true_theta[0];
        const double t_end = c.domain.bounds[0].second;
        const int steps = static_cast<int>(std::lround(t_end / c.solver_step)) + 1;
        Eigen::VectorXd t_grid(steps);
        for (int i = 0; i < steps; ++i) t_grid[i] = t_end * i / (steps - 1.0);
        const Eigen::MatrixXd traj = rk4_solve(vdp_rhs(mu), c.init_state, t_grid);
        return detail::ode_truth_from_rk4(
            t_grid, traj,
            [mu](double, double u, double du) { return mu * (1.0 - u * u) * du - u; });
    }
    if (c.name == "kdv") {
        auto field = std::make_shared<KdvField>(kdv_solve(c.true_theta,
                                                          kdv_two_soliton_ic(c.true_theta, c.kdv_x_lo, c.kdv_x_hi),
                                                          c.kdv_nx, c.kdv_x_lo, c.kdv_x_hi,
                                                          c.kdv_t_end, c.kdv_nt));
        TruthField f;
        f.u = [field](const Point& x) { return field->value_at(x[0], x[1]); };
        // Derivatives are exact at grid nodes: spectral in x, high-order
        // central differences in t.
        f.deriv = [field](const Point& x, const MultiIndex& idx) {
            const int xi = field->nearest_x(x[0]);
            const int ti = field->nearest_t(x[1]);
            if (idx.order(1) == 0) {
                if (idx.order(0) == 0) return field->u(ti, xi);
                return field->deriv_x(ti, idx.order(0))[xi];
            }
            if (idx.order(1) == 1 && idx.order(0) == 0) return field->deriv_t(ti, xi);
            throw OrderError("KdV truth supplies u, x-derivatives, and u_t");
        };
        return f;
    }
    throw ArgumentError("unknown problem '" + c.name + "'");
}

// Observation locations of the built-in experiment plans.
inline Eigen::MatrixXd observation_locations(const BuiltinProblem& p, std::uint64_t seed) {
    const auto& c = p.cfg;
    if (c.name == "oscillator" || c.name == "vdp") {
        return even_grid_1d(c.domain.bounds[0].first, c.domain.bounds[0].second, c.obs_count);
    }
    if (c.name == "kdv") {
        const KdvField field = kdv_solve(c.true_theta, kdv_two_soliton_ic(c.true_theta, c.kdv_x_lo, c.kdv_x_hi),
                                         c.kdv_nx, c.kdv_x_lo, c.kdv_x_hi, c.kdv_t_end,
                                         c.kdv_nt);
        std::vector<std::pair<int, int>> nodes;
        for (int ti = 0; ti <= field.nt(); ++ti) {
            if (field.t[ti] < c.domain.bounds[1].first - 1e-9 ||
                field.t[ti] > c.domain.bounds[1].second + 1e-9) {
                continue;
            }
            for (int xi = 0; xi < field.nx(); ++xi) {
                if (field.x[xi] < c.domain.bounds[0].first - 1e-9 ||
                    field.x[xi] > c.domain.bounds[0].second + 1e-9) {
                    continue;
                }
                nodes.emplace_back(ti, xi);
            }
        }
        if (static_cast<int>(nodes.size()) < c.obs_count) {
            throw ArgumentError("observation window has too few solver nodes");
        }
        std::mt19937_64 rng(seed);
        std::shuffle(nodes.begin(), nodes.end(), rng);
        Eigen::MatrixXd loc(c.obs_count, 2);
        for (int i = 0; i < c.obs_count; ++i) {
            loc(i, 0) = field.x[nodes[static_cast<std::size_t>(i)].second];
            loc(i, 1) = field.t[nodes[static_cast<std::size_t>(i)].first];
        }
        return loc;
    }
    throw ArgumentError("unknown problem '" + c.name + "'");
}

// Noisy dataset following the built-in observation plan.
inline Dataset problem_dataset(const BuiltinProblem& p, std::uint64_t seed) {
    const TruthField truth = truth_field(p);
    const Eigen::MatrixXd locations = observation_locations(p, seed);
    return make_dataset(truth.u, locations, p.cfg.domain, p.cfg.noise_var, seed + 1);
}

}  // namespace gprc
