#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gprc/errors.hpp"
#include "gprc/kernels.hpp"
#include "gprc/multi_index.hpp"
#include "gprc/operators.hpp"
#include "gprc/optimize.hpp"
#include "gprc/parallel.hpp"

namespace gprc {

// Relative diagonal jitter applied before every factorization.
inline constexpr double kJitterRel = 1e-8;
// Posterior variances in [-kVarTol, 0) are rounded to zero; anything more
// negative signals a genuine conditioning failure.
inline constexpr double kVarTol = 1e-9;

struct Dataset {
    Eigen::MatrixXd X;  // n x D observation locations
    Eigen::VectorXd y;  // noisy observations
    Domain domain;

    int n() const { return static_cast<int>(X.rows()); }
    int dim() const { return static_cast<int>(X.cols()); }

    void validate() const {
        if (n() < 1) throw ArgumentError("dataset needs at least one observation");
        if (y.size() != n()) throw DimensionError("observations vs locations");
        if (domain.dim() != dim()) throw DimensionError("domain vs locations");
        for (int i = 0; i < n(); ++i) {
            if (!std::isfinite(y[i])) throw ArgumentError("non-finite observation");
            if (!domain.contains(X.row(i).transpose(), 1e-9)) {
                throw ArgumentError("observation outside domain at row " + std::to_string(i));
            }
        }
    }
};

struct NoiseConfig {
    double sigma_u2 = 1e-2;  // observation noise variance, trainable
    double sigma_r2 = 1.0;   // residual pseudo-observation variance, fixed
    bool train_sigma_u2 = true;
};

// Extended constraint set around a prediction point: m points spanning
// [x*-w, x*+w] in every dimension with w_d > 0, clipped to the domain.
// m = 0 disables the equation constraint entirely.
struct ChiConfig {
    int m = 1;
    Eigen::VectorXd width;
    Domain domain;
};

struct Prediction {
    double mean = 0.0;
    double var = 0.0;
};

struct FieldEstimate {
    Eigen::MatrixXd grid;  // evaluation points as rows
    std::map<std::string, std::vector<Prediction>> fields;
    // Posterior-mean closures usable as FrozenFields in a linearized operator.
    FrozenFields evaluators;
    std::optional<Eigen::VectorXd> u_at_data;
    int iterations = 0;
    double final_metric = 0.0;

    const std::vector<Prediction>& field(const std::string& label) const {
        auto it = fields.find(label);
        if (it == fields.end()) throw MissingFieldError("field '" + label + "'");
        return it->second;
    }
};

namespace detail {

// Data-block factorization shared by every prediction from one model.
struct PredictCache {
    Eigen::LLT<Eigen::MatrixXd> llt_data;  // K_uu + sigma_u2 I + jitter
    Eigen::VectorXd alpha_data;            // (K_uu + sigma_u2 I)^-1 y
};

inline Eigen::LLT<Eigen::MatrixXd> checked_llt(const Eigen::MatrixXd& M, const char* what) {
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    if (llt.info() != Eigen::Success) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
        const double smallest =
            es.info() == Eigen::Success ? es.eigenvalues().minCoeff() : std::nan("");
        throw IllConditionedError(std::string("factorization of ") + what + " failed", smallest);
    }
    return llt;
}

}  // namespace detail

// Joint GP over the solution u and the equation residual r = L u. When no
// operator is attached the model degrades to plain GP regression.
struct GprcModel {
    Dataset data;
    std::optional<LinearOperator> op;
    KernelHyper hyper;
    NoiseConfig noise;
    ParamVector theta;
    FrozenFields frozen;
    std::shared_ptr<const detail::PredictCache> cache;  // set by prepare()/train()

    bool joint() const { return op.has_value(); }
};

namespace detail {

struct JointParts {
    Eigen::MatrixXd K;                    // full covariance with noise and jitter
    Eigen::MatrixXd K0;                   // kernel blocks + jitter (no noise terms)
    std::vector<Eigen::MatrixXd> dK_dlp;  // per log-precision derivative
};

// Assembles the training covariance (2n x 2n for joint models, n x n for
// plain regression) and, when requested, its log-hyperparameter derivatives.
inline JointParts assemble_training_matrix(const GprcModel& m, bool with_grads) {
    const int n = m.data.n();
    const int dims = m.data.dim();
    const double jit = kJitterRel * m.hyper.amp2();
    const LinearOperator ident = LinearOperator::identity(dims);

    JointParts parts;
    const int size = m.joint() ? 2 * n : n;
    parts.K0.setZero(size, size);
    if (with_grads) {
        parts.dK_dlp.assign(static_cast<std::size_t>(dims), Eigen::MatrixXd::Zero(size, size));
    }

    auto fill_block = [&](const LinearOperator& L1, const LinearOperator& L2, int row, int col) {
        const Eigen::MatrixXd C1 = coeff_table(L1, m.data.X, m.theta, m.frozen);
        const Eigen::MatrixXd C2 = coeff_table(L2, m.data.X, m.theta, m.frozen);
        const Eigen::MatrixXd Xt = m.data.X.transpose();
        std::array<double, kMaxKernelDims> grad{};
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                std::array<double, kMaxKernelDims> gacc{};
                for (int t1 = 0; t1 < C1.cols(); ++t1) {
                    for (int t2 = 0; t2 < C2.cols(); ++t2) {
                        const double cc = C1(i, t1) * C2(j, t2);
                        if (cc == 0.0) continue;
                        const double v = rbf_deriv_impl(
                            Xt.col(i).data(), Xt.col(j).data(), m.hyper,
                            L1.terms[static_cast<std::size_t>(t1)].index,
                            L2.terms[static_cast<std::size_t>(t2)].index,
                            with_grads ? grad.data() : nullptr);
                        acc += cc * v;
                        if (with_grads) {
                            for (int d = 0; d < dims; ++d) {
                                gacc[static_cast<std::size_t>(d)] +=
                                    cc * grad[static_cast<std::size_t>(d)];
                            }
                        }
                    }
                }
                parts.K0(row + i, col + j) = acc;
                if (with_grads) {
                    for (int d = 0; d < dims; ++d) {
                        parts.dK_dlp[static_cast<std::size_t>(d)](row + i, col + j) =
                            gacc[static_cast<std::size_t>(d)];
                    }
                }
            }
        }
    };

    fill_block(ident, ident, 0, 0);
    if (m.joint()) {
        fill_block(ident, *m.op, 0, n);
        parts.K0.block(n, 0, n, n) = parts.K0.block(0, n, n, n).transpose();
        fill_block(*m.op, *m.op, n, n);
        if (with_grads) {
            for (auto& g : parts.dK_dlp) g.block(n, 0, n, n) = g.block(0, n, n, n).transpose();
        }
    }
    parts.K0.diagonal().array() += jit;

    parts.K = parts.K0;
    parts.K.diagonal().head(n).array() += m.noise.sigma_u2;
    if (m.joint()) parts.K.diagonal().tail(n).array() += m.noise.sigma_r2;
    return parts;
}

inline Eigen::VectorXd training_targets(const GprcModel& m) {
    const int n = m.data.n();
    if (!m.joint()) return m.data.y;
    // Residual targets are zero at the training points: the equation holds.
    Eigen::VectorXd Y = Eigen::VectorXd::Zero(2 * n);
    Y.head(n) = m.data.y;
    return Y;
}

struct NlmlEval {
    double value;
    Eigen::VectorXd grad;  // over trainable log-hyperparameters
};

// Trainable parameter packing: [log amp2, log prec_0..D-1, (log sigma_u2)].
inline Eigen::VectorXd pack_hyper(const GprcModel& m) {
    const int dims = m.data.dim();
    Eigen::VectorXd b(dims + 1 + (m.noise.train_sigma_u2 ? 1 : 0));
    b[0] = m.hyper.log_amp2;
    b.segment(1, dims) = m.hyper.log_prec;
    if (m.noise.train_sigma_u2) b[dims + 1] = std::log(std::max(m.noise.sigma_u2, 1e-300));
    return b;
}

inline void unpack_hyper(const Eigen::VectorXd& b, GprcModel& m) {
    const int dims = m.data.dim();
    m.hyper.log_amp2 = b[0];
    m.hyper.log_prec = b.segment(1, dims);
    if (m.noise.train_sigma_u2) m.noise.sigma_u2 = std::exp(b[dims + 1]);
}

inline NlmlEval nlml_eval(const GprcModel& m, bool with_grad) {
    const int n = m.data.n();
    const int dims = m.data.dim();
    const JointParts parts = assemble_training_matrix(m, with_grad);
    const Eigen::VectorXd Y = training_targets(m);
    const Eigen::LLT<Eigen::MatrixXd> llt = checked_llt(parts.K, "training covariance");

    const Eigen::VectorXd alpha = llt.solve(Y);
    const double logdet =
        2.0 * llt.matrixLLT().diagonal().array().log().sum();
    NlmlEval out;
    out.value = 0.5 * logdet + 0.5 * Y.dot(alpha) +
                0.5 * static_cast<double>(parts.K.rows()) * std::log(2.0 * std::numbers::pi);
    if (!with_grad) return out;

    const Eigen::MatrixXd Kinv =
        llt.solve(Eigen::MatrixXd::Identity(parts.K.rows(), parts.K.cols()));
    auto grad_for = [&](const Eigen::MatrixXd& dK) {
        return 0.5 * (Kinv.cwiseProduct(dK).sum() - alpha.dot(dK * alpha));
    };

    out.grad.resize(1 + dims + (m.noise.train_sigma_u2 ? 1 : 0));
    // Every kernel block and the jitter scale linearly with amp2.
    out.grad[0] = grad_for(parts.K0);
    for (int d = 0; d < dims; ++d) out.grad[1 + d] = grad_for(parts.dK_dlp[static_cast<std::size_t>(d)]);
    if (m.noise.train_sigma_u2) {
        Eigen::MatrixXd dK = Eigen::MatrixXd::Zero(parts.K.rows(), parts.K.cols());
        dK.diagonal().head(n).array() = m.noise.sigma_u2;
        out.grad[1 + dims] = grad_for(dK);
    }
    return out;
}

}  // namespace detail

// Full training covariance: [[K_uu + s_u2 I, K_ur], [K_ru, K_rr + s_r2 I]].
inline Eigen::MatrixXd joint_matrix(const GprcModel& m) {
    return detail::assemble_training_matrix(m, false).K;
}

inline double nlml(const GprcModel& m) { return detail::nlml_eval(m, false).value; }

inline Eigen::VectorXd nlml_grad(const GprcModel& m) { return detail::nlml_eval(m, true).grad; }

// Rebuilds the shared data-block factorization used by every prediction.
inline GprcModel prepare(GprcModel m) {
    const int dims = m.data.dim();
    const LinearOperator ident = LinearOperator::identity(dims);
    Eigen::MatrixXd A = gram(ident, ident, m.data.X, m.data.X, m.hyper, m.theta, m.frozen);
    A.diagonal().array() += m.noise.sigma_u2 + kJitterRel * m.hyper.amp2();
    auto cache = std::make_shared<detail::PredictCache>();
    cache->llt_data = detail::checked_llt(A, "data covariance");
    cache->alpha_data = cache->llt_data.solve(m.data.y);
    m.cache = std::move(cache);
    return m;
}

// Maximum-likelihood hyperparameter fit: BFGS from the model's current
// hyperparameters plus opt.n_restarts random restarts (log-uniform initial
// length-scales over [0.05, 0.5] of the domain diameter). Deterministic for
// a fixed seed; the returned model is never worse than the input.
inline GprcModel train(const GprcModel& model, const OptimizerConfig& opt) {
    model.data.validate();
    if (model.hyper.dim() != model.data.dim()) throw DimensionError("hyperparameters vs data");
    GprcModel work = model;

    Objective objective = [&work](const Eigen::VectorXd& b, Eigen::VectorXd* g) {
        detail::unpack_hyper(b, work);
        const detail::NlmlEval e = detail::nlml_eval(work, g != nullptr);
        if (g != nullptr) *g = e.grad;
        return e.value;
    };

    std::vector<Eigen::VectorXd> starts;
    starts.push_back(detail::pack_hyper(work));

    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double var_y = 1.0;
    if (model.data.n() > 1) {
        const double mean = model.data.y.mean();
        var_y = (model.data.y.array() - mean).square().sum() /
                static_cast<double>(model.data.n() - 1);
    }
    if (!(var_y > 1e-12)) var_y = 1.0;
    for (int r = 0; r < opt.n_restarts; ++r) {
        Eigen::VectorXd b = starts.front();
        b[0] = std::log(var_y);
        for (int d = 0; d < model.data.dim(); ++d) {
            const double diam = std::max(model.data.domain.diameter(d), 1e-6);
            const double lo = std::log(0.05 * diam);
            const double hi = std::log(0.5 * diam);
            const double log_len = lo + (hi - lo) * unit(rng);
            b[1 + d] = -2.0 * log_len;
        }
        starts.push_back(b);
    }

    bool any = false;
    double best_value = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best = starts.front();
    for (const auto& s : starts) {
        const MinimizeResult res = minimize_bfgs(objective, s, opt);
        if (!res.evaluated) continue;
        any = true;
        if (res.value < best_value) {
            best_value = res.value;
            best = res.x;
        }
    }
    if (!any) throw TrainingError("every restart failed to factorize");

    detail::unpack_hyper(best, work);
    return prepare(work);
}

// m equally spaced points spanning [x*-w, x*+w] along every widened
// dimension, clipped to the domain. m = 1 collapses to {x*}.
inline Eigen::MatrixXd extended_set(const Point& x_star, const ChiConfig& cfg) {
    if (cfg.m < 1) throw ArgumentError("extended set needs m >= 1");
    const int dims = static_cast<int>(x_star.size());
    if (cfg.width.size() != dims) throw DimensionError("chi width vs point");
    Eigen::MatrixXd pts(cfg.m, dims);
    for (int j = 0; j < cfg.m; ++j) {
        const double frac = cfg.m == 1 ? 0.5 : static_cast<double>(j) / (cfg.m - 1);
        Point p = x_star + (2.0 * frac - 1.0) * cfg.width;
        if (cfg.domain.dim() == dims) p = cfg.domain.clip(p);
        pts.row(j) = p.transpose();
    }
    return pts;
}

namespace detail {

// Solves the (n+m) GPRC prediction system at one test point; the extended
// set pieces are shared across all requested functionals via the Schur
// complement of the cached data block.
class PointSolver {
  public:
    PointSolver(const GprcModel& m, const PredictCache& cache, const Point& x_star,
                const ChiConfig& chi)
        : model_(m), cache_(cache), x_star_(x_star) {
        if (x_star.size() != m.data.dim()) throw DimensionError("test point vs data");
        if (m.joint() && chi.m > 0) {
            chi_ = extended_set(x_star, chi);
            const LinearOperator ident = LinearOperator::identity(m.data.dim());
            Eigen::MatrixXd B =
                gram(ident, *m.op, m.data.X, chi_, m.hyper, m.theta, m.frozen);
            Eigen::MatrixXd C = gram(*m.op, *m.op, chi_, chi_, m.hyper, m.theta, m.frozen);
            C.diagonal().array() += m.noise.sigma_r2 + kJitterRel * m.hyper.amp2();
            G_ = cache.llt_data.solve(B);
            const Eigen::MatrixXd S = C - B.transpose() * G_;
            llt_S_ = checked_llt(S, "constraint Schur complement");
            beta_ = llt_S_.solve(-B.transpose() * cache.alpha_data);
            alpha_ = cache.alpha_data - G_ * beta_;
            B_ = std::move(B);
            constrained_ = true;
        }
    }

    Prediction predict(const MultiIndex& functional) const {
        const int dims = model_.data.dim();
        const LinearOperator lf({constant_term(1.0, functional)}, dims);
        const LinearOperator ident = LinearOperator::identity(dims);
        const Eigen::MatrixXd xrow = x_star_.transpose();
        const Eigen::VectorXd p =
            gram(lf, ident, xrow, model_.data.X, model_.hyper, model_.theta, model_.frozen)
                .row(0)
                .transpose();
        const double k_star = op_kernel(lf, lf, x_star_, x_star_, model_.hyper, model_.theta,
                                        model_.frozen);

        double mean = 0.0;
        double quad = 0.0;
        if (!constrained_) {
            mean = p.dot(cache_.alpha_data);
            quad = p.dot(cache_.llt_data.solve(p));
        } else {
            const Eigen::VectorXd q =
                gram(lf, *model_.op, xrow, chi_, model_.hyper, model_.theta, model_.frozen)
                    .row(0)
                    .transpose();
            mean = p.dot(alpha_) + q.dot(beta_);
            const Eigen::VectorXd Ainv_p = cache_.llt_data.solve(p);
            const Eigen::VectorXd zeta = llt_S_.solve(q - B_.transpose() * Ainv_p);
            const Eigen::VectorXd xi = Ainv_p - G_ * zeta;
            quad = p.dot(xi) + q.dot(zeta);
        }

        double var = k_star - quad;
        if (var < -kVarTol) {
            throw IllConditionedError("negative posterior variance", var);
        }
        return {mean, std::max(var, 0.0)};
    }

  private:
    const GprcModel& model_;
    const PredictCache& cache_;
    Point x_star_;
    Eigen::MatrixXd chi_;
    Eigen::MatrixXd B_;
    Eigen::MatrixXd G_;
    Eigen::LLT<Eigen::MatrixXd> llt_S_;
    Eigen::VectorXd alpha_;
    Eigen::VectorXd beta_;
    bool constrained_ = false;
};

inline std::shared_ptr<const PredictCache> cache_or_build(const GprcModel& m) {
    if (m.cache) return m.cache;
    const GprcModel prepared = prepare(m);
    return prepared.cache;
}

}  // namespace detail

// Posterior mean and variance of a derivative functional of u at x_star,
// conditioning on the n noisy observations plus chi.m zero-residual
// pseudo-observations around x_star.
inline Prediction predict(const GprcModel& m, const Point& x_star, const MultiIndex& functional,
                          const ChiConfig& chi) {
    const auto cache = detail::cache_or_build(m);
    return detail::PointSolver(m, *cache, x_star, chi).predict(functional);
}

inline Prediction predict(const GprcModel& m, const Point& x_star, const ChiConfig& chi) {
    return predict(m, x_star, MultiIndex::identity(m.data.dim()), chi);
}

// Evaluates every functional at every grid row. Grid order is preserved;
// points are processed in parallel.
inline FieldEstimate predict_field(const GprcModel& m, const Eigen::MatrixXd& grid,
                                   const std::vector<MultiIndex>& functionals,
                                   const ChiConfig& chi,
                                   const std::vector<std::string>& dim_names = {}) {
    const auto cache = detail::cache_or_build(m);
    FieldEstimate est;
    est.grid = grid;
    std::vector<std::vector<Prediction>> cols(functionals.size());
    for (auto& c : cols) c.resize(static_cast<std::size_t>(grid.rows()));

    parallel_for(static_cast<int>(grid.rows()), [&](int i) {
        const Point x = grid.row(i).transpose();
        const detail::PointSolver solver(m, *cache, x, chi);
        for (std::size_t f = 0; f < functionals.size(); ++f) {
            cols[f][static_cast<std::size_t>(i)] = solver.predict(functionals[f]);
        }
    });

    for (std::size_t f = 0; f < functionals.size(); ++f) {
        est.fields[functionals[f].label(dim_names)] = std::move(cols[f]);
    }
    return est;
}

}  // namespace gprc
