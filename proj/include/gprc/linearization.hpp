#pragma once

#include <Eigen/Core>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gprc/gp.hpp"
#include "gprc/operators.hpp"

namespace gprc {

struct PicardConfig {
    int max_iters = 1;       // the experiments run a single pass
    double eps_rmse = 1e-3;  // stop once successive estimates move less than this
    Eigen::MatrixXd eval_grid;
};

// In/out state threaded through repeated picard_solve calls: a precomputed
// theta-independent initial estimate and warm-start hyperparameters from the
// previous call.
struct PicardSeed {
    std::shared_ptr<const FieldEstimate> initial;
    std::optional<KernelHyper> hyper;
    std::optional<double> sigma_u2;
};

namespace detail {

inline std::vector<MultiIndex> with_identity(const EquationSpec& eq) {
    std::vector<MultiIndex> fs = eq.derivative_functionals;
    const MultiIndex ident = MultiIndex::identity(eq.dim);
    bool has = false;
    for (const auto& f : fs) has = has || f == ident;
    if (!has) fs.insert(fs.begin(), ident);
    return fs;
}

inline KernelHyper default_hyper(const Dataset& data) {
    double var_y = 1.0;
    if (data.n() > 1) {
        const double mean = data.y.mean();
        var_y = (data.y.array() - mean).square().sum() / static_cast<double>(data.n() - 1);
    }
    if (!(var_y > 1e-12)) var_y = 1.0;
    Eigen::VectorXd prec(data.dim());
    for (int d = 0; d < data.dim(); ++d) {
        const double len = 0.2 * std::max(data.domain.diameter(d), 1e-6);
        prec[d] = 1.0 / (len * len);
    }
    return KernelHyper::from_values(var_y, prec);
}

// Posterior-mean closures for every functional; each holds a shared
// reference to the trained model so it stays valid indefinitely.
inline FrozenFields make_evaluators(const std::shared_ptr<const GprcModel>& model,
                                    const std::vector<MultiIndex>& functionals,
                                    const ChiConfig& chi, const std::vector<std::string>& names) {
    FrozenFields out;
    for (const auto& f : functionals) {
        out[f.label(names)] = [model, f, chi](const Point& x) {
            return predict(*model, x, f, chi).mean;
        };
    }
    return out;
}

// One GPRC (or plain GPR) pass: train, evaluate on the grid, keep closures.
inline FieldEstimate evaluate_model(const GprcModel& trained, const EquationSpec& eq,
                                    const Eigen::MatrixXd& grid, const ChiConfig& chi) {
    const std::vector<MultiIndex> fs = with_identity(eq);
    FieldEstimate est;
    if (grid.rows() > 0) {
        est = predict_field(trained, grid, fs, chi, eq.dim_names);
    } else {
        est.grid.resize(0, trained.data.dim());
    }
    auto shared = std::make_shared<const GprcModel>(trained);
    est.evaluators = make_evaluators(shared, fs, chi, eq.dim_names);
    const int n = trained.data.n();
    Eigen::VectorXd u_at_data(n);
    const ChiConfig chi_data = chi;
    parallel_for(n, [&](int i) {
        u_at_data[i] = predict(trained, trained.data.X.row(i).transpose(),
                               MultiIndex::identity(trained.data.dim()), chi_data)
                           .mean;
    });
    est.u_at_data = std::move(u_at_data);
    return est;
}

}  // namespace detail

// Unconstrained GP regression fit of the solution and the derivative
// functionals the equation involves; the starting point of the Picard loop
// and the whole first stage of the two-stage baseline.
inline FieldEstimate initial_guess(const Dataset& data, const EquationSpec& eq,
                                   const OptimizerConfig& opt,
                                   const Eigen::MatrixXd& grid = Eigen::MatrixXd(),
                                   const NoiseConfig& noise = NoiseConfig{}) {
    GprcModel model;
    model.data = data;
    model.hyper = detail::default_hyper(data);
    model.noise = noise;
    const GprcModel trained = train(model, opt);
    ChiConfig no_chi;
    no_chi.m = 0;
    no_chi.width = Eigen::VectorXd::Zero(data.dim());
    no_chi.domain = data.domain;
    FieldEstimate est = detail::evaluate_model(trained, eq, grid, no_chi);
    est.iterations = 0;
    return est;
}

// Sum of mean squared differences of the solution and every derivative of
// interest between two successive estimates, averaged over the shared grid.
inline double stopping_metric(const FieldEstimate& prev, const FieldEstimate& next) {
    if (prev.grid.rows() != next.grid.rows() || prev.grid.cols() != next.grid.cols()) {
        throw GridError("estimate grids differ in shape");
    }
    if (prev.grid.rows() == 0) throw GridError("empty evaluation grid");
    if ((prev.grid - next.grid).cwiseAbs().maxCoeff() > 1e-12) {
        throw GridError("estimate grids differ");
    }
    if (prev.fields.size() != next.fields.size()) throw GridError("field label sets differ");
    double acc = 0.0;
    for (const auto& [label, prev_col] : prev.fields) {
        const auto it = next.fields.find(label);
        if (it == next.fields.end()) throw GridError("field label sets differ: " + label);
        const auto& next_col = it->second;
        for (std::size_t i = 0; i < prev_col.size(); ++i) {
            const double diff = next_col[i].mean - prev_col[i].mean;
            acc += diff * diff;
        }
    }
    return acc / static_cast<double>(prev.grid.rows());
}

// Picard-linearized GPRC estimation of the solution and its derivatives at a
// fixed parameter vector. Linear equations take a single pass; nonlinear
// equations freeze the previous estimate, run GPRC, and iterate until the
// stopping metric drops below eps_rmse or max_iters is reached.
inline FieldEstimate picard_solve(const Dataset& data, const EquationSpec& eq,
                                  const ParamVector& theta, const PicardConfig& cfg,
                                  const ChiConfig& chi, const OptimizerConfig& opt,
                                  const NoiseConfig& noise, PicardSeed* seed = nullptr) {
    data.validate();
    if (theta.size() != eq.param_dim) throw ArgumentError("theta size vs equation parameters");
    if (cfg.max_iters < 1) throw ArgumentError("picard needs max_iters >= 1");

    GprcModel base;
    base.data = data;
    base.noise = noise;
    base.theta = theta;
    base.hyper = (seed && seed->hyper) ? *seed->hyper : detail::default_hyper(data);
    if (seed && seed->sigma_u2) base.noise.sigma_u2 = *seed->sigma_u2;

    auto record_warm = [&](const GprcModel& trained) {
        if (seed) {
            seed->hyper = trained.hyper;
            seed->sigma_u2 = trained.noise.sigma_u2;
        }
    };

    if (eq.is_linear) {
        GprcModel model = base;
        model.op = eq.linearize(theta, FrozenFields{});
        const GprcModel trained = train(model, opt);
        record_warm(trained);
        FieldEstimate est = detail::evaluate_model(trained, eq, cfg.eval_grid, chi);
        est.iterations = 1;
        est.final_metric = 0.0;
        return est;
    }

    FieldEstimate prev;
    if (seed && seed->initial) {
        prev = *seed->initial;
    } else {
        prev = initial_guess(data, eq, opt, cfg.eval_grid, noise);
        if (seed) seed->initial = std::make_shared<const FieldEstimate>(prev);
    }

    FieldEstimate est;
    OptimizerConfig iter_opt = opt;
    for (int it = 1; it <= cfg.max_iters; ++it) {
        GprcModel model = base;
        model.frozen = prev.evaluators;
        model.op = eq.linearize(theta, model.frozen);
        GprcModel trained;
        try {
            trained = train(model, iter_opt);
        } catch (const Error& e) {
            throw TrainingError("picard iteration " + std::to_string(it) + ": " + e.what());
        }
        record_warm(trained);
        base.hyper = trained.hyper;
        base.noise.sigma_u2 = trained.noise.sigma_u2;
        iter_opt.n_restarts = 0;  // later passes start from the previous optimum

        est = detail::evaluate_model(trained, eq, cfg.eval_grid, chi);
        est.iterations = it;
        est.final_metric = cfg.eval_grid.rows() > 0 ? stopping_metric(prev, est) : 0.0;
        if (est.final_metric < cfg.eps_rmse) break;
        prev = est;
    }
    return est;
}

}  // namespace gprc
