#pragma once

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gprc/gp.hpp"
#include "gprc/linearization.hpp"
#include "gprc/operators.hpp"

namespace gprc {

// Uniform box prior.
struct Prior {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;

    int dim() const { return static_cast<int>(lo.size()); }

    bool contains(const ParamVector& theta) const {
        if (theta.size() != dim()) return false;
        for (int i = 0; i < dim(); ++i) {
            if (theta[i] < lo[i] || theta[i] > hi[i]) return false;
        }
        return true;
    }

    void validate() const {
        if (lo.size() != hi.size() || lo.size() == 0) throw ArgumentError("prior bounds");
        for (int i = 0; i < dim(); ++i) {
            if (!(lo[i] < hi[i])) throw ArgumentError("prior needs lo < hi");
        }
    }
};

struct MhConfig {
    int n_samples = 5000;
    Eigen::VectorXd proposal_sd;  // random-walk Gaussian std per dimension
    double alpha = 100.0;         // likelihood scale
    std::uint64_t seed = 0;
    ParamVector init;
};

struct Chain {
    Eigen::MatrixXd samples;     // n_samples x q
    Eigen::VectorXd potentials;  // eta at each sample (= -log target / alpha)
    Eigen::VectorXi accept_flags;  // 1 where the step's proposal was taken
    long accepted = 0;
    long failed_evals = 0;  // proposals rejected because the model failed
    std::uint64_t seed = 0;

    int n() const { return static_cast<int>(samples.rows()); }
    int dim() const { return static_cast<int>(samples.cols()); }

    double acceptance_rate() const {
        return n() > 1 ? static_cast<double>(accepted) / static_cast<double>(n() - 1) : 0.0;
    }
};

namespace detail {

// Looks up posterior-mean values either from the tabulated grid columns
// (exact grid match) or through the estimate's evaluator closures.
class EstimateReader {
  public:
    EstimateReader(const FieldEstimate& est, const Eigen::MatrixXd& points)
        : est_(est),
          tabulated_(est.grid.rows() == points.rows() && est.grid.cols() == points.cols() &&
                     est.grid.rows() > 0 && (est.grid - points).cwiseAbs().maxCoeff() < 1e-12) {}

    double mean(const std::string& label, const Eigen::MatrixXd& points, int row) const {
        if (tabulated_) {
            const auto it = est_.fields.find(label);
            if (it != est_.fields.end()) return it->second[static_cast<std::size_t>(row)].mean;
        }
        const auto ev = est_.evaluators.find(label);
        if (ev == est_.evaluators.end()) throw MissingFieldError("estimate of '" + label + "'");
        return ev->second(points.row(row).transpose());
    }

  private:
    const FieldEstimate& est_;
    bool tabulated_;
};

inline double mean_sq_residual(const ParamVector& theta, const FieldEstimate& est,
                               const EquationSpec& eq, const Eigen::MatrixXd& colloc) {
    if (colloc.rows() == 0) throw ArgumentError("empty collocation grid");
    const EstimateReader reader(est, colloc);
    double acc = 0.0;
    for (int i = 0; i < colloc.rows(); ++i) {
        Values values;
        for (const auto& f : eq.derivative_functionals) {
            values[f] = reader.mean(eq.label_of(f), colloc, i);
        }
        const double r = eval_residual(eq, values, colloc.row(i).transpose(), theta);
        acc += r * r;
    }
    return acc / static_cast<double>(colloc.rows());
}

}  // namespace detail

// Combined misfit eta: half the squared data residual plus half the mean
// squared equation residual over the collocation grid (equal weights).
inline double potential(const ParamVector& theta, const Dataset& data, const FieldEstimate& est,
                        const EquationSpec& eq, const Eigen::MatrixXd& colloc) {
    double data_term = 0.0;
    if (est.u_at_data && est.u_at_data->size() == data.n()) {
        data_term = 0.5 * (data.y - *est.u_at_data).squaredNorm();
    } else {
        const auto ev = est.evaluators.find("u");
        if (ev == est.evaluators.end()) throw MissingFieldError("estimate of 'u'");
        for (int i = 0; i < data.n(); ++i) {
            const double diff = data.y[i] - ev->second(data.X.row(i).transpose());
            data_term += 0.5 * diff * diff;
        }
    }
    return data_term + 0.5 * detail::mean_sq_residual(theta, est, eq, colloc);
}

// Reduced potential of the two-stage baseline: the data term is constant
// because the stage-one estimate never changes with theta, so only the mean
// squared equation residual remains.
inline double two_stage_potential(const ParamVector& theta, const FieldEstimate& est0,
                                  const EquationSpec& eq, const Eigen::MatrixXd& colloc) {
    return detail::mean_sq_residual(theta, est0, eq, colloc);
}

enum class Method { Gprc, TwoStage };

inline const char* method_name(Method m) { return m == Method::Gprc ? "gprc" : "two-stage"; }

// Everything log_posterior needs, plus the mutable warm-start state carried
// across the (strictly sequential) steps of one chain.
struct PosteriorContext {
    Method method = Method::Gprc;
    Dataset data;
    EquationSpec eq;
    Prior prior;
    double alpha = 100.0;
    Eigen::MatrixXd colloc;
    ChiConfig chi;
    PicardConfig picard;
    OptimizerConfig opt;
    NoiseConfig noise;
    int refit_every = 1;  // re-optimize hyperparameters every k-th evaluation

    // warm-start state
    PicardSeed seed;
    long evals = 0;
    long failures = 0;
    std::function<void(const std::string&)> on_failure;  // optional logger

    // Stage-one estimate, shared by every two-stage evaluation.
    const FieldEstimate& stage_one() {
        if (!stage_one_) {
            stage_one_ = std::make_shared<const FieldEstimate>(
                initial_guess(data, eq, opt, colloc, noise));
        }
        return *stage_one_;
    }

  private:
    std::shared_ptr<const FieldEstimate> stage_one_;
};

inline double log_posterior(const ParamVector& theta, PosteriorContext& ctx) {
    if (!ctx.prior.contains(theta)) return -std::numeric_limits<double>::infinity();
    try {
        double eta = 0.0;
        if (ctx.method == Method::TwoStage) {
            eta = two_stage_potential(theta, ctx.stage_one(), ctx.eq, ctx.colloc);
        } else {
            OptimizerConfig opt = ctx.opt;
            if (ctx.seed.hyper) {
                opt.n_restarts = 0;  // warm start from the previous optimum
                if (ctx.refit_every > 1 && ctx.evals % ctx.refit_every != 0) opt.max_iters = 0;
            }
            const FieldEstimate est = picard_solve(ctx.data, ctx.eq, theta, ctx.picard, ctx.chi,
                                                   opt, ctx.noise, &ctx.seed);
            eta = potential(theta, ctx.data, est, ctx.eq, ctx.colloc);
        }
        ctx.evals += 1;
        return -ctx.alpha * eta;
    } catch (const Error& e) {
        ctx.failures += 1;
        if (ctx.on_failure) ctx.on_failure(e.what());
        return -std::numeric_limits<double>::infinity();
    }
}

using LogDensity = std::function<double(const ParamVector&)>;

// Random-walk Metropolis-Hastings with a symmetric Gaussian proposal:
// accept theta' with probability min{1, pi(theta')/pi(theta)}, otherwise
// repeat the current state. Deterministic for a fixed seed.
inline Chain mh_sample(const LogDensity& target, const MhConfig& cfg) {
    if (cfg.n_samples < 1) throw ArgumentError("need n_samples >= 1");
    const int q = static_cast<int>(cfg.init.size());
    if (q < 1) throw ArgumentError("empty chain initialization");
    if (cfg.proposal_sd.size() != q) throw DimensionError("proposal sd vs parameters");
    for (int i = 0; i < q; ++i) {
        if (!(cfg.proposal_sd[i] > 0.0)) throw ArgumentError("proposal sd must be positive");
    }

    double logp = target(cfg.init);
    if (!std::isfinite(logp)) throw ArgumentError("chain initialization outside support");

    Chain chain;
    chain.seed = cfg.seed;
    chain.samples.resize(cfg.n_samples, q);
    chain.potentials.resize(cfg.n_samples);
    chain.accept_flags = Eigen::VectorXi::Zero(cfg.n_samples);

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    ParamVector current = cfg.init;
    chain.samples.row(0) = current.transpose();
    chain.potentials[0] = -logp / cfg.alpha;

    for (int i = 1; i < cfg.n_samples; ++i) {
        ParamVector proposal(q);
        for (int d = 0; d < q; ++d) proposal[d] = current[d] + cfg.proposal_sd[d] * gauss(rng);
        const double logp_new = target(proposal);
        const double u = unit(rng);
        if (logp_new - logp > std::log(u)) {
            current = proposal;
            logp = logp_new;
            chain.accepted += 1;
            chain.accept_flags[i] = 1;
        }
        chain.samples.row(i) = current.transpose();
        chain.potentials[i] = -logp / cfg.alpha;
    }
    return chain;
}

struct Histogram {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<long> counts;
};

struct HistogramSpec {
    int bins = 40;
    // Shared range per dimension; auto-ranged from the samples when absent.
    std::vector<std::pair<double, double>> range;
};

struct ChainStats {
    Eigen::VectorXd mean;
    Eigen::VectorXd stddev;
    double acceptance_rate = 0.0;
    std::vector<Histogram> histograms;
    int used = 0;  // samples after burn-in
};

inline ChainStats chain_stats(const Chain& chain, int burn_in,
                              const HistogramSpec& spec = HistogramSpec{}) {
    if (burn_in < 0 || burn_in >= chain.n()) throw ArgumentError("burn-in vs chain length");
    const int n = chain.n() - burn_in;
    const int q = chain.dim();
    const Eigen::MatrixXd tail = chain.samples.bottomRows(n);

    ChainStats stats;
    stats.used = n;
    stats.acceptance_rate = chain.acceptance_rate();
    stats.mean = tail.colwise().mean();
    stats.stddev.resize(q);
    for (int d = 0; d < q; ++d) {
        if (n > 1) {
            stats.stddev[d] = std::sqrt(
                (tail.col(d).array() - stats.mean[d]).square().sum() / static_cast<double>(n - 1));
        } else {
            stats.stddev[d] = 0.0;
        }
    }

    for (int d = 0; d < q; ++d) {
        Histogram h;
        if (d < static_cast<int>(spec.range.size())) {
            h.lo = spec.range[static_cast<std::size_t>(d)].first;
            h.hi = spec.range[static_cast<std::size_t>(d)].second;
        } else {
            h.lo = tail.col(d).minCoeff();
            h.hi = tail.col(d).maxCoeff();
        }
        h.counts.assign(static_cast<std::size_t>(spec.bins), 0);
        const double width = h.hi - h.lo;
        for (int i = 0; i < n; ++i) {
            int b = width > 0.0
                        ? static_cast<int>((tail(i, d) - h.lo) / width * spec.bins)
                        : 0;
            b = std::min(std::max(b, 0), spec.bins - 1);  // clamp edge values
            h.counts[static_cast<std::size_t>(b)] += 1;
        }
        stats.histograms.push_back(std::move(h));
    }
    return stats;
}

}  // namespace gprc
