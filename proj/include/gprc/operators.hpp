#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gprc/errors.hpp"
#include "gprc/multi_index.hpp"

namespace gprc {

// Estimated solution / derivative fields frozen during linearization,
// keyed by functional label ("u", "u_x", ...). Evaluators must be pure:
// operator coefficients are shared across threads.
using FrozenFields = std::map<std::string, std::function<double(const Point&)>>;

inline double frozen_value(const FrozenFields& frozen, const std::string& label, const Point& x) {
    auto it = frozen.find(label);
    if (it == frozen.end()) throw MissingFieldError("frozen field '" + label + "'");
    return it->second(x);
}

// One coefficient * partial-derivative term of a linear differential operator.
struct OperatorTerm {
    std::function<double(const Point&, const ParamVector&, const FrozenFields&)> coeff;
    MultiIndex index;
};

inline OperatorTerm constant_term(double c, MultiIndex index) {
    return {[c](const Point&, const ParamVector&, const FrozenFields&) { return c; },
            std::move(index)};
}

// Sum of coefficient*derivative terms; induces all operator kernels.
struct LinearOperator {
    std::vector<OperatorTerm> terms;
    int dim = 0;

    LinearOperator(std::vector<OperatorTerm> t, int d) : terms(std::move(t)), dim(d) {
        if (terms.empty()) throw ArgumentError("linear operator needs at least one term");
        for (const auto& term : terms) {
            if (term.index.dim() != dim) throw DimensionError("operator term dimension");
        }
    }

    static LinearOperator identity(int dim) {
        return LinearOperator({constant_term(1.0, MultiIndex::identity(dim))}, dim);
    }
};

using Values = std::map<MultiIndex, double>;

inline double value_of(const Values& values, const MultiIndex& index) {
    auto it = values.find(index);
    if (it == values.end()) throw MissingFieldError("derivative value '" + index.label() + "'");
    return it->second;
}

// A parametric differential equation F(u(x); theta) = 0 together with the
// Picard freezing rule that turns it into a linear operator.
struct EquationSpec {
    int param_dim = 0;
    int dim = 0;
    std::vector<std::string> dim_names;
    // Derivative functionals the residual reads, zero multi-index (u) included.
    std::vector<MultiIndex> derivative_functionals;
    std::function<double(const Values&, const Point&, const ParamVector&)> residual;
    std::function<LinearOperator(const ParamVector&, const FrozenFields&)> linearize;
    bool is_linear = false;

    std::string label_of(const MultiIndex& index) const { return index.label(dim_names); }
};

inline double eval_residual(const EquationSpec& eq, const Values& values, const Point& x,
                            const ParamVector& theta) {
    for (const auto& index : eq.derivative_functionals) {
        if (values.find(index) == values.end()) {
            throw MissingFieldError("derivative value '" + eq.label_of(index) + "'");
        }
    }
    return eq.residual(values, x, theta);
}

inline LinearOperator linearize_equation(const EquationSpec& eq, const ParamVector& theta,
                                         const FrozenFields& frozen) {
    return eq.linearize(theta, frozen);
}

// Evaluate L u at x given tabulated derivative values of u.
inline double apply_operator(const LinearOperator& op, const Values& values, const Point& x,
                             const ParamVector& theta, const FrozenFields& frozen) {
    double sum = 0.0;
    for (const auto& term : op.terms) {
        sum += term.coeff(x, theta, frozen) * value_of(values, term.index);
    }
    return sum;
}

}  // namespace gprc
