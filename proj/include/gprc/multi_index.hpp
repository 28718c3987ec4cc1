#pragma once

#include <Eigen/Core>

#include <numeric>
#include <string>
#include <vector>

#include "gprc/errors.hpp"

namespace gprc {

using Point = Eigen::VectorXd;
using ParamVector = Eigen::VectorXd;

// Highest derivative order supported per input dimension. Kernel derivatives
// go up to twice this across the two kernel arguments. Override at compile
// time with -DGPRC_MAX_ORDER=n (n >= 3).
#ifndef GPRC_MAX_ORDER
#define GPRC_MAX_ORDER 3
#endif
inline constexpr int kMaxOrder = GPRC_MAX_ORDER;
static_assert(kMaxOrder >= 3, "third-order spatial derivatives are required");

// Per-dimension interval bounds of the problem domain.
struct Domain {
    std::vector<std::pair<double, double>> bounds;

    int dim() const { return static_cast<int>(bounds.size()); }

    bool contains(const Point& x, double tol = 1e-12) const {
        if (x.size() != dim()) return false;
        for (int d = 0; d < dim(); ++d) {
            if (x[d] < bounds[d].first - tol || x[d] > bounds[d].second + tol) return false;
        }
        return true;
    }

    Point clip(Point x) const {
        for (int d = 0; d < dim() && d < x.size(); ++d) {
            x[d] = std::min(std::max(x[d], bounds[d].first), bounds[d].second);
        }
        return x;
    }

    // Length of the widest side; used to scale length-scale initialization.
    double diameter(int d) const { return bounds.at(d).second - bounds.at(d).first; }
};

// Derivative order per input dimension, e.g. (3,0) = d^3/dx^3 in 2-D.
class MultiIndex {
  public:
    MultiIndex() = default;

    explicit MultiIndex(std::vector<int> orders) : orders_(std::move(orders)) {
        for (int o : orders_) {
            if (o < 0) throw ArgumentError("negative derivative order");
        }
        if (orders_.empty()) throw ArgumentError("empty multi-index");
        if (total() > kMaxOrder) {
            throw OrderError("total order " + std::to_string(total()) + " exceeds max " +
                             std::to_string(kMaxOrder));
        }
    }

    static MultiIndex identity(int dim) { return MultiIndex(std::vector<int>(dim, 0)); }

    int dim() const { return static_cast<int>(orders_.size()); }
    int order(int d) const { return orders_.at(d); }
    int total() const { return std::accumulate(orders_.begin(), orders_.end(), 0); }
    bool is_identity() const { return total() == 0; }
    const std::vector<int>& orders() const { return orders_; }

    // Label used for field estimates and frozen fields: "u", "u_x", "u_xxx", ...
    // Dimension names default to x,y,z (or x1..xD beyond three).
    std::string label(const std::vector<std::string>& dim_names = {}) const {
        if (is_identity()) return "u";
        std::string s = "u_";
        for (int d = 0; d < dim(); ++d) {
            std::string name;
            if (d < static_cast<int>(dim_names.size())) {
                name = dim_names[d];
            } else if (dim() == 1) {
                name = "x";
            } else if (d < 3) {
                name = std::string(1, "xyz"[d]);
            } else {
                name = "x" + std::to_string(d + 1);
            }
            for (int k = 0; k < orders_[d]; ++k) s += name;
        }
        return s;
    }

    friend bool operator==(const MultiIndex& a, const MultiIndex& b) {
        return a.orders_ == b.orders_;
    }
    friend bool operator<(const MultiIndex& a, const MultiIndex& b) {
        return a.orders_ < b.orders_;
    }

  private:
    std::vector<int> orders_;
};

}  // namespace gprc
