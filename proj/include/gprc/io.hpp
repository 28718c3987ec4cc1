#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gprc/errors.hpp"
#include "gprc/gp.hpp"
#include "gprc/inference.hpp"

namespace gprc {

class IoError : public Error {
  public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

namespace detail {

inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_double(const std::string& s, const std::string& file, int line_no) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == 0) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw IoError(file + ":" + std::to_string(line_no) + ": cannot parse '" + s + "'");
    }
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return out;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    return in;
}

}  // namespace detail

// Dataset CSV: header x_1..x_D,y then one row per observation.
inline void write_dataset_csv(const std::string& path, const Dataset& data) {
    auto out = detail::open_out(path);
    for (int d = 0; d < data.dim(); ++d) out << "x_" << (d + 1) << ",";
    out << "y\n";
    for (int i = 0; i < data.n(); ++i) {
        for (int d = 0; d < data.dim(); ++d) out << detail::fmt_double(data.X(i, d)) << ",";
        out << detail::fmt_double(data.y[i]) << "\n";
    }
}

// Reads a dataset back; the domain tightly wraps the observations unless
// explicit bounds are supplied.
inline Dataset read_dataset_csv(const std::string& path, const Domain& domain = Domain{}) {
    auto in = detail::open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw IoError(path + ": empty file");
    const auto header = detail::split_csv_line(line);
    if (header.size() < 2 || header.back() != "y") {
        throw IoError(path + ":1: expected header x_1..x_D,y");
    }
    const int dim = static_cast<int>(header.size()) - 1;
    std::vector<std::vector<double>> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (static_cast<int>(cells.size()) != dim + 1) {
            throw IoError(path + ":" + std::to_string(line_no) + ": expected " +
                          std::to_string(dim + 1) + " columns");
        }
        std::vector<double> row;
        for (const auto& c : cells) row.push_back(detail::parse_double(c, path, line_no));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IoError(path + ": no observations");

    Dataset data;
    data.X.resize(static_cast<int>(rows.size()), dim);
    data.y.resize(static_cast<int>(rows.size()));
    for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
        for (int d = 0; d < dim; ++d) data.X(i, d) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)];
        data.y[i] = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(dim)];
    }
    if (domain.dim() == dim) {
        data.domain = domain;
    } else {
        data.domain.bounds.resize(static_cast<std::size_t>(dim));
        for (int d = 0; d < dim; ++d) {
            data.domain.bounds[static_cast<std::size_t>(d)] = {data.X.col(d).minCoeff(),
                                                               data.X.col(d).maxCoeff()};
        }
    }
    return data;
}

// Chain CSV: step,theta_1..theta_q,potential,accepted.
inline void write_chain_csv(const std::string& path, const Chain& chain) {
    auto out = detail::open_out(path);
    out << "step";
    for (int d = 0; d < chain.dim(); ++d) out << ",theta_" << (d + 1);
    out << ",potential,accepted\n";
    for (int i = 0; i < chain.n(); ++i) {
        out << i;
        for (int d = 0; d < chain.dim(); ++d) out << "," << detail::fmt_double(chain.samples(i, d));
        out << "," << detail::fmt_double(chain.potentials[i]) << ","
            << (i < chain.accept_flags.size() ? chain.accept_flags[i] : 0) << "\n";
    }
}

inline Chain read_chain_csv(const std::string& path) {
    auto in = detail::open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw IoError(path + ": empty file");
    const auto header = detail::split_csv_line(line);
    if (header.size() < 4 || header.front() != "step" || header.back() != "accepted") {
        throw IoError(path + ":1: expected header step,theta_*,potential,accepted");
    }
    const int q = static_cast<int>(header.size()) - 3;
    std::vector<std::vector<double>> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (static_cast<int>(cells.size()) != q + 3) {
            throw IoError(path + ":" + std::to_string(line_no) + ": expected " +
                          std::to_string(q + 3) + " columns");
        }
        std::vector<double> row;
        for (const auto& c : cells) row.push_back(detail::parse_double(c, path, line_no));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IoError(path + ": no samples");

    Chain chain;
    const int n = static_cast<int>(rows.size());
    chain.samples.resize(n, q);
    chain.potentials.resize(n);
    chain.accept_flags.resize(n);
    for (int i = 0; i < n; ++i) {
        const auto& row = rows[static_cast<std::size_t>(i)];
        for (int d = 0; d < q; ++d) chain.samples(i, d) = row[static_cast<std::size_t>(d) + 1];
        chain.potentials[i] = row[static_cast<std::size_t>(q) + 1];
        chain.accept_flags[i] = static_cast<int>(row[static_cast<std::size_t>(q) + 2]);
        chain.accepted += chain.accept_flags[i];
    }
    return chain;
}

// Field CSV: coordinate columns then mean/var pairs per functional label.
inline void write_field_csv(const std::string& path, const FieldEstimate& est,
                            const std::vector<std::string>& dim_names = {}) {
    auto out = detail::open_out(path);
    const int dim = static_cast<int>(est.grid.cols());
    for (int d = 0; d < dim; ++d) {
        if (d < static_cast<int>(dim_names.size())) {
            out << dim_names[static_cast<std::size_t>(d)];
        } else {
            out << "x_" << (d + 1);
        }
        out << ",";
    }
    bool first = true;
    for (const auto& [label, _] : est.fields) {
        if (!first) out << ",";
        out << "mean_" << label << ",var_" << label;
        first = false;
    }
    out << "\n";
    for (int i = 0; i < est.grid.rows(); ++i) {
        for (int d = 0; d < dim; ++d) out << detail::fmt_double(est.grid(i, d)) << ",";
        first = true;
        for (const auto& [label, col] : est.fields) {
            if (!first) out << ",";
            out << detail::fmt_double(col[static_cast<std::size_t>(i)].mean) << ","
                << detail::fmt_double(col[static_cast<std::size_t>(i)].var);
            first = false;
        }
        out << "\n";
    }
}

// Aligned histogram CSV for one parameter across k chains.
inline void write_histogram_csv(const std::string& path, const std::vector<Histogram>& hists) {
    if (hists.empty()) throw ArgumentError("no histograms");
    for (const auto& h : hists) {
        if (h.counts.size() != hists.front().counts.size() || h.lo != hists.front().lo ||
            h.hi != hists.front().hi) {
            throw ArgumentError("histograms must share bin edges");
        }
    }
    auto out = detail::open_out(path);
    out << "bin_lo,bin_mid,bin_hi";
    for (std::size_t c = 0; c < hists.size(); ++c) out << ",count_" << (c + 1);
    out << "\n";
    const auto& h0 = hists.front();
    const int bins = static_cast<int>(h0.counts.size());
    const double width = (h0.hi - h0.lo) / bins;
    for (int b = 0; b < bins; ++b) {
        const double lo = h0.lo + b * width;
        out << detail::fmt_double(lo) << "," << detail::fmt_double(lo + 0.5 * width) << ","
            << detail::fmt_double(lo + width);
        for (const auto& h : hists) out << "," << h.counts[static_cast<std::size_t>(b)];
        out << "\n";
    }
}

}  // namespace gprc
