#ifndef IRTCL_ANALYSIS_HPP
#define IRTCL_ANALYSIS_HPP

#include "error.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

namespace irtcl {

/// 1-based ranks with tied values sharing the average of their positions.
inline std::vector<double> average_ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) {
            ++j;
        }
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            ranks[order[k]] = r;
        }
        i = j + 1;
    }
    return ranks;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
    detail::require(x.size() == y.size(), "pearson: length mismatch");
    detail::require(x.size() >= 2, "pearson: need at least two points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw UndefinedCorrelation("correlation undefined for a constant vector");
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Spearman rank correlation: Pearson correlation of average ranks.
inline double spearman(std::span<const double> x, std::span<const double> y) {
    detail::require(x.size() == y.size(), "spearman: length mismatch");
    detail::require(x.size() >= 2, "spearman: need at least two points");
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    return pearson(rx, ry);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return spearman(std::span<const double>(x), std::span<const double>(y));
}

struct RunSummary {
    double mean = 0.0;
    double ci95 = 0.0;
    std::size_t n = 0;
};

/// Mean and Student-t 95% half-width (K-1 degrees of freedom, sample standard deviation).
inline RunSummary summarize_runs(std::span<const double> values) {
    detail::require(values.size() >= 2, "summarize_runs: need at least two runs");
    const double k = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / k;
    double ss = 0.0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    // exact zero for identical runs, where rounding in the mean would leave a tiny residue
    const bool constant = std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; });
    const double sd = constant ? 0.0 : std::sqrt(ss / (k - 1.0));
    const boost::math::students_t dist(k - 1.0);
    const double t = boost::math::quantile(dist, 0.975);
    return {mean, t * sd / std::sqrt(k), values.size()};
}

inline RunSummary summarize_runs(const std::vector<double>& values) {
    return summarize_runs(std::span<const double>(values));
}

struct Histogram {
    std::vector<double> edges;   // n_bins + 1
    std::vector<double> percent; // n_bins, sums to 100
    std::vector<std::size_t> counts;
};

/**
 * Equal-width percentage histogram over [min, max] of the data. The last bin is closed on
 * the right. A degenerate range collapses to a single bin holding everything.
 */
inline Histogram difficulty_histogram(std::span<const double> values, std::size_t n_bins) {
    detail::require(!values.empty(), "difficulty_histogram: empty input");
    detail::require(n_bins >= 1, "difficulty_histogram: need at least one bin");
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    Histogram h;
    if (!(hi > lo)) {
        h.edges = {lo, hi};
        h.counts = {values.size()};
        h.percent = {100.0};
        return h;
    }
    const double width = (hi - lo) / static_cast<double>(n_bins);
    h.edges.resize(n_bins + 1);
    for (std::size_t b = 0; b <= n_bins; ++b) {
        h.edges[b] = lo + width * static_cast<double>(b);
    }
    h.edges.back() = hi;
    h.counts.assign(n_bins, 0);
    for (double v : values) {
        auto b = static_cast<std::size_t>((v - lo) / width);
        if (b >= n_bins) {
            b = n_bins - 1;
        }
        // floating error at interior edges
        while (b > 0 && v < h.edges[b]) {
            --b;
        }
        while (b + 1 < n_bins && v >= h.edges[b + 1]) {
            ++b;
        }
        ++h.counts[b];
    }
    h.percent.resize(n_bins);
    const double n = static_cast<double>(values.size());
    for (std::size_t b = 0; b < n_bins; ++b) {
        h.percent[b] = 100.0 * static_cast<double>(h.counts[b]) / n;
    }
    return h;
}

} // namespace irtcl

#endif
