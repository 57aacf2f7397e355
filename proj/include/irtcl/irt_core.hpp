#ifndef IRTCL_IRT_CORE_HPP
#define IRTCL_IRT_CORE_HPP

#include "error.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

/**
 * @file irt_core.hpp
 * @brief One-parameter logistic (Rasch) model: response probabilities, likelihood and grading.
 */

namespace irtcl {

/// Logistic function evaluated on the branch that never overflows.
inline double stable_sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// log(sigmoid(x)) without cancellation for large |x|.
inline double log_sigmoid(double x) {
    if (x >= 0.0) {
        return -std::log1p(std::exp(-x));
    }
    return x - std::log1p(std::exp(x));
}

/**
 * Probability that a responder with ability `theta` answers an item of difficulty `b` correctly.
 * Throws `InvalidArgument` on non-finite input.
 */
inline double response_probability(double theta, double b) {
    detail::require(std::isfinite(theta) && std::isfinite(b), "response_probability: non-finite argument");
    return stable_sigmoid(theta - b);
}

/// Log-probability of a single graded response.
inline double response_log_probability(bool correct, double theta, double b) {
    const double d = theta - b;
    return correct ? log_sigmoid(d) : log_sigmoid(-d);
}

/**
 * Binary graded responses of J models on I items.
 *
 * Cells are stored row-major (model-major). A cell may be `kMissing` when the matrix was
 * read from a sparse long-format file; missing cells do not contribute to any likelihood.
 */
class ResponseMatrix {
public:
    static constexpr std::int8_t kMissing = -1;

    ResponseMatrix() = default;

    ResponseMatrix(std::vector<std::string> model_ids, std::vector<std::string> item_ids)
        : model_ids_(std::move(model_ids)), item_ids_(std::move(item_ids)),
          cells_(model_ids_.size() * item_ids_.size(), kMissing) {
        validate_ids();
    }

    ResponseMatrix(std::vector<std::string> model_ids, std::vector<std::string> item_ids, std::vector<std::int8_t> cells)
        : model_ids_(std::move(model_ids)), item_ids_(std::move(item_ids)), cells_(std::move(cells)) {
        validate_ids();
        detail::require(cells_.size() == model_ids_.size() * item_ids_.size(), "ResponseMatrix: cell count does not match J x I");
        for (auto c : cells_) {
            detail::require(c == 0 || c == 1 || c == kMissing, "ResponseMatrix: cells must be 0 or 1");
        }
    }

    /// Dense matrix with generated ids `m0..`, `i0..`.
    static ResponseMatrix from_rows(const std::vector<std::vector<int>>& rows) {
        detail::require(!rows.empty() && !rows.front().empty(), "ResponseMatrix: empty matrix");
        const std::size_t n_items = rows.front().size();
        std::vector<std::string> mids, iids;
        for (std::size_t j = 0; j < rows.size(); ++j) {
            mids.push_back("m" + std::to_string(j));
        }
        for (std::size_t i = 0; i < n_items; ++i) {
            iids.push_back("i" + std::to_string(i));
        }
        std::vector<std::int8_t> cells;
        cells.reserve(rows.size() * n_items);
        for (const auto& r : rows) {
            detail::require(r.size() == n_items, "ResponseMatrix: ragged rows");
            for (int v : r) {
                cells.push_back(static_cast<std::int8_t>(v));
            }
        }
        return ResponseMatrix(std::move(mids), std::move(iids), std::move(cells));
    }

    std::size_t n_models() const { return model_ids_.size(); }
    std::size_t n_items() const { return item_ids_.size(); }
    bool empty() const { return cells_.empty(); }

    const std::vector<std::string>& model_ids() const { return model_ids_; }
    const std::vector<std::string>& item_ids() const { return item_ids_; }

    std::int8_t at(std::size_t model, std::size_t item) const { return cells_[model * n_items() + item]; }
    bool observed(std::size_t model, std::size_t item) const { return at(model, item) != kMissing; }

    void set(std::size_t model, std::size_t item, int value) {
        detail::require(value == 0 || value == 1 || value == kMissing, "ResponseMatrix: cells must be 0 or 1");
        cells_[model * n_items() + item] = static_cast<std::int8_t>(value);
    }

    std::span<const std::int8_t> row(std::size_t model) const {
        return std::span<const std::int8_t>(cells_).subspan(model * n_items(), n_items());
    }

    const std::vector<std::int8_t>& cells() const { return cells_; }

    std::size_t n_observed() const {
        std::size_t n = 0;
        for (auto c : cells_) {
            n += (c != kMissing);
        }
        return n;
    }

    friend bool operator==(const ResponseMatrix&, const ResponseMatrix&) = default;

private:
    void validate_ids() const {
        detail::require(!model_ids_.empty() && !item_ids_.empty(), "ResponseMatrix: need at least one model and one item");
        std::unordered_set<std::string> seen(model_ids_.begin(), model_ids_.end());
        detail::require(seen.size() == model_ids_.size(), "ResponseMatrix: duplicate model id");
        seen = std::unordered_set<std::string>(item_ids_.begin(), item_ids_.end());
        detail::require(seen.size() == item_ids_.size(), "ResponseMatrix: duplicate item id");
    }

    std::vector<std::string> model_ids_;
    std::vector<std::string> item_ids_;
    std::vector<std::int8_t> cells_;
};

/**
 * Joint log-likelihood of all observed cells of `z` given abilities and difficulties.
 * The result is always <= 0.
 */
inline double response_log_likelihood(const ResponseMatrix& z, std::span<const double> thetas, std::span<const double> bs) {
    detail::require(thetas.size() == z.n_models(), "response_log_likelihood: thetas size does not match models");
    detail::require(bs.size() == z.n_items(), "response_log_likelihood: bs size does not match items");
    for (double t : thetas) {
        detail::require(std::isfinite(t), "response_log_likelihood: non-finite ability");
    }
    for (double b : bs) {
        detail::require(std::isfinite(b), "response_log_likelihood: non-finite difficulty");
    }
    double total = 0.0;
    for (std::size_t j = 0; j < z.n_models(); ++j) {
        const auto r = z.row(j);
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (r[i] != ResponseMatrix::kMissing) {
                total += response_log_probability(r[i] == 1, thetas[j], bs[i]);
            }
        }
    }
    return total;
}

/// Indicator vector of `predicted[k] == gold[k]`. Labels are compared by equality only.
template<typename Label>
std::vector<std::int8_t> grade_responses(std::span<const Label> predicted, std::span<const Label> gold) {
    detail::require(predicted.size() == gold.size(), "grade_responses: length mismatch");
    std::vector<std::int8_t> out(predicted.size());
    for (std::size_t k = 0; k < predicted.size(); ++k) {
        out[k] = predicted[k] == gold[k] ? 1 : 0;
    }
    return out;
}

template<typename Label>
std::vector<std::int8_t> grade_responses(const std::vector<Label>& predicted, const std::vector<Label>& gold) {
    return grade_responses(std::span<const Label>(predicted), std::span<const Label>(gold));
}

} // namespace irtcl

#endif
