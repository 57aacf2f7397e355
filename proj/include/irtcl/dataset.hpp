#ifndef IRTCL_DATASET_HPP
#define IRTCL_DATASET_HPP

#include "curriculum.hpp"
#include "error.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace irtcl {

/**
 * Labeled examples with dense real features.
 *
 * `planted_margin` and `text` are optional side columns: either empty or one entry per example.
 * Labels are class indices in [0, n_classes).
 */
struct Dataset {
    std::size_t n_features = 0;
    std::size_t n_classes = 2;
    std::vector<std::string> ids;
    std::vector<double> features; // row-major, size() * n_features
    std::vector<int> labels;
    std::vector<double> planted_margin;
    std::vector<TextExample> text;

    std::size_t size() const { return labels.size(); }
    bool empty() const { return labels.empty(); }

    std::span<const double> row(std::size_t k) const {
        return std::span<const double>(features).subspan(k * n_features, n_features);
    }

    void validate() const {
        detail::require(n_classes >= 1, "Dataset: need at least one class");
        detail::require(features.size() == labels.size() * n_features, "Dataset: feature matrix size mismatch");
        detail::require(ids.size() == labels.size(), "Dataset: id count mismatch");
        detail::require(planted_margin.empty() || planted_margin.size() == labels.size(), "Dataset: planted_margin size mismatch");
        detail::require(text.empty() || text.size() == labels.size(), "Dataset: text size mismatch");
        for (int y : labels) {
            detail::require(y >= 0 && static_cast<std::size_t>(y) < n_classes, "Dataset: label out of range");
        }
    }

    /// Examples at `indices`, in that order.
    Dataset subset(std::span<const std::size_t> indices) const {
        Dataset out;
        out.n_features = n_features;
        out.n_classes = n_classes;
        out.features.reserve(indices.size() * n_features);
        for (std::size_t k : indices) {
            detail::require(k < size(), "Dataset::subset: index out of range");
            out.ids.push_back(ids[k]);
            const auto r = row(k);
            out.features.insert(out.features.end(), r.begin(), r.end());
            out.labels.push_back(labels[k]);
            if (!planted_margin.empty()) {
                out.planted_margin.push_back(planted_margin[k]);
            }
            if (!text.empty()) {
                out.text.push_back(text[k]);
            }
        }
        return out;
    }

    void append(const Dataset& other) {
        if (empty() && ids.empty()) {
            n_features = other.n_features;
            n_classes = other.n_classes;
        }
        detail::require(other.n_features == n_features, "Dataset::append: feature dimension mismatch");
        n_classes = std::max(n_classes, other.n_classes);
        const bool had_margin = !planted_margin.empty() || empty();
        const bool had_text = !text.empty() || empty();
        ids.insert(ids.end(), other.ids.begin(), other.ids.end());
        features.insert(features.end(), other.features.begin(), other.features.end());
        labels.insert(labels.end(), other.labels.begin(), other.labels.end());
        if (had_margin && !other.planted_margin.empty()) {
            planted_margin.insert(planted_margin.end(), other.planted_margin.begin(), other.planted_margin.end());
        } else {
            planted_margin.clear();
        }
        if (had_text && !other.text.empty()) {
            text.insert(text.end(), other.text.begin(), other.text.end());
        } else {
            text.clear();
        }
    }

    friend bool operator==(const Dataset& a, const Dataset& b) {
        auto same_text = [](const std::vector<TextExample>& x, const std::vector<TextExample>& y) {
            if (x.size() != y.size()) {
                return false;
            }
            for (std::size_t k = 0; k < x.size(); ++k) {
                if (x[k].first != y[k].first || x[k].second != y[k].second) {
                    return false;
                }
            }
            return true;
        };
        return a.n_features == b.n_features && a.n_classes == b.n_classes && a.ids == b.ids && a.features == b.features &&
               a.labels == b.labels && a.planted_margin == b.planted_margin && same_text(a.text, b.text);
    }
};

inline std::vector<std::size_t> all_indices(const Dataset& d) {
    std::vector<std::size_t> idx(d.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        idx[k] = k;
    }
    return idx;
}

} // namespace irtcl

#endif
