// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "glcanet/errors.hpp"

namespace glcanet {

/// counts[g][p]: pixels with ground truth g predicted as p.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t num_classes) : k_(num_classes), counts_(num_classes * num_classes, 0) {
        if (num_classes == 0) throw UsageError("ConfusionMatrix: need at least one class");
    }

    std::size_t num_classes() const noexcept { return k_; }
    std::uint64_t at(std::size_t gt, std::size_t pred) const { return counts_.at(gt * k_ + pred); }

    std::uint64_t total() const {
        std::uint64_t n = 0;
        for (auto c : counts_) n += c;
        return n;
    }

    /// Adds one image. Pixels whose ground truth equals `ignore` are skipped.
    void accumulate(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt,
                    std::optional<std::uint8_t> ignore = std::uint8_t{255}) {
        if (pred.size() != gt.size()) {
            throw DimensionError("confusion matrix: prediction has " + std::to_string(pred.size())
                                 + " pixels, ground truth " + std::to_string(gt.size()));
        }
        // Validate first so a bad map leaves the matrix untouched.
        for (std::size_t i = 0; i < gt.size(); ++i) {
            if (ignore && gt[i] == *ignore) continue;
            if (gt[i] >= k_ || pred[i] >= k_) {
                throw DataError("confusion matrix: class " + std::to_string(gt[i] >= k_ ? gt[i] : pred[i])
                                + " at pixel " + std::to_string(i) + " outside [0, " + std::to_string(k_) + ")");
            }
        }
        for (std::size_t i = 0; i < gt.size(); ++i) {
            if (ignore && gt[i] == *ignore) continue;
            ++counts_[gt[i] * k_ + pred[i]];
        }
    }

    void merge(const ConfusionMatrix& other) {
        if (other.k_ != k_) throw DimensionError("confusion matrix: cannot merge different class counts");
        for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    }

    bool operator==(const ConfusionMatrix&) const = default;

private:
    std::size_t k_;
    std::vector<std::uint64_t> counts_;
};

/// IoU per class; nullopt for classes absent from both prediction and truth.
inline std::vector<std::optional<double>> iou_per_class(const ConfusionMatrix& cm) {
    const std::size_t K = cm.num_classes();
    std::vector<std::optional<double>> out(K);
    for (std::size_t k = 0; k < K; ++k) {
        const std::uint64_t tp = cm.at(k, k);
        std::uint64_t fp = 0, fn = 0;
        for (std::size_t j = 0; j < K; ++j) {
            if (j == k) continue;
            fp += cm.at(j, k);
            fn += cm.at(k, j);
        }
        const std::uint64_t denom = tp + fp + fn;
        if (denom > 0) out[k] = static_cast<double>(tp) / static_cast<double>(denom);
    }
    return out;
}

/// Mean over present classes; NaN when none is present.
inline double miou(const ConfusionMatrix& cm) {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& v : iou_per_class(cm)) {
        if (v) {
            sum += *v;
            ++n;
        }
    }
    return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

inline double overall_accuracy(const ConfusionMatrix& cm) {
    const std::uint64_t total = cm.total();
    if (total == 0) return std::numeric_limits<double>::quiet_NaN();
    std::uint64_t diag = 0;
    for (std::size_t k = 0; k < cm.num_classes(); ++k) diag += cm.at(k, k);
    return static_cast<double>(diag) / static_cast<double>(total);
}

/// {"image", "per_class_iou" (null for absent classes), "miou", "oa"}.
inline nlohmann::json metrics_json(const std::string& image, const ConfusionMatrix& cm) {
    nlohmann::json ious = nlohmann::json::array();
    for (const auto& v : iou_per_class(cm)) ious.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
    auto num = [](double x) { return std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x); };
    return {{"image", image}, {"per_class_iou", ious}, {"miou", num(miou(cm))}, {"oa", num(overall_accuracy(cm))}};
}

} // namespace glcanet
