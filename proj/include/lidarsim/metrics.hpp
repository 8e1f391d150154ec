#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lidarsim/image.hpp"
#include "lidarsim/lidar_image.hpp"

namespace lidarsim::metrics {

/// Error aggregates between predicted and ground-truth visibility maps.
/// Sums are kept internally so aggregation equals evaluating the
/// concatenation; the percentage accessors mirror the reported columns.
struct MetricsReport {
    double sum_abs = 0;   // sum |A - B|
    double sum_pos = 0;   // sum max(A - B, 0)
    double sum_neg = 0;   // sum max(B - A, 0)
    double sum_sq = 0;    // sum (A - B)^2
    std::int64_t pixel_count = 0;
    std::int64_t pair_count = 0;

    double l1() const { return pixel_count ? 100.0 * sum_abs / pixel_count : 0.0; }
    double l1_pos() const { return pixel_count ? 100.0 * sum_pos / pixel_count : 0.0; }
    double l1_neg() const { return pixel_count ? 100.0 * sum_neg / pixel_count : 0.0; }
    /// Root-mean-square error in percent.
    double l2() const {
        return pixel_count ? 100.0 * std::sqrt(sum_sq / pixel_count) : 0.0;
    }
};

/// Per-pair errors, prediction first: L1 = mean|A-B|, L1+ = mean max(A-B,0),
/// L1- = mean max(B-A,0), L2 = RMSE, all x100.
MetricsReport evaluate_pair(const VisibilityMap& prediction, const VisibilityMap& ground_truth);

/// Pixel-weighted pooling of the underlying sums.
MetricsReport aggregate(const std::vector<MetricsReport>& reports);

enum class TableFormat { Csv, Markdown };

/// One row per (label, report); columns L1, L1+, L1-, L2 with two decimals.
std::string emit_table(const std::vector<std::pair<std::string, MetricsReport>>& rows,
                       TableFormat format);

std::string report_to_json(const MetricsReport& report, const std::string& label);

/// Prediction in the red channel, ground truth in green; agreement shows as
/// yellow.
ImageU8 overlay(const VisibilityMap& prediction, const VisibilityMap& ground_truth);

}  // namespace lidarsim::metrics
