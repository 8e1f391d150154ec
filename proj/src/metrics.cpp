#include "lidarsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "lidarsim/error.hpp"
#include "lidarsim/png_io.hpp"

namespace lidarsim::metrics {

MetricsReport evaluate_pair(const VisibilityMap& prediction, const VisibilityMap& ground_truth) {
    if (prediction.width != ground_truth.width || prediction.height != ground_truth.height)
        raise("DimensionMismatch", "prediction and ground truth dimensions differ");
    MetricsReport r;
    for (std::size_t i = 0; i < prediction.values.size(); ++i) {
        const double d = static_cast<double>(prediction.values[i]) -
                         static_cast<double>(ground_truth.values[i]);
        r.sum_abs += std::abs(d);
        r.sum_pos += std::max(d, 0.0);
        r.sum_neg += std::max(-d, 0.0);
        r.sum_sq += d * d;
    }
    r.pixel_count = static_cast<std::int64_t>(prediction.values.size());
    r.pair_count = 1;
    return r;
}

MetricsReport aggregate(const std::vector<MetricsReport>& reports) {
    if (reports.empty()) raise("EmptyInput", "aggregate requires at least one report");
    MetricsReport out;
    for (const auto& r : reports) {
        out.sum_abs += r.sum_abs;
        out.sum_pos += r.sum_pos;
        out.sum_neg += r.sum_neg;
        out.sum_sq += r.sum_sq;
        out.pixel_count += r.pixel_count;
        out.pair_count += r.pair_count;
    }
    return out;
}

namespace {

std::string two_decimals(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

std::string emit_table(const std::vector<std::pair<std::string, MetricsReport>>& rows,
                       TableFormat format) {
    if (rows.empty()) raise("EmptyInput", "emit_table requires at least one row");
    std::string out;
    if (format == TableFormat::Csv) {
        out += "label,L1,L1+,L1-,L2\n";
        for (const auto& [label, r] : rows) {
            std::string quoted = label;
            if (quoted.find(',') != std::string::npos) quoted = "\"" + quoted + "\"";
            out += quoted + "," + two_decimals(r.l1()) + "," + two_decimals(r.l1_pos()) + "," +
                   two_decimals(r.l1_neg()) + "," + two_decimals(r.l2()) + "\n";
        }
    } else {
        out += "| label | L1 | L1+ | L1- | L2 |\n";
        out += "| --- | --- | --- | --- | --- |\n";
        for (const auto& [label, r] : rows)
            out += "| " + label + " | " + two_decimals(r.l1()) + " | " +
                   two_decimals(r.l1_pos()) + " | " + two_decimals(r.l1_neg()) + " | " +
                   two_decimals(r.l2()) + " |\n";
    }
    return out;
}

std::string report_to_json(const MetricsReport& report, const std::string& label) {
    nlohmann::ordered_json doc;
    doc["label"] = label;
    doc["l1"] = report.l1();
    doc["l1_pos"] = report.l1_pos();
    doc["l1_neg"] = report.l1_neg();
    doc["l2"] = report.l2();
    doc["pixel_count"] = report.pixel_count;
    doc["pair_count"] = report.pair_count;
    return doc.dump();
}

ImageU8 overlay(const VisibilityMap& prediction, const VisibilityMap& ground_truth) {
    if (prediction.width != ground_truth.width || prediction.height != ground_truth.height)
        raise("DimensionMismatch", "prediction and ground truth dimensions differ");
    ImageU8 img(prediction.width, prediction.height, 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const float p = std::clamp(prediction.at(x, y), 0.0f, 1.0f);
            const float g = std::clamp(ground_truth.at(x, y), 0.0f, 1.0f);
            img.at(x, y, 0) = static_cast<std::uint8_t>(std::lround(255.0f * p));
            img.at(x, y, 1) = static_cast<std::uint8_t>(std::lround(255.0f * g));
            img.at(x, y, 2) = 0;
        }
    }
    return img;
}

}  // namespace lidarsim::metrics
