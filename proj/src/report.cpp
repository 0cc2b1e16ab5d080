#include <algorithm>
#include <cmath>
#include <string>

#include "mum/io_util.hpp"
#include "mum/pipeline.hpp"

namespace mum::pipeline {

namespace {

namespace fs = std::filesystem;

// fixed-size line chart; no timestamps, so identical runs emit identical bytes
std::string elbow_svg(const kmeans::ElbowScan& scan) {
    const double width = 640, height = 420;
    const double left = 70, right = 20, top = 20, bottom = 50;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;

    double k_min = scan.entries.front().k, k_max = scan.entries.back().k;
    if (k_max == k_min) k_max = k_min + 1;
    double h_min = scan.entries.front().heterogeneity, h_max = h_min;
    for (const auto& e : scan.entries) {
        h_min = std::min(h_min, e.heterogeneity);
        h_max = std::max(h_max, e.heterogeneity);
    }
    if (h_max == h_min) h_max = h_min + 1;

    auto x_of = [&](double k) { return left + (k - k_min) / (k_max - k_min) * plot_w; };
    auto y_of = [&](double h) { return top + (h_max - h) / (h_max - h_min) * plot_h; };

    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" "
           "viewBox=\"0 0 640 420\">\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"420\" fill=\"white\"/>\n";
    svg += "<line x1=\"" + format_double(left) + "\" y1=\"" + format_double(top) + "\" x2=\"" +
           format_double(left) + "\" y2=\"" + format_double(top + plot_h) +
           "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + format_double(left) + "\" y1=\"" + format_double(top + plot_h) +
           "\" x2=\"" + format_double(left + plot_w) + "\" y2=\"" + format_double(top + plot_h) +
           "\" stroke=\"black\"/>\n";

    std::string points;
    for (const auto& e : scan.entries) {
        points += format_double(x_of(static_cast<double>(e.k)), 6) + "," +
                  format_double(y_of(e.heterogeneity), 6) + " ";
    }
    svg += "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"" + points +
           "\"/>\n";
    for (const auto& e : scan.entries) {
        svg += "<circle cx=\"" + format_double(x_of(static_cast<double>(e.k)), 6) + "\" cy=\"" +
               format_double(y_of(e.heterogeneity), 6) + "\" r=\"3\" fill=\"steelblue\"/>\n";
        svg += "<text x=\"" + format_double(x_of(static_cast<double>(e.k)), 6) + "\" y=\"" +
               format_double(top + plot_h + 18) + "\" font-size=\"11\" text-anchor=\"middle\">" +
               std::to_string(e.k) + "</text>\n";
    }
    const double sx = x_of(static_cast<double>(scan.suggested_k));
    svg += "<line x1=\"" + format_double(sx, 6) + "\" y1=\"" + format_double(top) + "\" x2=\"" +
           format_double(sx, 6) + "\" y2=\"" + format_double(top + plot_h) +
           "\" stroke=\"firebrick\" stroke-dasharray=\"4 3\"/>\n";
    svg += "<text x=\"" + format_double(width / 2) + "\" y=\"" + format_double(height - 12) +
           "\" font-size=\"12\" text-anchor=\"middle\">K</text>\n";
    svg += "<text x=\"16\" y=\"" + format_double(height / 2) +
           "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
           format_double(height / 2) + ")\">heterogeneity</text>\n";
    svg += "<text x=\"" + format_double(left + 8) + "\" y=\"" + format_double(top + 14) +
           "\" font-size=\"12\">suggested K = " + std::to_string(scan.suggested_k) + "</text>\n";
    svg += "</svg>\n";
    return svg;
}

} // namespace

void emit_report(const std::filesystem::path& out_dir, const ReportInputs& inputs) {
    const fs::path report = out_dir / "report";
    fs::create_directories(report);

    if (inputs.scan != nullptr && !inputs.scan->entries.empty()) {
        kmeans::write_scan_csv(report / "elbow.csv", *inputs.scan);
        write_text_file(report / "elbow.svg", elbow_svg(*inputs.scan));
    }

    if (inputs.responsibilities != nullptr) {
        constexpr std::size_t kMaxPerTopic = 50;
        std::string csv = "topic,rank,tweet_id,responsibility\n";
        const auto& resp = *inputs.responsibilities;
        for (std::size_t topic = 0; topic < resp.values.cols(); ++topic) {
            const auto ids =
                gmm::top_tweets_per_topic(resp, topic, inputs.top_tweet_threshold);
            std::unordered_map<std::string, double> value_of;
            for (std::size_t i = 0; i < resp.ids.size(); ++i) {
                value_of[resp.ids[i]] = resp.values(i, topic);
            }
            for (std::size_t r = 0; r < std::min(kMaxPerTopic, ids.size()); ++r) {
                csv += std::to_string(topic) + ',' + std::to_string(r + 1) + ',' +
                       csv_safe(ids[r]) + ',' + format_double(value_of.at(ids[r]), 12) + '\n';
            }
        }
        write_text_file(report / "top_tweets.csv", csv);
    }

    if (inputs.mum_evaluation != nullptr) {
        const auto& mum_eval = *inputs.mum_evaluation;
        std::string csv = "cluster_id,total_size_mum";
        if (inputs.has_cohort) csv += ",cohort_mum";
        if (inputs.baseline_evaluation != nullptr) {
            csv += ",total_size_baseline";
            if (inputs.has_cohort) csv += ",cohort_baseline";
        }
        csv += '\n';
        const std::size_t rows =
            std::max(mum_eval.cluster_sizes.size(),
                     inputs.baseline_evaluation != nullptr
                         ? inputs.baseline_evaluation->cluster_sizes.size()
                         : std::size_t{0});
        for (std::size_t c = 0; c < rows; ++c) {
            csv += std::to_string(c);
            csv += ',';
            csv += c < mum_eval.cluster_sizes.size() ? std::to_string(mum_eval.cluster_sizes[c])
                                                     : std::string();
            if (inputs.has_cohort) {
                csv += ',';
                csv += c < mum_eval.cohort_distribution.size()
                           ? std::to_string(mum_eval.cohort_distribution[c])
                           : std::string();
            }
            if (inputs.baseline_evaluation != nullptr) {
                const auto& b = *inputs.baseline_evaluation;
                csv += ',';
                csv += c < b.cluster_sizes.size() ? std::to_string(b.cluster_sizes[c])
                                                  : std::string();
                if (inputs.has_cohort) {
                    csv += ',';
                    csv += c < b.cohort_distribution.size()
                               ? std::to_string(b.cohort_distribution[c])
                               : std::string();
                }
            }
            csv += '\n';
        }
        write_text_file(report / "cluster_table.csv", csv);
    }
}

} // namespace mum::pipeline
