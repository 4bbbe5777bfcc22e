// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "zslforge/error.hpp"
#include "zslforge/nn/matrix.hpp"

namespace zslforge::io {

struct Series {
    std::string name;
    std::vector<double> y;
};

namespace svg_detail {

inline constexpr double width = 640.0;
inline constexpr double height = 400.0;
inline constexpr double margin = 50.0;

inline const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    return colors[i % 8];
}

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

inline std::string open(const std::string& title) {
    std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) + "\" viewBox=\"0 0 " +
         num(width) + " " + num(height) + "\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + num(width / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" + escape(title) +
         "</text>\n";
    s += "<line x1=\"" + num(margin) + "\" y1=\"" + num(height - margin) + "\" x2=\"" + num(width - margin) + "\" y2=\"" +
         num(height - margin) + "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + num(margin) + "\" y1=\"" + num(margin) + "\" x2=\"" + num(margin) + "\" y2=\"" + num(height - margin) +
         "\" stroke=\"black\"/>\n";
    return s;
}

inline std::string axis_labels(double lo, double hi) {
    return "<text x=\"" + num(margin - 4) + "\" y=\"" + num(height - margin) + "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" +
           num(lo) + "</text>\n<text x=\"" + num(margin - 4) + "\" y=\"" + num(margin + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + num(hi) + "</text>\n";
}

} // namespace svg_detail

/// One polyline per series; a series of n values yields exactly n points.
inline std::string line_plot_svg(const std::string& title, const std::vector<Series>& series) {
    using namespace svg_detail;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    std::size_t n = 0;
    for (const auto& s : series) {
        for (double v : s.y) {
            if (!std::isfinite(v)) fail(ErrorCode::format_error, "plot: non-finite value in series '" + s.name + "'");
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        n = std::max(n, s.y.size());
    }
    if (n == 0) fail(ErrorCode::empty_input, "plot: no data points");
    if (hi == lo) {
        hi += 0.5;
        lo -= 0.5;
    }
    std::string out = open(title) + axis_labels(lo, hi);
    const double span_x = width - 2 * margin;
    const double span_y = height - 2 * margin;
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        std::string pts;
        for (std::size_t i = 0; i < s.y.size(); ++i) {
            const double x = margin + (n > 1 ? span_x * static_cast<double>(i) / static_cast<double>(n - 1) : span_x / 2);
            const double y = height - margin - span_y * (s.y[i] - lo) / (hi - lo);
            if (!pts.empty()) pts += ' ';
            pts += num(x) + "," + num(y);
        }
        out += "<polyline data-series=\"" + escape(s.name) + "\" fill=\"none\" stroke=\"" + palette(k) + "\" stroke-width=\"1.5\" points=\"" + pts +
               "\"/>\n";
        out += "<text x=\"" + num(width - margin + 4) + "\" y=\"" + num(margin + 14.0 * static_cast<double>(k)) + "\" fill=\"" + palette(k) +
               "\" font-family=\"sans-serif\" font-size=\"10\">" + escape(s.name) + "</text>\n";
    }
    return out + "</svg>\n";
}

/// One bar per value.
inline std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& labels, const std::vector<double>& values) {
    using namespace svg_detail;
    if (labels.size() != values.size()) fail(ErrorCode::shape_mismatch, "bar chart: label/value count");
    if (values.empty()) fail(ErrorCode::empty_input, "bar chart: no bars");
    double hi = 0.0;
    for (double v : values) {
        if (!std::isfinite(v)) fail(ErrorCode::format_error, "bar chart: non-finite value");
        hi = std::max(hi, v);
    }
    if (hi <= 0.0) hi = 1.0;
    std::string out = open(title) + axis_labels(0.0, hi);
    const double slot = (width - 2 * margin) / static_cast<double>(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double h = (height - 2 * margin) * std::max(values[i], 0.0) / hi;
        const double x = margin + slot * static_cast<double>(i) + slot * 0.1;
        out += "<rect data-label=\"" + escape(labels[i]) + "\" x=\"" + num(x) + "\" y=\"" + num(height - margin - h) + "\" width=\"" + num(slot * 0.8) +
               "\" height=\"" + num(h) + "\" fill=\"" + palette(i) + "\"/>\n";
        out += "<text x=\"" + num(x + slot * 0.4) + "\" y=\"" + num(height - margin + 12) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"8\">" + escape(labels[i]) + "</text>\n";
        out += "<text x=\"" + num(x + slot * 0.4) + "\" y=\"" + num(height - margin - h - 3) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"9\">" + num(values[i]) + "</text>\n";
    }
    return out + "</svg>\n";
}

/// First two principal components of the centered rows.
inline Matrix pca_2d(const Matrix& x) {
    if (x.rows() == 0) fail(ErrorCode::empty_input, "pca: no rows");
    const Matrix centered = x.rowwise() - x.colwise().mean();
    Eigen::JacobiSVD<Matrix> svd(centered, Eigen::ComputeThinV);
    const Eigen::Index k = std::min<Eigen::Index>(2, svd.matrixV().cols());
    Matrix out = Matrix::Zero(x.rows(), 2);
    out.leftCols(k) = centered * svd.matrixV().leftCols(k);
    return out;
}

/// Labeled 2D scatter of rows projected onto their top principal plane.
inline std::string pca_scatter_svg(const std::string& title, const Matrix& x, const std::vector<std::string>& labels) {
    using namespace svg_detail;
    if (static_cast<Eigen::Index>(labels.size()) != x.rows()) fail(ErrorCode::shape_mismatch, "scatter: label count");
    const Matrix p = pca_2d(x);
    const double x0 = p.col(0).minCoeff(), x1 = p.col(0).maxCoeff();
    const double y0 = p.col(1).minCoeff(), y1 = p.col(1).maxCoeff();
    const double sx = x1 > x0 ? x1 - x0 : 1.0;
    const double sy = y1 > y0 ? y1 - y0 : 1.0;
    std::string out = open(title);
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double cx = margin + (width - 2 * margin) * (p(i, 0) - x0) / sx;
        const double cy = height - margin - (height - 2 * margin) * (p(i, 1) - y0) / sy;
        out += "<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"3\" fill=\"#1f77b4\"/>\n";
        out += "<text x=\"" + num(cx + 4) + "\" y=\"" + num(cy - 4) + "\" font-family=\"sans-serif\" font-size=\"8\">" +
               escape(labels[static_cast<std::size_t>(i)]) + "</text>\n";
    }
    return out + "</svg>\n";
}

} // namespace zslforge::io
