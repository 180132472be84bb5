#include "uoda/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace uoda {

EigenResult jacobi_eigen_symmetric(const std::vector<std::vector<double>>& a) {
    std::size_t n = a.size();
    for (const auto& row : a) {
        if (row.size() != n) throw ContractError("jacobi: matrix must be square");
    }
    std::vector<std::vector<double>> m = a;
    std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) off += m[p][q] * m[p][q];
        }
        if (off < 1e-24) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (m[p][q] == 0.0) continue;
                double theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    double mkp = m[k][p], mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double mpk = m[p][k], mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return m[x][x] > m[y][y]; });

    EigenResult res;
    for (std::size_t oi = 0; oi < n; ++oi) {
        std::size_t i = order[oi];
        res.values.push_back(m[i][i]);
        std::vector<double> vec(n);
        for (std::size_t k = 0; k < n; ++k) vec[k] = v[k][i];
        std::size_t arg = 0;
        for (std::size_t k = 1; k < n; ++k) {
            if (std::abs(vec[k]) > std::abs(vec[arg])) arg = k;
        }
        if (vec[arg] < 0.0) {
            for (double& x : vec) x = -x;
        }
        res.vectors.push_back(std::move(vec));
    }
    return res;
}

std::vector<std::vector<double>> pca_top2(const FeatureSnapshot& snapshot) {
    auto d = static_cast<std::size_t>(snapshot.feature_dim);
    if (d < 2) throw ContractError("pca_top2 needs feature_dim >= 2");
    std::size_t n = snapshot.rows.size();
    std::vector<double> mean(d, 0.0);
    for (const SnapshotRow& r : snapshot.rows) {
        for (std::size_t j = 0; j < d; ++j) mean[j] += r.feature[j];
    }
    for (double& x : mean) x /= static_cast<double>(n);

    std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
    for (const SnapshotRow& r : snapshot.rows) {
        for (std::size_t i = 0; i < d; ++i) {
            double ci = r.feature[i] - mean[i];
            for (std::size_t j = i; j < d; ++j) {
                cov[i][j] += ci * (r.feature[j] - mean[j]);
            }
        }
    }
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i; j < d; ++j) {
            cov[i][j] /= static_cast<double>(n);
            cov[j][i] = cov[i][j];
        }
    }
    EigenResult eig = jacobi_eigen_symmetric(cov);
    return {eig.vectors[0], eig.vectors[1]};
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

const char* label_color(int label) {
    static const char* palette[] = {"#d62728", "#1f77b4", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};
    if (label < 0) return "#999999";
    return palette[label % 8];
}

}  // namespace

std::string scatter_svg(const FeatureSnapshot& snapshot) {
    const double width = 640.0, height = 480.0, margin = 40.0;

    std::vector<std::pair<double, double>> points;
    points.reserve(snapshot.rows.size());
    if (!snapshot.rows.empty()) {
        if (snapshot.feature_dim == 2) {
            for (const SnapshotRow& r : snapshot.rows) points.emplace_back(r.feature[0], r.feature[1]);
        } else {
            auto axes = pca_top2(snapshot);
            for (const SnapshotRow& r : snapshot.rows) {
                double u = 0.0, w = 0.0;
                for (std::size_t j = 0; j < r.feature.size(); ++j) {
                    u += axes[0][j] * r.feature[j];
                    w += axes[1][j] * r.feature[j];
                }
                points.emplace_back(u, w);
            }
        }
    }

    double xmin = -1.0, xmax = 1.0, ymin = -1.0, ymax = 1.0;
    if (!points.empty()) {
        xmin = xmax = points[0].first;
        ymin = ymax = points[0].second;
        for (auto& [x, y] : points) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
        if (xmax - xmin < 1e-12) { xmin -= 1.0; xmax += 1.0; }
        if (ymax - ymin < 1e-12) { ymin -= 1.0; ymax += 1.0; }
    }
    auto sx = [&](double x) { return margin + (x - xmin) / (xmax - xmin) * (width - 2 * margin); };
    auto sy = [&](double y) { return height - margin - (y - ymin) / (ymax - ymin) * (height - 2 * margin); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    svg << "<line x1=\"" << fmt(margin) << "\" y1=\"" << fmt(height - margin) << "\" x2=\""
        << fmt(width - margin) << "\" y2=\"" << fmt(height - margin)
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    svg << "<line x1=\"" << fmt(margin) << "\" y1=\"" << fmt(margin) << "\" x2=\"" << fmt(margin)
        << "\" y2=\"" << fmt(height - margin) << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << fmt(margin) << "\" y=\"" << fmt(margin - 10.0)
        << "\" font-size=\"12\">epoch " << snapshot.epoch << "</text>\n";

    for (std::size_t i = 0; i < snapshot.rows.size(); ++i) {
        const SnapshotRow& r = snapshot.rows[i];
        double x = sx(points[i].first), y = sy(points[i].second);
        const char* color = label_color(r.label);
        if (r.domain == "source") {
            svg << "<circle cx=\"" << fmt(x) << "\" cy=\"" << fmt(y)
                << "\" r=\"2.5\" fill=\"" << color << "\" fill-opacity=\"0.7\"/>\n";
        } else {
            double arm = r.domain == "target_labeled" ? 4.0 : 2.5;
            svg << "<path d=\"M" << fmt(x - arm) << " " << fmt(y - arm) << " L" << fmt(x + arm)
                << " " << fmt(y + arm) << " M" << fmt(x - arm) << " " << fmt(y + arm) << " L"
                << fmt(x + arm) << " " << fmt(y - arm) << "\" stroke=\"" << color
                << "\" stroke-width=\"1.2\"/>\n";
        }
    }
    svg << "</svg>\n";
    return svg.str();
}

void emit_scatter_svg(const FeatureSnapshot& snapshot, const std::string& out_path) {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write SVG: " + out_path);
    out << scatter_svg(snapshot);
    if (!out) throw std::runtime_error("write failure: " + out_path);
}

}  // namespace uoda
