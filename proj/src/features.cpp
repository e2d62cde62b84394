#include "radisynth/features.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <sstream>
#include <unordered_map>

#include "radisynth/errors.hpp"
#include "radisynth/geom.hpp"

namespace radisynth {

ThresholdResult threshold_map(const FeatureMap& map, double tau) {
    if (tau < 0 || tau > 1) throw ValidationError("threshold tau must be in [0, 1]");
    ThresholdResult out;
    out.mask = MaskImage(map.score.width, map.score.height);
    for (int y = 0; y < map.score.height; ++y)
        for (int x = 0; x < map.score.width; ++x)
            if (map.score.at(x, y) >= tau) {
                out.mask.at(x, y) = 1;
                out.points.push_back({static_cast<double>(x), static_cast<double>(y)});
            }
    return out;
}

ClusterSet dbscan(const PointSet& points, double eps, int min_pts) {
    if (eps <= 0) throw ValidationError("dbscan eps must be > 0");
    if (min_pts < 1) throw ValidationError("dbscan minPts must be >= 1");
    for (const auto& p : points)
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw ValidationError("dbscan: non-finite point coordinates");

    const std::size_t n = points.size();
    ClusterSet out;
    out.eps = eps;
    out.min_pts = min_pts;
    out.labels.assign(n, kNoise);
    if (n == 0) return out;

    // uniform grid of cell size eps keeps neighbor queries local
    double minx = points[0].x, miny = points[0].y;
    for (const auto& p : points) {
        minx = std::min(minx, p.x);
        miny = std::min(miny, p.y);
    }
    auto cell = [&](const Point2& p) {
        return std::pair<long long, long long>(
            static_cast<long long>(std::floor((p.x - minx) / eps)),
            static_cast<long long>(std::floor((p.y - miny) / eps)));
    };
    struct CellHash {
        std::size_t operator()(const std::pair<long long, long long>& c) const {
            return std::hash<long long>()(c.first * 73856093LL ^ c.second * 19349663LL);
        }
    };
    std::unordered_map<std::pair<long long, long long>, std::vector<std::size_t>, CellHash>
        grid;
    for (std::size_t i = 0; i < n; ++i) grid[cell(points[i])].push_back(i);

    const double eps2 = eps * eps;
    auto neighbors = [&](std::size_t i) {
        std::vector<std::size_t> out_idx;
        auto c = cell(points[i]);
        for (long long dy = -1; dy <= 1; ++dy)
            for (long long dx = -1; dx <= 1; ++dx) {
                auto it = grid.find({c.first + dx, c.second + dy});
                if (it == grid.end()) continue;
                for (std::size_t j : it->second) {
                    double ddx = points[i].x - points[j].x;
                    double ddy = points[i].y - points[j].y;
                    if (ddx * ddx + ddy * ddy <= eps2) out_idx.push_back(j);
                }
            }
        return out_idx;
    };

    std::vector<std::uint8_t> core(n, 0);
    std::vector<std::vector<std::size_t>> nb(n);
    for (std::size_t i = 0; i < n; ++i) {
        nb[i] = neighbors(i);
        core[i] = static_cast<int>(nb[i].size()) >= min_pts;
    }

    // clusters = connected components of the eps-graph restricted to cores
    int next_label = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!core[i] || out.labels[i] != kNoise) continue;
        int label = next_label++;
        std::deque<std::size_t> frontier{i};
        out.labels[i] = label;
        while (!frontier.empty()) {
            std::size_t j = frontier.front();
            frontier.pop_front();
            for (std::size_t k : nb[j])
                if (core[k] && out.labels[k] == kNoise) {
                    out.labels[k] = label;
                    frontier.push_back(k);
                }
        }
    }

    // Border points join their nearest core neighbor; ties break on the core
    // point's coordinates so the partition is independent of input order.
    for (std::size_t i = 0; i < n; ++i) {
        if (core[i]) continue;
        std::size_t best = n;
        double best_d = 0;
        for (std::size_t j : nb[i]) {
            if (!core[j]) continue;
            double dx = points[i].x - points[j].x, dy = points[i].y - points[j].y;
            double d = dx * dx + dy * dy;
            bool better = best == n || d < best_d ||
                          (d == best_d && (points[j].x < points[best].x ||
                                           (points[j].x == points[best].x &&
                                            points[j].y < points[best].y)));
            if (better) {
                best = j;
                best_d = d;
            }
        }
        if (best != n) out.labels[i] = out.labels[best];
    }
    out.cluster_count = next_label;
    return out;
}

EllipseFit fit_ellipse(const PointSet& points) {
    const std::size_t n = points.size();
    if (n < 3) throw DegenerateFitError("ellipse fit needs at least 3 points");
    double cx = 0, cy = 0;
    for (const auto& p : points) {
        cx += p.x;
        cy += p.y;
    }
    cx /= n;
    cy /= n;
    double sxx = 0, syy = 0, sxy = 0;
    for (const auto& p : points) {
        double dx = p.x - cx, dy = p.y - cy;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    sxx /= n;
    syy /= n;
    sxy /= n;
    // eigenvalues of the 2x2 covariance
    double tr = sxx + syy;
    double det = sxx * syy - sxy * sxy;
    double disc = std::sqrt(std::max(0.0, tr * tr / 4 - det));
    double l1 = tr / 2 + disc, l2 = tr / 2 - disc;
    if (l2 <= 1e-9 * std::max(1.0, l1))
        throw DegenerateFitError("collinear or duplicate points: covariance is rank deficient");

    EllipseFit fit;
    fit.cx = cx;
    fit.cy = cy;
    // axes proportional to sqrt(eigenvalues), scaled so pi*a*b = n
    double ratio = std::sqrt(l1 / l2);
    double b = std::sqrt(static_cast<double>(n) / (kPi * ratio));
    fit.a = b * ratio;
    fit.b = b;
    double theta = sxy == 0 && sxx >= syy ? 0.0 : std::atan2(l1 - sxx, sxy);
    double deg = theta * 180.0 / kPi;
    while (deg > 90.0) deg -= 180.0;
    while (deg <= -90.0) deg += 180.0;
    fit.theta_deg = deg;
    return fit;
}

namespace {

ImageF gaussian_blur(const ImageF& img, double sigma) {
    int half = std::max(1, static_cast<int>(std::ceil(3 * sigma)));
    std::vector<double> k(2 * half + 1);
    double sum = 0;
    for (int i = -half; i <= half; ++i) {
        k[i + half] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + half];
    }
    for (auto& v : k) v /= sum;
    auto clampi = [](int i, int n) { return std::clamp(i, 0, n - 1); };
    ImageF tmp(img.width, img.height), out(img.width, img.height, img.pitch_mm);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double s = 0;
            for (int i = -half; i <= half; ++i)
                s += k[i + half] * img.at(clampi(x + i, img.width), y);
            tmp.at(x, y) = s;
        }
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double s = 0;
            for (int i = -half; i <= half; ++i)
                s += k[i + half] * tmp.at(x, clampi(y + i, img.height));
            out.at(x, y) = s;
        }
    return out;
}

} // namespace

MaskImage canny(const ImageF& image, double sigma, double low, double high) {
    if (low < 0 || low > high) throw ValidationError("canny thresholds need 0 <= low <= high");
    ImageF sm = sigma > 0 ? gaussian_blur(image, sigma) : image;
    const int w = image.width, h = image.height;
    ImageF mag(w, h), dir(w, h);
    auto clampi = [](int i, int n) { return std::clamp(i, 0, n - 1); };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            auto px = [&](int dx, int dy) {
                return sm.at(clampi(x + dx, w), clampi(y + dy, h));
            };
            double gx = (px(1, -1) + 2 * px(1, 0) + px(1, 1)) -
                        (px(-1, -1) + 2 * px(-1, 0) + px(-1, 1));
            double gy = (px(-1, 1) + 2 * px(0, 1) + px(1, 1)) -
                        (px(-1, -1) + 2 * px(0, -1) + px(1, -1));
            mag.at(x, y) = std::hypot(gx, gy);
            dir.at(x, y) = std::atan2(gy, gx);
        }
    // non-maximum suppression into 4 direction bins
    ImageF thin(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double ang = dir.at(x, y) * 180.0 / kPi;
            if (ang < 0) ang += 180.0;
            int dx = 1, dy = 0;
            if (ang >= 22.5 && ang < 67.5) {
                dx = 1;
                dy = 1;
            } else if (ang >= 67.5 && ang < 112.5) {
                dx = 0;
                dy = 1;
            } else if (ang >= 112.5 && ang < 157.5) {
                dx = -1;
                dy = 1;
            }
            double m = mag.at(x, y);
            double m1 = mag.at(clampi(x + dx, w), clampi(y + dy, h));
            double m2 = mag.at(clampi(x - dx, w), clampi(y - dy, h));
            thin.at(x, y) = (m >= m1 && m >= m2) ? m : 0.0;
        }
    // hysteresis: strong seeds, grow through weak neighbors
    MaskImage edges(w, h);
    std::deque<std::pair<int, int>> frontier;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (thin.at(x, y) >= high && high > 0) {
                edges.at(x, y) = 1;
                frontier.emplace_back(x, y);
            }
    while (!frontier.empty()) {
        auto [x, y] = frontier.front();
        frontier.pop_front();
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                int nx = x + dx, ny = y + dy;
                if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                if (edges.at(nx, ny)) continue;
                if (thin.at(nx, ny) >= low && thin.at(nx, ny) > 0) {
                    edges.at(nx, ny) = 1;
                    frontier.emplace_back(nx, ny);
                }
            }
    }
    return edges;
}

PixelEval evaluate_pixels(const MaskImage& pred, const MaskImage& truth) {
    if (pred.width != truth.width || pred.height != truth.height)
        throw ShapeError("evaluate_pixels: mask dimensions differ");
    PixelEval e;
    for (std::size_t i = 0; i < pred.v.size(); ++i) {
        bool p = pred.v[i] != 0, t = truth.v[i] != 0;
        if (p && t)
            ++e.tp;
        else if (!p && t)
            ++e.fn;
        else if (p && !t)
            ++e.fp;
        else
            ++e.tn;
    }
    e.tp_rate = e.tp + e.fn ? static_cast<double>(e.tp) / (e.tp + e.fn) : 0.0;
    e.fn_rate = e.tp + e.fn ? 1.0 - e.tp_rate : 0.0;
    e.fp_rate = e.fp + e.tn ? static_cast<double>(e.fp) / (e.fp + e.tn) : 0.0;
    e.precision = e.tp + e.fp ? static_cast<double>(e.tp) / (e.tp + e.fp) : 0.0;
    return e;
}

std::vector<PoreRow> pore_rows(const PointSet& points, const ClusterSet& clusters,
                               const FeatureMap& map) {
    if (points.size() != clusters.labels.size())
        throw ShapeError("pore_rows: point/label counts differ");
    std::vector<PoreRow> rows;
    for (int id = 0; id < clusters.cluster_count; ++id) {
        PointSet member;
        double score_sum = 0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (clusters.labels[i] != id) continue;
            member.push_back(points[i]);
            int px = static_cast<int>(std::lround(points[i].x));
            int py = static_cast<int>(std::lround(points[i].y));
            if (px >= 0 && py >= 0 && px < map.score.width && py < map.score.height)
                score_sum += map.score.at(px, py);
        }
        PoreRow row;
        row.cluster_id = id;
        row.pixel_count = static_cast<long long>(member.size());
        row.mean_score = member.empty() ? 0.0 : score_sum / member.size();
        try {
            row.fit = fit_ellipse(member);
        } catch (const DegenerateFitError&) {
            // tiny/collinear cluster: record the centroid with unit axes
            for (const auto& p : member) {
                row.fit.cx += p.x / member.size();
                row.fit.cy += p.y / member.size();
            }
            row.fit.a = row.fit.b = 0.5;
        }
        rows.push_back(row);
    }
    return rows;
}

std::string pore_report_csv(const std::vector<PoreRow>& rows) {
    std::ostringstream os;
    os << "cluster_id,cx,cy,a,b,theta_deg,pixel_count,mean_score\n";
    os.precision(9);
    for (const auto& r : rows)
        os << r.cluster_id << ',' << r.fit.cx << ',' << r.fit.cy << ',' << r.fit.a << ','
           << r.fit.b << ',' << r.fit.theta_deg << ',' << r.pixel_count << ','
           << r.mean_score << '\n';
    return os.str();
}

std::vector<PoreRow> parse_pore_report(const std::string& csv) {
    std::istringstream is(csv);
    std::string line;
    if (!std::getline(is, line) || line != "cluster_id,cx,cy,a,b,theta_deg,pixel_count,mean_score")
        throw ParseError("pore report: bad or missing header");
    std::vector<PoreRow> rows;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        PoreRow r;
        char c;
        if (!(ls >> r.cluster_id >> c >> r.fit.cx >> c >> r.fit.cy >> c >> r.fit.a >> c >>
              r.fit.b >> c >> r.fit.theta_deg >> c >> r.pixel_count >> c >> r.mean_score)) {
            std::ostringstream os;
            os << "pore report: malformed row at line " << lineno;
            throw ParseError(os.str());
        }
        rows.push_back(r);
    }
    return rows;
}

} // namespace radisynth
