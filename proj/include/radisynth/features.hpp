#pragma once
#include <string>
#include <vector>

#include "radisynth/cnn.hpp"
#include "radisynth/image.hpp"

namespace radisynth {

struct Point2 {
    double x = 0, y = 0;
};

using PointSet = std::vector<Point2>;

constexpr int kNoise = -1;

// per-point label; kNoise marks unclustered points
struct ClusterSet {
    std::vector<int> labels;
    int cluster_count = 0;
    double eps = 0;
    int min_pts = 0;
};

struct EllipseFit {
    double cx = 0, cy = 0;
    double a = 0, b = 0;     // semi-axes, a >= b, pixels
    double theta_deg = 0;    // major-axis orientation in (-90, 90]
};

struct ThresholdResult {
    MaskImage mask;
    PointSet points;
};

// points where score >= tau; tau in [0, 1]
ThresholdResult threshold_map(const FeatureMap& map, double tau = 0.5);

ClusterSet dbscan(const PointSet& points, double eps = 2.0, int min_pts = 5);

// Moment-based fit: centroid + covariance eigendecomposition, axes scaled so
// pi*a*b equals the point count. Throws DegenerateFitError on collinear or
// duplicate input.
EllipseFit fit_ellipse(const PointSet& points);

MaskImage canny(const ImageF& image, double sigma = 1.0, double low = 0.05,
                double high = 0.15);

struct PixelEval {
    double tp_rate = 0; // TP / (TP + FN)
    double fn_rate = 0;
    double fp_rate = 0; // FP / (FP + TN)
    double precision = 0;
    long long tp = 0, fn = 0, fp = 0, tn = 0;
};

PixelEval evaluate_pixels(const MaskImage& pred, const MaskImage& truth);

struct PoreRow {
    int cluster_id = 0;
    EllipseFit fit;
    long long pixel_count = 0;
    double mean_score = 0;
};

std::vector<PoreRow> pore_rows(const PointSet& points, const ClusterSet& clusters,
                               const FeatureMap& map);
// CSV: cluster_id,cx,cy,a,b,theta_deg,pixel_count,mean_score
std::string pore_report_csv(const std::vector<PoreRow>& rows);
std::vector<PoreRow> parse_pore_report(const std::string& csv);

} // namespace radisynth
