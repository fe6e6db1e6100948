#pragma once

// Fusion-quality metrics computed against clear reference sources:
// mutual-information sum (Q_MI), gradient-preservation score (Q_ABF),
// sum of correlation of differences (Q_SCD) and spatial frequency (Q_SF).

#include <string>
#include <vector>

#include "irvf/tensor.hpp"

namespace irvf {

// ITU-R BT.601 luma from (3,H,W); (1,H,W) passes through.
TensorD to_grayscale(const TensorD& img);

// Round [0,1] values to 8-bit levels kept as doubles in [0,255].
TensorD quantize_8bit(const TensorD& gray);

// Pearson correlation over all elements; 0 when either side has zero variance.
double pearson(const TensorD& a, const TensorD& b);

// MI(fused, src_a) + MI(fused, src_b) from joint histograms over 8-bit level
// images, natural log.
double q_mi(const TensorD& fused, const TensorD& src_a, const TensorD& src_b, int bins = 256);

// Xydeas-Petrovic edge preservation, weighted by source edge strength. The
// sigmoid preservation curves are rescaled to span [0,1] so a perfect match
// scores exactly 1 and a fully lost edge scores exactly 0.
double q_abf(const TensorD& fused, const TensorD& src_a, const TensorD& src_b);

// r(F - B, A) + r(F - A, B).
double q_scd(const TensorD& fused, const TensorD& src_a, const TensorD& src_b);

// sqrt(RF^2 + CF^2) with RF/CF the RMS of horizontal/vertical first differences.
double q_sf(const TensorD& image);

struct MetricRow {
    std::string name;
    double mi = 0.0;
    double abf = 0.0;
    double scd = 0.0;
    double sf = 0.0;
};

struct MetricReport {
    std::vector<MetricRow> rows;
    MetricRow mean;
    MetricRow stddev;

    void finalize();               // fills mean/stddev
    std::string to_csv() const;    // per-image rows plus aggregate footer
    std::string to_json() const;
};

// All four metrics for one (fused, ir, vis_gt) triple. Inputs are [0,1]
// images; they are converted to 8-bit grayscale levels first.
MetricRow evaluate_triple(const std::string& name, const TensorD& fused, const TensorD& ir,
                          const TensorD& vis_gt);

}  // namespace irvf
