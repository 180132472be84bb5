#pragma once

#include <string>
#include <vector>

#include "uoda/evaluation.hpp"

namespace uoda {

// Symmetric eigendecomposition by cyclic Jacobi rotations; eigenvalues
// sorted descending, eigenvectors as rows, sign fixed so the largest-|.|
// component is positive.
struct EigenResult {
    std::vector<double> values;
    std::vector<std::vector<double>> vectors;
};

EigenResult jacobi_eigen_symmetric(const std::vector<std::vector<double>>& a);

// Top-2 principal directions of the snapshot's own feature rows.
std::vector<std::vector<double>> pca_top2(const FeatureSnapshot& snapshot);

// 2-D features are plotted directly; higher-dimensional snapshots are
// projected onto their top-2 principal components. Source points render as
// circles and target points as crosses, colored by label (gray for -1).
// Byte-identical output for identical input.
std::string scatter_svg(const FeatureSnapshot& snapshot);

void emit_scatter_svg(const FeatureSnapshot& snapshot, const std::string& out_path);

}  // namespace uoda
