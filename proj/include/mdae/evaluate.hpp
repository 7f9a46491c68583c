#pragma once

#include "mdae/manipulate.hpp"

namespace mdae {

struct UarResult {
    Eigen::MatrixXi confusion; // rows = true class, cols = predicted
    double uar = 0.0;
};

/// Confusion matrix and unweighted average recall over the classes that
/// appear in the truths.
UarResult confusion_and_uar(const std::vector<Technique>& predictions,
                            const std::vector<Technique>& truths);

struct GradeMae {
    double mae = 0.0;        // macro-averaged over truth grades, in [0,1]
    double mae_levels = 0.0; // same, in grade levels (x12)
    std::vector<std::pair<int, double>> per_grade; // grade index -> MAE
};

/// Grades are matched to the nearest of the 13 levels for grouping; each
/// level present in the truths contributes equally to the average.
GradeMae grade_mae(const std::vector<double>& predicted,
                   const std::vector<double>& truth);

struct SeparabilityReport {
    Eigen::MatrixXi confusion; // rows = true class, cols = predicted
    double uar = 0.0;          // unweighted average recall over present classes
    double grade_mae = 0.0;    // macro-averaged over present grades, in [0,1]
    double grade_mae_levels = 0.0; // same, scaled to grade levels (x12)
};

/// Classify every embedding with the head and aggregate recall / grade error.
SeparabilityReport evaluate_separability(const AttributeHead& head,
                                         const std::vector<Eigen::VectorXd>& embeddings,
                                         const std::vector<SampleMeta>& labels);

/// Symmetric PSD square root via eigendecomposition; negative eigenvalues
/// from round-off are clipped to zero.
Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m);

struct FidResult {
    double fid = 0.0;
    bool ridged = false; // covariance regularized (small group fallback)
};

/// Frechet distance between Gaussian fits of two sample groups (rows are
/// samples). Covariances use the unbiased (n - 1) estimator; groups smaller
/// than dim + 1 get a 1e-6 ridge and set the ridged flag.
FidResult fid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct Projection2d {
    Eigen::MatrixXd points;  // n x 2 (second column zero when rank deficient)
    Eigen::Vector2d explained_variance_ratio;
    int rank = 2;            // effective rank used (1 or 2)
};

/// PCA to two components with a deterministic sign convention: each axis is
/// flipped so its largest-magnitude loading is positive.
Projection2d pca_project_2d(const std::vector<Eigen::VectorXd>& embeddings);

} // namespace mdae
