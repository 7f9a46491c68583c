#pragma once

#include "mdae/model.hpp"
#include "mdae/motion.hpp"

#include <optional>

namespace mdae {

constexpr int kTechniqueCount = 5;

/// Linear probe over semantic embeddings: softmax logits for the five
/// techniques plus one continuous grade output. Operates in standardized
/// embedding space (per-dimension z-stats from training).
struct AttributeHead {
    Eigen::MatrixXd technique_weights; // 5 x d_z
    Eigen::VectorXd technique_bias;    // 5
    Eigen::VectorXd grade_weights;     // d_z
    double grade_bias = 0.0;
    Eigen::VectorXd z_mean; // d_z
    Eigen::VectorXd z_std;  // d_z, all > 0

    int d_z() const { return static_cast<int>(z_mean.size()); }
    Eigen::VectorXd standardize(const Eigen::VectorXd& z) const;
    Eigen::VectorXd destandardize(const Eigen::VectorXd& zs) const;
};

struct HeadTrainOptions {
    double learning_rate = 0.05;
    int steps = 3000;
    double l2 = 1e-2; // keeps probabilities soft so the lambda walk can move
    std::uint64_t seed = 0;
};

/// Joint objective: softmax cross-entropy on the technique plus squared
/// error on the grade value (grade_index / 12).
AttributeHead train_head(const std::vector<Eigen::VectorXd>& embeddings,
                         const std::vector<SampleMeta>& labels,
                         const HeadTrainOptions& options = {});

struct Prediction {
    Eigen::VectorXd technique_probs; // 5, sums to 1
    double grade = 0.0;              // clamped to [0, 1]
};

Prediction predict(const AttributeHead& head, const Eigen::VectorXd& z);

struct DirectionSpec {
    enum class Kind { TechniqueChange, GradeChange } kind;
    Technique source = Technique::RP; // technique change only
    Technique target = Technique::FK;
    int sign = +1; // grade change only
};

/// Unit direction of change in standardized embedding space.
Eigen::VectorXd direction(const AttributeHead& head, const DirectionSpec& spec);

struct LambdaMaxOptions {
    double step = 0.1;
    double eps_conv = 1e-3;
    int window = 5;
    double cap = 50.0;
};

struct LambdaMaxResult {
    double lambda_max = 0.0;
    bool capped = false;
};

/// Smallest grid lambda at which predictions stop changing (max change in
/// technique probabilities and grade over the trailing window < eps_conv).
LambdaMaxResult find_lambda_max(const AttributeHead& head, const Eigen::VectorXd& z,
                                const Eigen::VectorXd& dir_standardized,
                                const LambdaMaxOptions& options = {});

struct ManipulationTargets {
    std::optional<Technique> technique;
    std::optional<double> grade; // [0, 1]
};

struct TracePoint {
    double lambda;
    double score;
    Eigen::VectorXd technique_probs;
    double grade;
};

struct ManipulationResult {
    Eigen::VectorXd z; // de-standardized manipulated embedding
    double lambda_star = 0.0;
    std::vector<TracePoint> trace;
};

/// Grid search over lambda in [0, lambda_max], scored by the equally
/// weighted distance of predicted technique and grade to the targets.
/// A missing target is pinned to its current predicted value.
ManipulationResult guided_manipulate(const Eigen::VectorXd& z, const AttributeHead& head,
                                     const ManipulationTargets& targets, int grid = 101,
                                     const LambdaMaxOptions& options = {});

/// Full pipeline: features -> z -> x_T -> manipulated z' -> decoded motion.
MotionSequence manipulate_motion(const MotionSequence& seq,
                                 const ManipulationTargets& targets,
                                 const SkeletonChain& chain, const ModelParams& model,
                                 const AttributeHead& head, int substeps = 50,
                                 int grid = 101, const LambdaMaxOptions& options = {},
                                 ManipulationResult* details = nullptr);

AttributeHead load_head(const std::string& path);
void save_head(const AttributeHead& head, const std::string& path);

} // namespace mdae
