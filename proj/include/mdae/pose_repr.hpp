#pragma once

#include "mdae/geometry.hpp"
#include "mdae/motion.hpp"

namespace mdae {

struct ChainLink {
    std::string parent;
    std::string child;
};

/// Rooted tree over marker names with constant link distances. Link order is
/// topological so decoding is a single pass.
struct SkeletonChain {
    std::string root;
    std::vector<ChainLink> links;
    std::vector<double> distances; // meters; empty until measured or provided

    int link_count() const { return static_cast<int>(links.size()); }
    void validate() const; // tree structure, topological order, distances > 0 if set
};

SkeletonChain load_chain(const std::string& path);
void save_chain(const SkeletonChain& chain, const std::string& path);

/// Chain matching the synthetic generator's marker set, distances unset.
SkeletonChain synthetic_chain();

/// Root trajectory plus per-link Stiefel 6D features per frame.
/// Feature layout per frame: [root xyz | link0 m00 m10 m20 m01 m11 m21 | ...].
struct PoseFeatures {
    Eigen::MatrixXd root_trajectory; // frames x 3
    Eigen::MatrixXd link_features;   // frames x (6 * links), column-major 3x2 blocks
    SkeletonChain chain;             // with distances filled in
    double rate = 25.0;
    Eigen::MatrixXi contacts;        // carried through for the foot loss
    std::vector<std::string> foot_markers;

    int frames() const { return static_cast<int>(root_trajectory.rows()); }
    int links() const { return chain.link_count(); }
    int feature_dim() const { return 3 + 6 * links(); }

    Mat32 stiefel(int frame, int link) const;
    void set_stiefel(int frame, int link, const Mat32& m);

    /// Frames x feature_dim view used by the network (root first).
    Eigen::MatrixXd as_tensor() const;
    void from_tensor(const Eigen::MatrixXd& tensor);
};

enum class DistancePolicy { Measured, Provided };

/// Coordinates -> features over the chain. Measured distances are the
/// per-link mean over frames.
PoseFeatures encode_sequence(const MotionSequence& seq, const SkeletonChain& chain,
                             DistancePolicy policy = DistancePolicy::Measured,
                             bool parallel = true);

/// Features -> coordinates, reconstructing children in topological order.
MotionSequence decode_sequence(const PoseFeatures& features, bool parallel = true);

/// Serial reference implementations, kept for testing the parallel kernels.
PoseFeatures encode_sequence_serial(const MotionSequence& seq, const SkeletonChain& chain,
                                    DistancePolicy policy = DistancePolicy::Measured);
MotionSequence decode_sequence_serial(const PoseFeatures& features);

struct AnatomyReport {
    std::vector<double> per_link_distance_std; // meters
    double mean_distance_std = 0.0;
    double mean_round_trip_error = 0.0; // meters, decode(encode) marker error
    double max_round_trip_error = 0.0;
};

AnatomyReport anatomy_report(const std::vector<MotionSequence>& dataset,
                             const SkeletonChain& chain);

PoseFeatures load_features(const std::string& path);
void save_features(const PoseFeatures& features, const std::string& path);

} // namespace mdae
