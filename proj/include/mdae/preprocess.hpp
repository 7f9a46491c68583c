#pragma once

#include "mdae/motion.hpp"

namespace mdae {

/// Pure decimation; the source rate must be an integer multiple of the target.
MotionSequence downsample(const MotionSequence& seq, double target_rate);

struct OutlierFinding {
    std::size_t index = 0; // position in the dataset
    std::string statistic; // duration | displacement | head_speed
    double value = 0.0;
    double z_score = 0.0;
};

struct OutlierReport {
    std::vector<OutlierFinding> findings;
    // Raw statistics per sequence, in dataset order.
    std::vector<double> durations;
    std::vector<double> displacements;
    std::vector<double> head_speeds;
};

/// Flags sequences whose duration, total marker displacement, or peak
/// head-marker speed deviates by more than z_thresh standard deviations.
/// Flagging only; nothing is removed. head_marker may be empty to skip the
/// head statistic.
OutlierReport detect_outliers(const std::vector<MotionSequence>& dataset,
                              double z_thresh, const std::string& head_marker);

/// Translates every frame so the frame-0 root marker sits at x = y = 0.
/// The vertical coordinate is left untouched.
MotionSequence center_to_origin(const MotionSequence& seq, const std::string& root_marker);

/// One rotation about the vertical axis, from frame 0, so the facing normal
/// (horizontal normal of the left->right vector) points along -y.
MotionSequence rotate_to_facing(const MotionSequence& seq,
                                const std::string& left_marker,
                                const std::string& right_marker);

/// Negates x for every marker, then swaps each (left, right) name pair.
MotionSequence mirror_left_to_right(
    const MotionSequence& seq,
    const std::vector<std::pair<std::string, std::string>>& name_pairs);

/// Repositions each wand marker to the midpoint of its two neighbors.
MotionSequence center_wand_markers(
    const MotionSequence& seq,
    const std::vector<std::array<std::string, 3>>& triples); // {a, wand, b}

/// Keeps frames [start, end) only.
MotionSequence trim(const MotionSequence& seq, int start, int end);

} // namespace mdae
