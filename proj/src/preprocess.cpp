#include "mdae/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace mdae {

MotionSequence downsample(const MotionSequence& seq, double target_rate) {
    if (target_rate <= 0.0) throw Error("downsample: target rate must be > 0");
    const double ratio = seq.rate / target_rate;
    const long factor = std::lround(ratio);
    if (factor < 1 || std::abs(ratio - static_cast<double>(factor)) > 1e-9) {
        throw Error("downsample: source rate " + std::to_string(seq.rate) +
                    " is not an integer multiple of " + std::to_string(target_rate));
    }
    if (factor == 1) return seq;
    MotionSequence out;
    out.markers = seq.markers;
    out.rate = target_rate;
    const int frames = (seq.frames() + static_cast<int>(factor) - 1) / static_cast<int>(factor);
    out.coords.resize(frames, seq.coords.cols());
    for (int f = 0; f < frames; ++f) out.coords.row(f) = seq.coords.row(f * factor);
    if (seq.has_contacts()) {
        out.foot_markers = seq.foot_markers;
        out.contacts.resize(frames, seq.contacts.cols());
        for (int f = 0; f < frames; ++f) out.contacts.row(f) = seq.contacts.row(f * factor);
    }
    return out;
}

namespace {

std::vector<double> z_scores(const std::vector<double>& values) {
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= n;
    const double std_dev = std::sqrt(var);
    std::vector<double> z(values.size(), 0.0);
    if (std_dev > 0.0) {
        for (std::size_t i = 0; i < values.size(); ++i) z[i] = (values[i] - mean) / std_dev;
    }
    return z;
}

} // namespace

OutlierReport detect_outliers(const std::vector<MotionSequence>& dataset,
                              double z_thresh, const std::string& head_marker) {
    if (dataset.size() < 3) throw Error("detect_outliers: need at least 3 sequences");
    OutlierReport report;
    const bool with_head = !head_marker.empty();
    for (const auto& seq : dataset) {
        report.durations.push_back(seq.frames() / seq.rate);
        double displacement = 0.0;
        for (int f = 1; f < seq.frames(); ++f) {
            for (int m = 0; m < seq.marker_count(); ++m) {
                displacement += (seq.pos(f, m) - seq.pos(f - 1, m)).norm();
            }
        }
        report.displacements.push_back(displacement);
        if (with_head) {
            const int head = seq.marker_index(head_marker);
            double peak = 0.0;
            for (int f = 1; f < seq.frames(); ++f) {
                peak = std::max(peak,
                                (seq.pos(f, head) - seq.pos(f - 1, head)).norm() * seq.rate);
            }
            report.head_speeds.push_back(peak);
        }
    }

    auto flag = [&](const std::vector<double>& values, const char* name) {
        const std::vector<double> z = z_scores(values);
        for (std::size_t i = 0; i < z.size(); ++i) {
            if (std::abs(z[i]) > z_thresh) {
                report.findings.push_back({i, name, values[i], z[i]});
            }
        }
    };
    flag(report.durations, "duration");
    flag(report.displacements, "displacement");
    if (with_head) flag(report.head_speeds, "head_speed");
    return report;
}

MotionSequence center_to_origin(const MotionSequence& seq, const std::string& root_marker) {
    const int root = seq.marker_index(root_marker);
    if (seq.frames() == 0) throw Error("center_to_origin: empty sequence");
    const Vec3 p0 = seq.pos(0, root);
    const Vec3 shift(-p0.x(), -p0.y(), 0.0); // vertical axis untouched
    MotionSequence out = seq;
    for (int f = 0; f < out.frames(); ++f) {
        for (int m = 0; m < out.marker_count(); ++m) {
            out.set_pos(f, m, out.pos(f, m) + shift);
        }
    }
    return out;
}

MotionSequence rotate_to_facing(const MotionSequence& seq,
                                const std::string& left_marker,
                                const std::string& right_marker) {
    const int left = seq.marker_index(left_marker);
    const int right = seq.marker_index(right_marker);
    if (seq.frames() == 0) throw Error("rotate_to_facing: empty sequence");
    Vec3 lr = seq.pos(0, right) - seq.pos(0, left);
    lr.z() = 0.0;
    if (lr.norm() < 1e-12) {
        throw Error("rotate_to_facing: facing markers coincident in frame 0");
    }
    // Horizontal facing normal perpendicular to the left->right vector.
    // With z-up, the body faces along (lr rotated -90 deg about z).
    const Vec3 facing = Vec3(-lr.y(), lr.x(), 0.0).normalized();
    // Rotate about z so facing maps onto (0, -1, 0).
    const double current = std::atan2(facing.y(), facing.x());
    const double target = std::atan2(-1.0, 0.0);
    const double angle = target - current;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    Mat3 rot;
    rot << c, -s, 0, s, c, 0, 0, 0, 1;
    MotionSequence out = seq;
    for (int f = 0; f < out.frames(); ++f) {
        for (int m = 0; m < out.marker_count(); ++m) {
            out.set_pos(f, m, rot * out.pos(f, m));
        }
    }
    return out;
}

MotionSequence mirror_left_to_right(
    const MotionSequence& seq,
    const std::vector<std::pair<std::string, std::string>>& name_pairs) {
    MotionSequence out = seq;
    for (int f = 0; f < out.frames(); ++f) {
        for (int m = 0; m < out.marker_count(); ++m) {
            Vec3 p = out.pos(f, m);
            p.x() = -p.x();
            out.set_pos(f, m, p);
        }
    }
    for (const auto& [left, right] : name_pairs) {
        const int li = out.marker_index(left);
        const int ri = out.marker_index(right);
        std::swap(out.markers[static_cast<std::size_t>(li)],
                  out.markers[static_cast<std::size_t>(ri)]);
    }
    return out;
}

MotionSequence center_wand_markers(
    const MotionSequence& seq,
    const std::vector<std::array<std::string, 3>>& triples) {
    MotionSequence out = seq;
    for (const auto& t : triples) {
        const int a = out.marker_index(t[0]);
        const int wand = out.marker_index(t[1]);
        const int b = out.marker_index(t[2]);
        for (int f = 0; f < out.frames(); ++f) {
            out.set_pos(f, wand, 0.5 * (out.pos(f, a) + out.pos(f, b)));
        }
    }
    return out;
}

MotionSequence trim(const MotionSequence& seq, int start, int end) {
    if (start < 0 || end > seq.frames() || start >= end) {
        throw Error("trim: invalid frame range");
    }
    MotionSequence out;
    out.markers = seq.markers;
    out.rate = seq.rate;
    out.coords = seq.coords.middleRows(start, end - start);
    if (seq.has_contacts()) {
        out.foot_markers = seq.foot_markers;
        out.contacts = seq.contacts.middleRows(start, end - start);
    }
    return out;
}

} // namespace mdae
