#include "mdae/preprocess.hpp"

#include <doctest.h>

#include <cmath>

using namespace mdae;

namespace {

MotionSequence walking_pair() {
    MotionSequence seq;
    seq.markers = {"ROOT", "LSHO", "RSHO"};
    seq.rate = 50.0;
    seq.coords.resize(4, 9);
    for (int f = 0; f < 4; ++f) {
        const double t = 0.1 * f;
        seq.coords.row(f) << 1 + t, 2 + t, 1.0, // root
            0.8 + t, 2.3 + t, 1.4,              // left shoulder
            1.2 + t, 1.7 + t, 1.4;              // right shoulder
    }
    return seq;
}

Eigen::MatrixXd pairwise_distances(const MotionSequence& seq) {
    const int m = seq.marker_count();
    Eigen::MatrixXd d(seq.frames(), m * m);
    for (int f = 0; f < seq.frames(); ++f) {
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) {
                d(f, i * m + j) = (seq.pos(f, i) - seq.pos(f, j)).norm();
            }
        }
    }
    return d;
}

} // namespace

TEST_CASE("downsample decimates by the integer rate factor") {
    MotionSequence seq = walking_pair();
    seq.foot_markers = {"ROOT"};
    seq.contacts = Eigen::MatrixXi::Zero(4, 1);
    seq.contacts(2, 0) = 1;
    const MotionSequence down = downsample(seq, 25.0);
    CHECK(down.rate == 25.0);
    CHECK(down.frames() == 2);
    CHECK((down.coords.row(1) - seq.coords.row(2)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(down.contacts(1, 0) == 1);
    CHECK_THROWS_AS((void)downsample(seq, 30.0), Error);
    CHECK_THROWS_AS((void)downsample(seq, 80.0), Error);
}

TEST_CASE("center_to_origin zeroes frame-0 root x,y and is idempotent") {
    const MotionSequence c = center_to_origin(walking_pair(), "ROOT");
    CHECK(c.pos(0, 0).x() == 0.0);
    CHECK(c.pos(0, 0).y() == 0.0);
    CHECK(c.pos(0, 0).z() == 1.0); // vertical untouched
    // Relative geometry preserved exactly.
    CHECK((pairwise_distances(c) - pairwise_distances(walking_pair()))
              .cwiseAbs()
              .maxCoeff() < 1e-12);
    const MotionSequence cc = center_to_origin(c, "ROOT");
    CHECK((cc.coords - c.coords).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rotate_to_facing aligns the facing normal with -y") {
    const MotionSequence seq = walking_pair();
    const MotionSequence r = rotate_to_facing(seq, "LSHO", "RSHO");
    // Facing normal from frame 0: horizontal normal of the left->right vector.
    const Vec3 lr = r.pos(0, 2) - r.pos(0, 1);
    const Vec3 facing = Vec3(-lr.y(), lr.x(), 0).normalized();
    CHECK((facing - Vec3(0, -1, 0)).norm() < 1e-9);
    // Isometry: pairwise distances and heights preserved.
    CHECK((pairwise_distances(r) - pairwise_distances(seq)).cwiseAbs().maxCoeff() <
          1e-9);
    for (int f = 0; f < seq.frames(); ++f) {
        for (int m = 0; m < seq.marker_count(); ++m) {
            CHECK(r.pos(f, m).z() == doctest::Approx(seq.pos(f, m).z()).epsilon(1e-12));
        }
    }
    // Already-aligned input stays put.
    const MotionSequence rr = rotate_to_facing(r, "LSHO", "RSHO");
    CHECK((rr.coords - r.coords).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("rotate_to_facing rejects coincident markers") {
    MotionSequence seq = walking_pair();
    seq.set_pos(0, 1, seq.pos(0, 2));
    CHECK_THROWS_AS((void)rotate_to_facing(seq, "LSHO", "RSHO"), Error);
}

TEST_CASE("mirror_left_to_right is an involution and swaps trajectories") {
    const MotionSequence seq = walking_pair();
    const std::vector<std::pair<std::string, std::string>> pairs = {{"LSHO", "RSHO"}};
    const MotionSequence m = mirror_left_to_right(seq, pairs);
    // New LSHO carries the old RSHO trajectory with x negated.
    const int l_new = m.marker_index("LSHO");
    const int r_old = seq.marker_index("RSHO");
    for (int f = 0; f < seq.frames(); ++f) {
        const Vec3 expect(-seq.pos(f, r_old).x(), seq.pos(f, r_old).y(),
                          seq.pos(f, r_old).z());
        CHECK((m.pos(f, l_new) - expect).norm() == 0.0);
    }
    const MotionSequence back = mirror_left_to_right(m, pairs);
    for (int f = 0; f < seq.frames(); ++f) {
        for (const auto& name : seq.markers) {
            CHECK((back.pos(f, back.marker_index(name)) -
                   seq.pos(f, seq.marker_index(name)))
                      .norm() == 0.0);
        }
    }
    // Isometry.
    CHECK((pairwise_distances(m).row(0) - pairwise_distances(seq).row(0))
              .cwiseAbs()
              .maxCoeff() < 1e-12);
}

TEST_CASE("center_wand_markers moves the wand to the midpoint") {
    MotionSequence seq = walking_pair(); // treat LSHO as a wand between ROOT and RSHO
    const MotionSequence w = center_wand_markers(seq, {{{"ROOT", "LSHO", "RSHO"}}});
    for (int f = 0; f < seq.frames(); ++f) {
        const Vec3 mid = 0.5 * (seq.pos(f, 0) + seq.pos(f, 2));
        CHECK((w.pos(f, 1) - mid).norm() < 1e-12);
    }
}

TEST_CASE("trim keeps the half-open frame range") {
    const MotionSequence t = trim(walking_pair(), 1, 3);
    CHECK(t.frames() == 2);
    CHECK((t.coords.row(0) - walking_pair().coords.row(1)).cwiseAbs().maxCoeff() ==
          0.0);
    CHECK_THROWS_AS((void)trim(walking_pair(), 3, 1), Error);
    CHECK_THROWS_AS((void)trim(walking_pair(), 0, 9), Error);
}

TEST_CASE("detect_outliers flags a planted long sequence") {
    std::vector<MotionSequence> dataset;
    for (int i = 0; i < 6; ++i) dataset.push_back(walking_pair());
    MotionSequence longer = walking_pair();
    longer.coords.conservativeResize(40, Eigen::NoChange);
    for (int f = 4; f < 40; ++f) longer.coords.row(f) = longer.coords.row(3);
    dataset.push_back(longer);
    const OutlierReport rep = detect_outliers(dataset, 2.0, "");
    bool flagged = false;
    for (const auto& f : rep.findings) {
        if (f.index == 6 && f.statistic == "duration") flagged = true;
    }
    CHECK(flagged);
}

TEST_CASE("detect_outliers is quiet on identical sequences") {
    std::vector<MotionSequence> dataset(5, walking_pair());
    const OutlierReport rep = detect_outliers(dataset, 2.0, "");
    CHECK(rep.findings.empty());
}
