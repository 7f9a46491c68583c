#include "mdae/motion.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace mdae;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("mdae_test_" + name)).string();
}

MotionSequence tiny_sequence() {
    MotionSequence seq;
    seq.markers = {"A", "B"};
    seq.rate = 25.0;
    seq.coords.resize(3, 6);
    seq.coords << 0, 0, 0, 1, 0, 0, //
        0.1, 0, 0, 1.1, 0, 0,       //
        0.2, 0, 0, 1.2, 0, 0;
    return seq;
}

} // namespace

TEST_CASE("grade value mapping is index / 12") {
    CHECK(grade_value(0) == 0.0);
    CHECK(grade_value(12) == 1.0);
    CHECK(grade_value(6) == doctest::Approx(0.5));
    // The scaling that makes 0.146 read as 1.752 grade levels.
    CHECK(0.146 * kMaxGradeIndex == doctest::Approx(1.752));
}

TEST_CASE("technique and split names round trip") {
    for (int i = 0; i < 5; ++i) {
        const auto t = static_cast<Technique>(i);
        CHECK(technique_from_name(technique_name(t)) == t);
    }
    CHECK_THROWS_AS((void)technique_from_name("nope"), Error);
    CHECK(split_from_name("train") == Split::Train);
    CHECK_THROWS_AS((void)split_from_name("nope"), Error);
}

TEST_CASE("csv round trip with unit scale") {
    const MotionSequence seq = tiny_sequence();
    const std::string path = temp_path("motion.csv");
    save_sequence(seq, path, FileFormat::Csv);
    const MotionSequence back = load_sequence(path, FileFormat::Csv);
    back.rate; // CSV carries no rate
    REQUIRE(back.markers == seq.markers);
    CHECK((back.coords - seq.coords).cwiseAbs().maxCoeff() < 1e-15);
    // Millimeter declaration scales into meters.
    const MotionSequence mm = load_sequence(path, FileFormat::Csv, 0.001);
    CHECK(mm.coords(0, 3) == doctest::Approx(0.001).epsilon(1e-12));
}

TEST_CASE("csv parse errors carry line numbers") {
    const std::string path = temp_path("bad.csv");
    std::ofstream(path) << "frame,marker,x,y,z\n0,A,1,2\n";
    CHECK_THROWS_AS((void)load_sequence(path, FileFormat::Csv), ParseError);
}

TEST_CASE("binary round trip preserves everything") {
    MotionSequence seq = tiny_sequence();
    seq.foot_markers = {"B"};
    seq.contacts = Eigen::MatrixXi::Zero(3, 1);
    seq.contacts(1, 0) = 1;
    const std::string path = temp_path("motion.mdae");
    save_sequence(seq, path, FileFormat::Binary);
    const MotionSequence back = load_sequence(path, FileFormat::Binary);
    CHECK(back.rate == seq.rate);
    CHECK(back.markers == seq.markers);
    CHECK((back.coords - seq.coords).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.foot_markers == seq.foot_markers);
    CHECK(back.contacts == seq.contacts);
}

TEST_CASE("validate_sequence flags non-finite coordinates") {
    MotionSequence seq = tiny_sequence();
    seq.coords(1, 2) = std::numeric_limits<double>::quiet_NaN();
    const ValidationReport rep = validate_sequence(seq);
    CHECK_FALSE(rep.ok());
}

TEST_CASE("derive_foot_contacts thresholds") {
    MotionSequence seq;
    seq.markers = {"FOOT"};
    seq.rate = 10.0;
    seq.coords.resize(4, 3);
    seq.coords << 0, 0, 0.01, // low, stationary
        0, 0, 0.01,           // low, stationary
        0.5, 0, 0.01,         // low, fast (0.5 m in 0.1 s)
        0.5, 0, 0.50;         // high
    const Eigen::MatrixXi c = derive_foot_contacts(seq, {"FOOT"}, 0.05, 0.1);
    CHECK(c(0, 0) == 1);
    CHECK(c(1, 0) == 1);
    CHECK(c(2, 0) == 0);
    CHECK(c(3, 0) == 0);
}

TEST_CASE("manifest round trip and validation") {
    DatasetManifest m;
    m.unit_scale = 0.001;
    ManifestEntry e;
    e.path = "a.mdae";
    e.meta.participant_id = "p1";
    e.meta.technique = Technique::LRK;
    e.meta.grade_index = 7;
    e.meta.limb_side = "left";
    e.split = Split::Test;
    m.entries.push_back(e);
    const std::string path = temp_path("manifest.json");
    save_manifest(m, path);
    const DatasetManifest back = load_manifest(path);
    CHECK(back.unit_scale == 0.001);
    REQUIRE(back.entries.size() == 1);
    CHECK(back.entries[0].path == "a.mdae");
    CHECK(back.entries[0].meta.technique == Technique::LRK);
    CHECK(back.entries[0].meta.grade_index == 7);
    CHECK(back.entries[0].split == Split::Test);

    std::ofstream(path) << R"({"entries":[{"path":"x","participant":"p",
        "technique":"RP","grade_index":99,"limb_side":"right","split":"train"}]})";
    CHECK_THROWS_AS((void)load_manifest(path), Error);
}

TEST_CASE("synthetic dataset is deterministic and rigid") {
    SynthConfig cfg;
    cfg.samples_per_cell = 3;
    const SynthDataset a = generate_synthetic_dataset(cfg, 9);
    const SynthDataset b = generate_synthetic_dataset(cfg, 9);
    REQUIRE(a.sequences.size() ==
            static_cast<std::size_t>(cfg.classes) * cfg.grade_indices.size() *
                static_cast<std::size_t>(cfg.samples_per_cell));
    for (std::size_t i = 0; i < a.sequences.size(); ++i) {
        CHECK((a.sequences[i].coords - b.sequences[i].coords).cwiseAbs().maxCoeff() ==
              0.0);
    }
    const SynthDataset c = generate_synthetic_dataset(cfg, 10);
    CHECK((a.sequences[0].coords - c.sequences[0].coords).cwiseAbs().maxCoeff() > 0.0);

    // Link lengths constant over frames and equal to the published lengths.
    const auto& names = synthetic_marker_names();
    const auto& lengths = synthetic_link_lengths();
    const MotionSequence& seq = a.sequences.front();
    for (std::size_t l = 0; l + 1 < names.size(); ++l) {
        const int pi = seq.marker_index(names[l]);
        const int ci = seq.marker_index(names[l + 1]);
        for (int f = 0; f < seq.frames(); ++f) {
            CHECK(std::abs((seq.pos(f, ci) - seq.pos(f, pi)).norm() - lengths[l]) <
                  1e-9);
        }
    }
}

TEST_CASE("synthetic splits cover train/validation/test") {
    SynthConfig cfg;
    const SynthDataset ds = generate_synthetic_dataset(cfg, 1);
    int train = 0, val = 0, test = 0;
    for (const auto& e : ds.manifest.entries) {
        if (e.split == Split::Train) ++train;
        if (e.split == Split::Validation) ++val;
        if (e.split == Split::Test) ++test;
    }
    CHECK(train > 0);
    CHECK(val > 0);
    CHECK(test > 0);
    CHECK(train > val);
    CHECK(train > test);
}
