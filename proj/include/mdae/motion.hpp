#pragma once

#include "mdae/common.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mdae {

enum class Technique { RP, FK, LRK, HRK, SBK };

const char* technique_name(Technique t);
Technique technique_from_name(const std::string& name);

constexpr int kGradeCount = 13; // 9th kyu .. 4th dan
constexpr int kMaxGradeIndex = kGradeCount - 1;

/// Continuous grade value in [0,1]: 9th kyu -> 0.0, 4th dan -> 1.0.
inline double grade_value(int grade_index) {
    return static_cast<double>(grade_index) / kMaxGradeIndex;
}

struct SampleMeta {
    std::string participant_id;
    Technique technique = Technique::RP;
    int grade_index = 0; // 0..12
    std::string limb_side = "right";
};

enum class Split { Train, Validation, Test };
const char* split_name(Split s);
Split split_from_name(const std::string& name);

/// Frames x markers x 3 coordinates (meters), immutable in spirit:
/// preprocessing ops return modified copies.
struct MotionSequence {
    std::vector<std::string> markers;
    Eigen::MatrixXd coords; // frames x (3 * markers), columns grouped per marker
    double rate = 0.0;      // Hz
    // Optional per-frame binary contact indicators over foot markers.
    std::vector<std::string> foot_markers;
    Eigen::MatrixXi contacts; // frames x foot_markers, empty if absent

    int frames() const { return static_cast<int>(coords.rows()); }
    int marker_count() const { return static_cast<int>(markers.size()); }

    Vec3 pos(int frame, int marker) const {
        return coords.block<1, 3>(frame, 3 * marker).transpose();
    }
    void set_pos(int frame, int marker, const Vec3& p) {
        coords.block<1, 3>(frame, 3 * marker) = p.transpose();
    }
    /// Index of a marker name; throws on unknown names.
    int marker_index(const std::string& name) const;
    bool has_contacts() const { return contacts.size() > 0; }
};

struct ValidationFinding {
    std::string what;
    int frame = -1; // -1 when not frame specific
    std::string marker;
};

struct ValidationReport {
    std::vector<ValidationFinding> findings;
    bool ok() const { return findings.empty(); }
};

ValidationReport validate_sequence(const MotionSequence& seq);

enum class FileFormat { Csv, Binary };

/// Reads a motion file; validates before returning. CSV positions may be
/// declared in millimeters via unit_scale (1.0 = meters, 0.001 = mm input).
MotionSequence load_sequence(const std::string& path, FileFormat format,
                             double unit_scale = 1.0);
void save_sequence(const MotionSequence& seq, const std::string& path,
                   FileFormat format);

/// mask(i, f) = 1 iff foot marker f is below height_thresh (vertical z)
/// and moves slower than speed_thresh at frame i.
Eigen::MatrixXi derive_foot_contacts(const MotionSequence& seq,
                                     const std::vector<std::string>& foot_markers,
                                     double height_thresh, double speed_thresh);

struct ManifestEntry {
    std::string path;
    SampleMeta meta;
    Split split = Split::Train;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    double unit_scale = 1.0;
};

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& manifest, const std::string& path);

struct SynthConfig {
    int classes = 2;           // 2..5, mapped onto the technique enum
    std::vector<int> grade_indices = {2, 10};
    int samples_per_cell = 25; // per (class, grade) pair
    int frames = 40;
    double rate = 25.0;
    double contact_height_thresh = 0.05;
    double contact_speed_thresh = 0.1;
};

struct SynthDataset {
    std::vector<MotionSequence> sequences;
    DatasetManifest manifest; // paths empty until saved
};

/// Deterministic parametric dataset over a rigid 5-marker chain
/// (ROOT, HIP, KNEE, ANK, TOE). Each class is a distinct trajectory family;
/// the grade value modulates speed and smoothness.
SynthDataset generate_synthetic_dataset(const SynthConfig& config, std::uint64_t seed);

/// Chain marker names and link lengths used by the synthetic generator.
const std::vector<std::string>& synthetic_marker_names();
const std::vector<double>& synthetic_link_lengths();

} // namespace mdae
