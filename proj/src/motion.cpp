#include "mdae/motion.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mdae {

using nlohmann::json;

const char* technique_name(Technique t) {
    switch (t) {
        case Technique::RP: return "RP";
        case Technique::FK: return "FK";
        case Technique::LRK: return "LRK";
        case Technique::HRK: return "HRK";
        case Technique::SBK: return "SBK";
    }
    throw Error("technique_name: invalid enum value");
}

Technique technique_from_name(const std::string& name) {
    for (Technique t : {Technique::RP, Technique::FK, Technique::LRK,
                        Technique::HRK, Technique::SBK}) {
        if (name == technique_name(t)) return t;
    }
    throw Error("unknown technique: " + name);
}

const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Validation: return "validation";
        case Split::Test: return "test";
    }
    throw Error("split_name: invalid enum value");
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "validation") return Split::Validation;
    if (name == "test") return Split::Test;
    throw Error("unknown split: " + name);
}

int MotionSequence::marker_index(const std::string& name) const {
    for (std::size_t i = 0; i < markers.size(); ++i) {
        if (markers[i] == name) return static_cast<int>(i);
    }
    throw Error("unknown marker: " + name);
}

ValidationReport validate_sequence(const MotionSequence& seq) {
    ValidationReport report;
    if (seq.rate <= 0.0) {
        report.findings.push_back({"sampling rate must be > 0", -1, ""});
    }
    if (seq.markers.empty()) {
        report.findings.push_back({"empty marker list", -1, ""});
    }
    if (seq.coords.cols() != 3 * seq.marker_count()) {
        report.findings.push_back({"coordinate width does not match marker count", -1, ""});
        return report;
    }
    for (int f = 0; f < seq.frames(); ++f) {
        for (int m = 0; m < seq.marker_count(); ++m) {
            for (int k = 0; k < 3; ++k) {
                const double v = seq.coords(f, 3 * m + k);
                if (!std::isfinite(v)) {
                    report.findings.push_back(
                        {"non-finite coordinate", f, seq.markers[m]});
                    break;
                }
            }
        }
    }
    if (seq.has_contacts() && seq.contacts.rows() != seq.frames()) {
        report.findings.push_back({"contact mask length does not match frames", -1, ""});
    }
    return report;
}

namespace {

void require_valid(const MotionSequence& seq, const std::string& context) {
    ValidationReport report = validate_sequence(seq);
    if (!report.ok()) {
        const auto& f = report.findings.front();
        std::string where;
        if (f.frame >= 0) {
            where = " at frame " + std::to_string(f.frame) +
                    (f.marker.empty() ? "" : ", marker " + f.marker);
        }
        throw Error(context + ": " + f.what + where);
    }
}

MotionSequence load_csv(const std::string& path, double unit_scale) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError("empty file: " + path, 1);
    ++line_no;

    struct Row {
        long frame;
        std::string marker;
        double x, y, z;
    };
    std::vector<Row> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        Row r;
        try {
            if (!std::getline(ss, cell, ',')) throw Error("missing frame");
            r.frame = std::stol(cell);
            if (!std::getline(ss, r.marker, ',')) throw Error("missing marker");
            if (!std::getline(ss, cell, ',')) throw Error("missing x");
            r.x = std::stod(cell);
            if (!std::getline(ss, cell, ',')) throw Error("missing y");
            r.y = std::stod(cell);
            if (!std::getline(ss, cell, ',')) throw Error("missing z");
            r.z = std::stod(cell);
        } catch (const std::exception& e) {
            throw ParseError(std::string("bad CSV row: ") + e.what(), line_no);
        }
        rows.push_back(r);
    }
    if (rows.empty()) throw ParseError("no data rows in " + path, line_no);

    // Marker order as first encountered in frame 0.
    MotionSequence seq;
    for (const Row& r : rows) {
        if (r.frame != 0) break;
        seq.markers.push_back(r.marker);
    }
    const int m = static_cast<int>(seq.markers.size());
    if (m == 0) throw ParseError("frames must start at 0", 2);
    if (rows.size() % m != 0) {
        throw ParseError("inconsistent marker count per frame", line_no);
    }
    const int frames = static_cast<int>(rows.size()) / m;
    seq.coords.resize(frames, 3 * m);
    for (int f = 0; f < frames; ++f) {
        for (int i = 0; i < m; ++i) {
            const Row& r = rows[static_cast<std::size_t>(f) * m + i];
            if (r.frame != f || r.marker != seq.markers[i]) {
                throw ParseError("rows out of order or marker mismatch at frame " +
                                     std::to_string(f),
                                 2 + static_cast<std::size_t>(f) * m + i);
            }
            seq.coords(f, 3 * i + 0) = r.x * unit_scale;
            seq.coords(f, 3 * i + 1) = r.y * unit_scale;
            seq.coords(f, 3 * i + 2) = r.z * unit_scale;
        }
    }
    seq.rate = 25.0; // CSV carries no rate; callers override from the manifest
    return seq;
}

void save_csv(const MotionSequence& seq, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "frame,marker,x,y,z\n";
    out.precision(17);
    for (int f = 0; f < seq.frames(); ++f) {
        for (int m = 0; m < seq.marker_count(); ++m) {
            out << f << ',' << seq.markers[m] << ',' << seq.coords(f, 3 * m) << ','
                << seq.coords(f, 3 * m + 1) << ',' << seq.coords(f, 3 * m + 2) << '\n';
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

constexpr char kMagic[4] = {'M', 'D', 'A', 'E'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_raw(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("unexpected end of file");
    return v;
}

void write_string(std::ostream& out, const std::string& s) {
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    const auto n = read_raw<std::uint32_t>(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw IoError("unexpected end of file");
    return s;
}

MotionSequence load_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw IoError("not an MDAE motion file: " + path);
    }
    const auto version = read_raw<std::uint32_t>(in);
    if (version != kVersion) {
        throw IoError("unsupported MDAE version " + std::to_string(version));
    }
    const auto frames = read_raw<std::uint64_t>(in);
    const auto markers = read_raw<std::uint64_t>(in);
    MotionSequence seq;
    seq.rate = read_raw<double>(in);
    seq.markers.reserve(markers);
    for (std::uint64_t i = 0; i < markers; ++i) seq.markers.push_back(read_string(in));
    seq.coords.resize(static_cast<Eigen::Index>(frames),
                      static_cast<Eigen::Index>(3 * markers));
    in.read(reinterpret_cast<char*>(seq.coords.data()),
            static_cast<std::streamsize>(sizeof(double) * frames * 3 * markers));
    if (!in) throw IoError("truncated coordinate block in " + path);
    const auto has_contacts = read_raw<std::uint8_t>(in);
    if (has_contacts) {
        const auto nfoot = read_raw<std::uint64_t>(in);
        for (std::uint64_t i = 0; i < nfoot; ++i) {
            seq.foot_markers.push_back(read_string(in));
        }
        seq.contacts.resize(static_cast<Eigen::Index>(frames),
                            static_cast<Eigen::Index>(nfoot));
        for (std::uint64_t f = 0; f < frames; ++f) {
            for (std::uint64_t i = 0; i < nfoot; ++i) {
                seq.contacts(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(i)) =
                    read_raw<std::uint8_t>(in);
            }
        }
    }
    return seq;
}

void save_binary(const MotionSequence& seq, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(kMagic, 4);
    write_raw<std::uint32_t>(out, kVersion);
    write_raw<std::uint64_t>(out, static_cast<std::uint64_t>(seq.frames()));
    write_raw<std::uint64_t>(out, static_cast<std::uint64_t>(seq.marker_count()));
    write_raw<double>(out, seq.rate);
    for (const auto& name : seq.markers) write_string(out, name);
    out.write(reinterpret_cast<const char*>(seq.coords.data()),
              static_cast<std::streamsize>(sizeof(double) * seq.coords.size()));
    write_raw<std::uint8_t>(out, seq.has_contacts() ? 1 : 0);
    if (seq.has_contacts()) {
        write_raw<std::uint64_t>(out, static_cast<std::uint64_t>(seq.foot_markers.size()));
        for (const auto& name : seq.foot_markers) write_string(out, name);
        for (int f = 0; f < seq.frames(); ++f) {
            for (int i = 0; i < seq.contacts.cols(); ++i) {
                write_raw<std::uint8_t>(out, static_cast<std::uint8_t>(seq.contacts(f, i)));
            }
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

} // namespace

MotionSequence load_sequence(const std::string& path, FileFormat format,
                             double unit_scale) {
    MotionSequence seq =
        format == FileFormat::Csv ? load_csv(path, unit_scale) : load_binary(path);
    require_valid(seq, "load_sequence(" + path + ")");
    return seq;
}

void save_sequence(const MotionSequence& seq, const std::string& path,
                   FileFormat format) {
    require_valid(seq, "save_sequence");
    if (format == FileFormat::Csv) {
        save_csv(seq, path);
    } else {
        save_binary(seq, path);
    }
}

Eigen::MatrixXi derive_foot_contacts(const MotionSequence& seq,
                                     const std::vector<std::string>& foot_markers,
                                     double height_thresh, double speed_thresh) {
    std::vector<int> idx;
    idx.reserve(foot_markers.size());
    for (const auto& name : foot_markers) idx.push_back(seq.marker_index(name));

    const int frames = seq.frames();
    Eigen::MatrixXi mask(frames, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        for (int f = 0; f < frames; ++f) {
            const Vec3 p = seq.pos(f, idx[i]);
            // Speed from the backward difference; frame 0 uses the forward one.
            const int prev = f > 0 ? f - 1 : 0;
            const int next = f > 0 ? f : std::min(1, frames - 1);
            double speed = 0.0;
            if (next != prev) {
                speed = (seq.pos(next, idx[i]) - seq.pos(prev, idx[i])).norm() * seq.rate;
            }
            mask(f, static_cast<Eigen::Index>(i)) =
                (p.z() < height_thresh && speed < speed_thresh) ? 1 : 0;
        }
    }
    return mask;
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad manifest JSON: ") + e.what(), 0);
    }
    DatasetManifest manifest;
    const json& arr = j.is_array() ? j : j.at("entries");
    if (j.is_object() && j.contains("unit_scale")) {
        manifest.unit_scale = j["unit_scale"].get<double>();
    }
    for (const auto& e : arr) {
        ManifestEntry entry;
        entry.path = e.at("path").get<std::string>();
        entry.meta.participant_id = e.at("participant").get<std::string>();
        entry.meta.technique = technique_from_name(e.at("technique").get<std::string>());
        entry.meta.grade_index = e.at("grade_index").get<int>();
        if (entry.meta.grade_index < 0 || entry.meta.grade_index > kMaxGradeIndex) {
            throw Error("grade_index out of range in manifest: " +
                        std::to_string(entry.meta.grade_index));
        }
        entry.meta.limb_side = e.at("limb_side").get<std::string>();
        entry.split = split_from_name(e.at("split").get<std::string>());
        manifest.entries.push_back(std::move(entry));
    }
    return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
    json arr = json::array();
    for (const auto& entry : manifest.entries) {
        arr.push_back({{"path", entry.path},
                       {"participant", entry.meta.participant_id},
                       {"technique", technique_name(entry.meta.technique)},
                       {"grade_index", entry.meta.grade_index},
                       {"limb_side", entry.meta.limb_side},
                       {"split", split_name(entry.split)}});
    }
    json j = {{"unit_scale", manifest.unit_scale}, {"entries", arr}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

namespace {

const std::vector<std::string> kSynthMarkers = {"ROOT", "HIP", "KNEE", "ANK", "TOE"};
const std::vector<double> kSynthLengths = {0.25, 0.45, 0.45, 0.20};

// Unit direction from a polar angle (from the downward vertical) and an
// azimuth in the horizontal plane.
Vec3 polar_dir(double polar, double azimuth) {
    return Vec3(std::sin(polar) * std::cos(azimuth),
                std::sin(polar) * std::sin(azimuth), -std::cos(polar));
}

} // namespace

const std::vector<std::string>& synthetic_marker_names() { return kSynthMarkers; }
const std::vector<double>& synthetic_link_lengths() { return kSynthLengths; }

SynthDataset generate_synthetic_dataset(const SynthConfig& config, std::uint64_t seed) {
    if (config.classes < 2 || config.classes > 5) {
        throw Error("generate_synthetic_dataset: classes must be in [2, 5]");
    }
    if (config.grade_indices.empty()) {
        throw Error("generate_synthetic_dataset: at least one grade index required");
    }
    if (config.samples_per_cell <= 0 || config.frames < 4 || config.rate <= 0) {
        throw Error("generate_synthetic_dataset: invalid config");
    }

    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    SynthDataset out;
    int sample_id = 0;
    for (int cls = 0; cls < config.classes; ++cls) {
        for (int grade : config.grade_indices) {
            if (grade < 0 || grade > kMaxGradeIndex) {
                throw Error("generate_synthetic_dataset: grade index out of range");
            }
            for (int s = 0; s < config.samples_per_cell; ++s) {
                const double skill = grade_value(grade);
                // Per-sample stochastic variation.
                const double phase = unit(rng) * 2.0 * M_PI;
                const double amp_jit = 0.85 + 0.3 * unit(rng);
                const double wobble_phase = unit(rng) * 2.0 * M_PI;
                const double drift = 0.05 * (unit(rng) - 0.5);

                // Skill reads mainly as execution speed, with a light smoothness
                // (wobble) component; timing survives re-synthesis much better
                // than fine texture, keeping the attributes separable end to end.
                const double freq = (0.55 + 0.9 * skill) * 1.2; // swing cycles per second
                const double wobble_amp = 0.06 * (1.0 - skill);

                MotionSequence seq;
                seq.markers = kSynthMarkers;
                seq.rate = config.rate;
                seq.coords.resize(config.frames, 3 * static_cast<int>(kSynthMarkers.size()));
                for (int f = 0; f < config.frames; ++f) {
                    const double t = f / config.rate;
                    const double w =
                        wobble_amp * std::sin(2.0 * M_PI * 6.0 * t + wobble_phase);
                    Vec3 p(0.35 + drift * t, 0.45, 1.05);
                    seq.set_pos(f, 0, p);
                    // Joint angles per class family; all classes share the rigid
                    // chain, so anatomy is identical across the dataset.
                    double polar[4];
                    double azim[4];
                    const double swing = std::sin(2.0 * M_PI * freq * t + phase);
                    switch (cls) {
                        case 0: // lateral swing family
                            polar[0] = 0.15;
                            polar[1] = 0.5 + 0.5 * amp_jit * swing + w;
                            polar[2] = 0.4 + 0.4 * amp_jit * swing + w;
                            polar[3] = 0.8 + 0.3 * swing;
                            azim[0] = azim[1] = azim[2] = azim[3] = 0.3 * swing;
                            break;
                        case 1: { // forward thrust family (raised-cosine pulse)
                            const double u = std::fmod(freq * t + phase / (2 * M_PI), 1.0);
                            const double pulse = 0.5 * (1.0 - std::cos(2.0 * M_PI * u));
                            polar[0] = 0.1;
                            polar[1] = 0.3 + 1.1 * amp_jit * pulse + w;
                            polar[2] = 0.2 + 0.9 * amp_jit * pulse + w;
                            polar[3] = 0.5 + 0.6 * pulse;
                            azim[0] = azim[1] = azim[2] = azim[3] =
                                M_PI / 2 + 0.2 * pulse;
                            break;
                        }
                        case 2: // circular sweep family
                            polar[0] = 0.2;
                            polar[1] = 0.7 + 0.3 * amp_jit * swing + w;
                            polar[2] = 0.6 + 0.3 * amp_jit * swing + w;
                            polar[3] = 0.9;
                            azim[0] = azim[1] = azim[2] = azim[3] =
                                2.0 * M_PI * freq * t + phase;
                            break;
                        case 3: // high swing family
                            polar[0] = 0.25;
                            polar[1] = 1.2 + 0.4 * amp_jit * swing + w;
                            polar[2] = 1.0 + 0.4 * amp_jit * swing + w;
                            polar[3] = 1.3 + 0.2 * swing;
                            azim[0] = azim[1] = azim[2] = azim[3] = -0.4 * swing;
                            break;
                        default: // alternating family
                            polar[0] = 0.2;
                            polar[1] = 0.6 + 0.5 * amp_jit * std::cos(2 * M_PI * freq * t + phase) + w;
                            polar[2] = 0.5 - 0.4 * amp_jit * swing + w;
                            polar[3] = 0.7;
                            azim[0] = azim[1] = azim[2] = azim[3] = M_PI + 0.3 * swing;
                            break;
                    }
                    for (int link = 0; link < 4; ++link) {
                        p += kSynthLengths[static_cast<std::size_t>(link)] *
                             polar_dir(polar[link], azim[link]);
                        seq.set_pos(f, link + 1, p);
                    }
                }
                seq.foot_markers = {"TOE"};
                seq.contacts = derive_foot_contacts(seq, seq.foot_markers,
                                                    config.contact_height_thresh,
                                                    config.contact_speed_thresh);

                ManifestEntry entry;
                entry.path = "synth_" + std::to_string(sample_id) + ".mdae";
                entry.meta.participant_id = "synthetic-" + std::to_string(sample_id);
                entry.meta.technique = static_cast<Technique>(cls);
                entry.meta.grade_index = grade;
                entry.meta.limb_side = "right";
                // Deterministic split: every 5th sample to validation, every
                // 5th+1 to test, rest to train.
                entry.split = (s % 5 == 3)   ? Split::Validation
                              : (s % 5 == 4) ? Split::Test
                                             : Split::Train;
                out.manifest.entries.push_back(entry);
                out.sequences.push_back(std::move(seq));
                ++sample_id;
            }
        }
    }
    return out;
}

} // namespace mdae
