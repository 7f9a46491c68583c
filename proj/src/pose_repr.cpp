#include "mdae/pose_repr.hpp"

#include "mdae/parallel.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <unordered_map>

namespace mdae {

using nlohmann::json;

void SkeletonChain::validate() const {
    if (root.empty()) throw Error("chain: empty root name");
    if (links.empty()) throw Error("chain: no links");
    std::set<std::string> placed = {root};
    std::set<std::string> children;
    for (const auto& link : links) {
        if (!placed.count(link.parent)) {
            throw Error("chain: link order not topological, parent " + link.parent +
                        " not yet placed");
        }
        if (!children.insert(link.child).second) {
            throw Error("chain: marker " + link.child + " appears as child twice");
        }
        if (link.child == root) throw Error("chain: root appears as a child");
        placed.insert(link.child);
    }
    if (!distances.empty()) {
        if (distances.size() != links.size()) {
            throw Error("chain: distance count does not match link count");
        }
        for (double d : distances) {
            if (!(d > 0.0)) throw Error("chain: link distance must be > 0");
        }
    }
}

SkeletonChain load_chain(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad chain JSON: ") + e.what(), 0);
    }
    SkeletonChain chain;
    chain.root = j.at("root").get<std::string>();
    for (const auto& l : j.at("links")) {
        chain.links.push_back({l.at("parent").get<std::string>(),
                               l.at("child").get<std::string>()});
    }
    if (j.contains("distances")) {
        chain.distances = j["distances"].get<std::vector<double>>();
    }
    chain.validate();
    return chain;
}

void save_chain(const SkeletonChain& chain, const std::string& path) {
    json links = json::array();
    for (const auto& l : chain.links) {
        links.push_back({{"parent", l.parent}, {"child", l.child}});
    }
    json j = {{"root", chain.root}, {"links", links}};
    if (!chain.distances.empty()) j["distances"] = chain.distances;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << '\n';
}

SkeletonChain synthetic_chain() {
    SkeletonChain chain;
    const auto& names = synthetic_marker_names();
    chain.root = names[0];
    for (std::size_t i = 0; i + 1 < names.size(); ++i) {
        chain.links.push_back({names[i], names[i + 1]});
    }
    return chain;
}

Mat32 PoseFeatures::stiefel(int frame, int link) const {
    Mat32 m;
    for (int c = 0; c < 2; ++c) {
        for (int r = 0; r < 3; ++r) {
            m(r, c) = link_features(frame, 6 * link + 3 * c + r);
        }
    }
    return m;
}

void PoseFeatures::set_stiefel(int frame, int link, const Mat32& m) {
    for (int c = 0; c < 2; ++c) {
        for (int r = 0; r < 3; ++r) {
            link_features(frame, 6 * link + 3 * c + r) = m(r, c);
        }
    }
}

Eigen::MatrixXd PoseFeatures::as_tensor() const {
    Eigen::MatrixXd t(frames(), feature_dim());
    t.leftCols(3) = root_trajectory;
    t.rightCols(6 * links()) = link_features;
    return t;
}

void PoseFeatures::from_tensor(const Eigen::MatrixXd& tensor) {
    if (tensor.cols() != feature_dim()) {
        throw Error("PoseFeatures::from_tensor: width mismatch");
    }
    root_trajectory = tensor.leftCols(3);
    link_features = tensor.rightCols(6 * links());
}

namespace {

struct ChainIndices {
    int root;
    std::vector<int> parent;
    std::vector<int> child;
};

ChainIndices resolve(const MotionSequence& seq, const SkeletonChain& chain) {
    ChainIndices idx;
    idx.root = seq.marker_index(chain.root);
    for (const auto& link : chain.links) {
        idx.parent.push_back(seq.marker_index(link.parent));
        idx.child.push_back(seq.marker_index(link.child));
    }
    return idx;
}

void encode_frame(const MotionSequence& seq, const ChainIndices& idx, int frame,
                  PoseFeatures& features) {
    features.root_trajectory.row(frame) = seq.pos(frame, idx.root).transpose();
    for (std::size_t l = 0; l < idx.parent.size(); ++l) {
        const Vec3 a = seq.pos(frame, idx.parent[l]);
        const Vec3 b = seq.pos(frame, idx.child[l]);
        geom::AxisAngle aa;
        try {
            aa = geom::axis_angle_between(a, b);
        } catch (const Error& e) {
            throw Error("encode_sequence: degenerate link " + std::to_string(l) +
                        " at frame " + std::to_string(frame) + ": " + e.what());
        }
        features.set_stiefel(frame, static_cast<int>(l),
                             geom::to_stiefel(geom::rodrigues_matrix(aa.axis, aa.angle)));
    }
}

void decode_frame(const PoseFeatures& features, const ChainIndices& idx, int frame,
                  MotionSequence& seq) {
    seq.set_pos(frame, idx.root, features.root_trajectory.row(frame).transpose());
    for (int l = 0; l < features.links(); ++l) {
        Mat3 rot;
        try {
            rot = geom::from_stiefel(features.stiefel(frame, l));
        } catch (const Error& e) {
            throw Error("decode_sequence: invalid Stiefel block, link " +
                        std::to_string(l) + " frame " + std::to_string(frame) + ": " +
                        e.what());
        }
        const double angle = geom::angle_of(rot);
        const Vec3 a = seq.pos(frame, idx.parent[static_cast<std::size_t>(l)]);
        Vec3 b;
        const double d = features.chain.distances[static_cast<std::size_t>(l)];
        if (angle < geom::kAngleEps) {
            // Identity rotation: step from a toward the origin.
            b = geom::reconstruct_marker(a, Vec3(0, 0, 1), 0.0, d);
        } else {
            b = geom::reconstruct_marker(a, geom::axis_of(rot, angle), angle, d);
        }
        seq.set_pos(frame, idx.child[static_cast<std::size_t>(l)], b);
    }
}

PoseFeatures encode_impl(const MotionSequence& seq, const SkeletonChain& chain,
                         DistancePolicy policy, bool parallel) {
    chain.validate();
    const ChainIndices idx = resolve(seq, chain);
    PoseFeatures features;
    features.chain = chain;
    features.rate = seq.rate;
    features.contacts = seq.contacts;
    features.foot_markers = seq.foot_markers;
    features.root_trajectory.resize(seq.frames(), 3);
    features.link_features.resize(seq.frames(), 6 * chain.link_count());

    const int frames = seq.frames();
    std::exception_ptr first_error;
    if (parallel) {
#pragma omp parallel for schedule(static) num_threads(worker_count(thread_cap()))
        for (int f = 0; f < frames; ++f) {
            try {
                encode_frame(seq, idx, f, features);
            } catch (...) {
#pragma omp critical
                if (!first_error) first_error = std::current_exception();
            }
        }
    } else {
        for (int f = 0; f < frames; ++f) encode_frame(seq, idx, f, features);
    }
    if (first_error) std::rethrow_exception(first_error);

    if (policy == DistancePolicy::Measured) {
        features.chain.distances.assign(static_cast<std::size_t>(chain.link_count()), 0.0);
        for (int f = 0; f < frames; ++f) {
            for (int l = 0; l < chain.link_count(); ++l) {
                features.chain.distances[static_cast<std::size_t>(l)] +=
                    (seq.pos(f, idx.child[static_cast<std::size_t>(l)]) -
                     seq.pos(f, idx.parent[static_cast<std::size_t>(l)]))
                        .norm();
            }
        }
        for (double& d : features.chain.distances) d /= frames;
    } else if (features.chain.distances.empty()) {
        throw Error("encode_sequence: DistancePolicy::Provided but chain has no distances");
    }
    features.chain.validate();
    return features;
}

MotionSequence decode_impl(const PoseFeatures& features, bool parallel) {
    features.chain.validate();
    if (features.chain.distances.empty()) {
        throw Error("decode_sequence: chain has no distances");
    }
    MotionSequence seq;
    seq.rate = features.rate;
    seq.contacts = features.contacts;
    seq.foot_markers = features.foot_markers;
    seq.markers.push_back(features.chain.root);
    for (const auto& link : features.chain.links) seq.markers.push_back(link.child);
    seq.coords.resize(features.frames(), 3 * seq.marker_count());

    const ChainIndices idx = resolve(seq, features.chain);
    const int frames = features.frames();
    std::exception_ptr first_error;
    if (parallel) {
#pragma omp parallel for schedule(static) num_threads(worker_count(thread_cap()))
        for (int f = 0; f < frames; ++f) {
            try {
                decode_frame(features, idx, f, seq);
            } catch (...) {
#pragma omp critical
                if (!first_error) first_error = std::current_exception();
            }
        }
    } else {
        for (int f = 0; f < frames; ++f) decode_frame(features, idx, f, seq);
    }
    if (first_error) std::rethrow_exception(first_error);
    return seq;
}

} // namespace

PoseFeatures encode_sequence(const MotionSequence& seq, const SkeletonChain& chain,
                             DistancePolicy policy, bool parallel) {
    return encode_impl(seq, chain, policy, parallel);
}

MotionSequence decode_sequence(const PoseFeatures& features, bool parallel) {
    return decode_impl(features, parallel);
}

PoseFeatures encode_sequence_serial(const MotionSequence& seq, const SkeletonChain& chain,
                                    DistancePolicy policy) {
    return encode_impl(seq, chain, policy, false);
}

MotionSequence decode_sequence_serial(const PoseFeatures& features) {
    return decode_impl(features, false);
}

AnatomyReport anatomy_report(const std::vector<MotionSequence>& dataset,
                             const SkeletonChain& chain) {
    chain.validate();
    AnatomyReport report;
    report.per_link_distance_std.assign(static_cast<std::size_t>(chain.link_count()), 0.0);

    std::vector<double> sum_sq_std(static_cast<std::size_t>(chain.link_count()), 0.0);
    double error_sum = 0.0;
    std::size_t error_count = 0;
    for (const auto& seq : dataset) {
        const ChainIndices idx = resolve(seq, chain);
        for (int l = 0; l < chain.link_count(); ++l) {
            double mean = 0.0;
            for (int f = 0; f < seq.frames(); ++f) {
                mean += (seq.pos(f, idx.child[static_cast<std::size_t>(l)]) -
                         seq.pos(f, idx.parent[static_cast<std::size_t>(l)]))
                            .norm();
            }
            mean /= seq.frames();
            double var = 0.0;
            for (int f = 0; f < seq.frames(); ++f) {
                const double d = (seq.pos(f, idx.child[static_cast<std::size_t>(l)]) -
                                  seq.pos(f, idx.parent[static_cast<std::size_t>(l)]))
                                     .norm();
                var += (d - mean) * (d - mean);
            }
            sum_sq_std[static_cast<std::size_t>(l)] += std::sqrt(var / seq.frames());
        }

        const PoseFeatures features = encode_sequence(seq, chain);
        const MotionSequence rec = decode_sequence(features);
        for (int f = 0; f < seq.frames(); ++f) {
            for (std::size_t m = 0; m < rec.markers.size(); ++m) {
                const int orig = seq.marker_index(rec.markers[m]);
                const double err =
                    (rec.pos(f, static_cast<int>(m)) - seq.pos(f, orig)).norm();
                error_sum += err;
                report.max_round_trip_error = std::max(report.max_round_trip_error, err);
                ++error_count;
            }
        }
    }
    for (int l = 0; l < chain.link_count(); ++l) {
        report.per_link_distance_std[static_cast<std::size_t>(l)] =
            sum_sq_std[static_cast<std::size_t>(l)] / static_cast<double>(dataset.size());
        report.mean_distance_std += report.per_link_distance_std[static_cast<std::size_t>(l)];
    }
    report.mean_distance_std /= chain.link_count();
    report.mean_round_trip_error = error_sum / static_cast<double>(error_count);
    return report;
}

namespace {

constexpr char kFeatMagic[4] = {'M', 'D', 'A', 'F'};
constexpr std::uint32_t kFeatVersion = 1;

} // namespace

void save_features(const PoseFeatures& features, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(kFeatMagic, 4);
    const std::uint32_t version = kFeatVersion;
    out.write(reinterpret_cast<const char*>(&version), 4);
    const std::uint64_t frames = static_cast<std::uint64_t>(features.frames());
    const std::uint64_t links = static_cast<std::uint64_t>(features.links());
    out.write(reinterpret_cast<const char*>(&frames), 8);
    out.write(reinterpret_cast<const char*>(&links), 8);
    out.write(reinterpret_cast<const char*>(&features.rate), 8);

    json links_json = json::array();
    for (const auto& l : features.chain.links) {
        links_json.push_back({{"parent", l.parent}, {"child", l.child}});
    }
    json chain_json = {{"root", features.chain.root},
                       {"links", links_json},
                       {"distances", features.chain.distances},
                       {"foot_markers", features.foot_markers}};
    const std::string chain_str = chain_json.dump();
    const std::uint64_t chain_len = chain_str.size();
    out.write(reinterpret_cast<const char*>(&chain_len), 8);
    out.write(chain_str.data(), static_cast<std::streamsize>(chain_str.size()));

    out.write(reinterpret_cast<const char*>(features.root_trajectory.data()),
              static_cast<std::streamsize>(sizeof(double) * features.root_trajectory.size()));
    out.write(reinterpret_cast<const char*>(features.link_features.data()),
              static_cast<std::streamsize>(sizeof(double) * features.link_features.size()));

    const std::uint64_t contact_cols = static_cast<std::uint64_t>(features.contacts.cols());
    out.write(reinterpret_cast<const char*>(&contact_cols), 8);
    for (int f = 0; f < features.contacts.rows(); ++f) {
        for (int c = 0; c < features.contacts.cols(); ++c) {
            const std::uint8_t v = static_cast<std::uint8_t>(features.contacts(f, c));
            out.write(reinterpret_cast<const char*>(&v), 1);
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

PoseFeatures load_features(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kFeatMagic, 4) != 0) {
        throw IoError("not an MDAF feature file: " + path);
    }
    std::uint32_t version;
    in.read(reinterpret_cast<char*>(&version), 4);
    if (version != kFeatVersion) {
        throw IoError("unsupported MDAF version " + std::to_string(version));
    }
    std::uint64_t frames, links, chain_len;
    PoseFeatures features;
    in.read(reinterpret_cast<char*>(&frames), 8);
    in.read(reinterpret_cast<char*>(&links), 8);
    in.read(reinterpret_cast<char*>(&features.rate), 8);
    in.read(reinterpret_cast<char*>(&chain_len), 8);
    if (!in) throw IoError("truncated header in " + path);
    std::string chain_str(chain_len, '\0');
    in.read(chain_str.data(), static_cast<std::streamsize>(chain_len));
    if (!in) throw IoError("truncated chain block in " + path);
    json chain_json = json::parse(chain_str);
    features.chain.root = chain_json.at("root").get<std::string>();
    for (const auto& l : chain_json.at("links")) {
        features.chain.links.push_back(
            {l.at("parent").get<std::string>(), l.at("child").get<std::string>()});
    }
    features.chain.distances = chain_json.at("distances").get<std::vector<double>>();
    features.foot_markers =
        chain_json.at("foot_markers").get<std::vector<std::string>>();
    features.chain.validate();
    if (features.chain.links.size() != links) {
        throw IoError("link count mismatch in " + path);
    }

    features.root_trajectory.resize(static_cast<Eigen::Index>(frames), 3);
    features.link_features.resize(static_cast<Eigen::Index>(frames),
                                  static_cast<Eigen::Index>(6 * links));
    in.read(reinterpret_cast<char*>(features.root_trajectory.data()),
            static_cast<std::streamsize>(sizeof(double) * features.root_trajectory.size()));
    in.read(reinterpret_cast<char*>(features.link_features.data()),
            static_cast<std::streamsize>(sizeof(double) * features.link_features.size()));
    std::uint64_t contact_cols;
    in.read(reinterpret_cast<char*>(&contact_cols), 8);
    if (!in) throw IoError("truncated feature blocks in " + path);
    if (contact_cols > 0) {
        features.contacts.resize(static_cast<Eigen::Index>(frames),
                                 static_cast<Eigen::Index>(contact_cols));
        for (std::uint64_t f = 0; f < frames; ++f) {
            for (std::uint64_t c = 0; c < contact_cols; ++c) {
                std::uint8_t v;
                in.read(reinterpret_cast<char*>(&v), 1);
                features.contacts(static_cast<Eigen::Index>(f),
                                  static_cast<Eigen::Index>(c)) = v;
            }
        }
        if (!in) throw IoError("truncated contact block in " + path);
    }
    return features;
}

} // namespace mdae
