#include "mdae/manipulate.hpp"

#include "mdae/diffusion.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>

namespace mdae {

using nlohmann::json;

Eigen::VectorXd AttributeHead::standardize(const Eigen::VectorXd& z) const {
    return (z - z_mean).cwiseQuotient(z_std);
}

Eigen::VectorXd AttributeHead::destandardize(const Eigen::VectorXd& zs) const {
    return zs.cwiseProduct(z_std) + z_mean;
}

namespace {

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    const double m = logits.maxCoeff();
    Eigen::VectorXd e = (logits.array() - m).exp();
    return e / e.sum();
}

Prediction predict_standardized(const AttributeHead& head, const Eigen::VectorXd& zs) {
    Prediction p;
    p.technique_probs = softmax(head.technique_weights * zs + head.technique_bias);
    p.grade = std::clamp(head.grade_weights.dot(zs) + head.grade_bias, 0.0, 1.0);
    return p;
}

} // namespace

AttributeHead train_head(const std::vector<Eigen::VectorXd>& embeddings,
                         const std::vector<SampleMeta>& labels,
                         const HeadTrainOptions& options) {
    if (embeddings.size() != labels.size() || embeddings.empty()) {
        throw Error("train_head: embeddings and labels must be non-empty and equal length");
    }
    const int d_z = static_cast<int>(embeddings[0].size());
    for (const auto& z : embeddings) {
        if (z.size() != d_z) throw Error("train_head: embedding dimension mismatch");
    }
    std::set<Technique> present;
    for (const auto& l : labels) present.insert(l.technique);
    if (present.size() < 2) {
        throw Error("train_head: need at least 2 technique classes");
    }

    const int n = static_cast<int>(embeddings.size());
    AttributeHead head;
    head.z_mean = Eigen::VectorXd::Zero(d_z);
    for (const auto& z : embeddings) head.z_mean += z / n;
    Eigen::VectorXd var = Eigen::VectorXd::Zero(d_z);
    for (const auto& z : embeddings) {
        var += (z - head.z_mean).cwiseAbs2() / n;
    }
    head.z_std = var.cwiseSqrt().cwiseMax(1e-8);

    Eigen::MatrixXd zs(n, d_z);
    for (int i = 0; i < n; ++i) {
        zs.row(i) = head.standardize(embeddings[static_cast<std::size_t>(i)]).transpose();
    }

    head.technique_weights = Eigen::MatrixXd::Zero(kTechniqueCount, d_z);
    head.technique_bias = Eigen::VectorXd::Zero(kTechniqueCount);
    head.grade_weights = Eigen::VectorXd::Zero(d_z);
    head.grade_bias = 0.0;

    // Full-batch gradient descent with momentum; deterministic.
    Eigen::MatrixXd mW = Eigen::MatrixXd::Zero(kTechniqueCount, d_z);
    Eigen::VectorXd mb = Eigen::VectorXd::Zero(kTechniqueCount);
    Eigen::VectorXd mg = Eigen::VectorXd::Zero(d_z);
    double mgb = 0.0;
    const double momentum = 0.9;
    for (int step = 0; step < options.steps; ++step) {
        Eigen::MatrixXd gW = options.l2 * head.technique_weights;
        Eigen::VectorXd gb = Eigen::VectorXd::Zero(kTechniqueCount);
        Eigen::VectorXd gg = options.l2 * head.grade_weights;
        double ggb = 0.0;
        for (int i = 0; i < n; ++i) {
            const Eigen::VectorXd x = zs.row(i).transpose();
            const Eigen::VectorXd p =
                softmax(head.technique_weights * x + head.technique_bias);
            Eigen::VectorXd err = p;
            err(static_cast<int>(labels[static_cast<std::size_t>(i)].technique)) -= 1.0;
            gW += err * x.transpose() / n;
            gb += err / n;
            const double g_pred = head.grade_weights.dot(x) + head.grade_bias;
            const double g_err =
                g_pred - grade_value(labels[static_cast<std::size_t>(i)].grade_index);
            gg += 2.0 * g_err * x / n;
            ggb += 2.0 * g_err / n;
        }
        mW = momentum * mW - options.learning_rate * gW;
        mb = momentum * mb - options.learning_rate * gb;
        mg = momentum * mg - options.learning_rate * gg;
        mgb = momentum * mgb - options.learning_rate * ggb;
        head.technique_weights += mW;
        head.technique_bias += mb;
        head.grade_weights += mg;
        head.grade_bias += mgb;
    }
    return head;
}

Prediction predict(const AttributeHead& head, const Eigen::VectorXd& z) {
    if (z.size() != head.d_z()) throw Error("predict: embedding dimension mismatch");
    return predict_standardized(head, head.standardize(z));
}

Eigen::VectorXd direction(const AttributeHead& head, const DirectionSpec& spec) {
    if (spec.kind == DirectionSpec::Kind::TechniqueChange) {
        if (spec.source == spec.target) {
            throw Error("direction: source and target technique are identical");
        }
        const Eigen::VectorXd d =
            head.technique_weights.row(static_cast<int>(spec.target)).transpose() -
            head.technique_weights.row(static_cast<int>(spec.source)).transpose();
        const double n = d.norm();
        if (n < 1e-12) throw Error("direction: degenerate technique direction");
        return d / n;
    }
    const double n = head.grade_weights.norm();
    if (n < 1e-12) throw Error("direction: degenerate grade direction");
    return (spec.sign >= 0 ? 1.0 : -1.0) * head.grade_weights / n;
}

LambdaMaxResult find_lambda_max(const AttributeHead& head, const Eigen::VectorXd& z,
                                const Eigen::VectorXd& dir_standardized,
                                const LambdaMaxOptions& options) {
    if (options.step <= 0) throw Error("find_lambda_max: step must be > 0");
    const Eigen::VectorXd zs = head.standardize(z);
    Prediction prev = predict_standardized(head, zs);
    int stable = 0;
    double lambda = 0.0;
    while (lambda < options.cap) {
        lambda += options.step;
        const Prediction cur =
            predict_standardized(head, zs + lambda * dir_standardized);
        const double change =
            std::max((cur.technique_probs - prev.technique_probs).cwiseAbs().maxCoeff(),
                     std::abs(cur.grade - prev.grade));
        stable = change < options.eps_conv ? stable + 1 : 0;
        prev = cur;
        if (stable >= options.window) return {lambda, false};
    }
    return {options.cap, true};
}

ManipulationResult guided_manipulate(const Eigen::VectorXd& z, const AttributeHead& head,
                                     const ManipulationTargets& targets, int grid,
                                     const LambdaMaxOptions& options) {
    if (!targets.technique && !targets.grade) {
        throw Error("guided_manipulate: no targets given");
    }
    if (grid < 2) throw Error("guided_manipulate: grid must have at least 2 points");
    const Eigen::VectorXd zs = head.standardize(z);
    const Prediction current = predict_standardized(head, zs);

    // Direction: technique change dominates when requested, otherwise the
    // grade direction. The score still accounts for both attributes.
    Eigen::VectorXd dir;
    const Technique source = [&] {
        int best = 0;
        current.technique_probs.maxCoeff(&best);
        return static_cast<Technique>(best);
    }();
    if (targets.technique && *targets.technique != source) {
        dir = direction(head, {DirectionSpec::Kind::TechniqueChange, source,
                               *targets.technique, +1});
    } else if (targets.grade) {
        dir = direction(head, {DirectionSpec::Kind::GradeChange, source, source,
                               *targets.grade >= current.grade ? +1 : -1});
    } else {
        // Technique target equals the current prediction: nothing to move.
        ManipulationResult res;
        res.z = z;
        res.lambda_star = 0.0;
        res.trace.push_back({0.0, 0.0, current.technique_probs, current.grade});
        return res;
    }

    Eigen::VectorXd technique_target(kTechniqueCount);
    if (targets.technique) {
        technique_target.setZero();
        technique_target(static_cast<int>(*targets.technique)) = 1.0;
    } else {
        technique_target = current.technique_probs;
    }
    const double grade_target = targets.grade ? *targets.grade : current.grade;

    const double lambda_max = find_lambda_max(head, z, dir, options).lambda_max;
    ManipulationResult res;
    double best_score = std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid; ++i) {
        const double lambda = lambda_max * i / (grid - 1);
        const Eigen::VectorXd cand = zs + lambda * dir;
        const Prediction p = predict_standardized(head, cand);
        const double score = 0.5 * (p.technique_probs - technique_target).norm() +
                             0.5 * std::abs(p.grade - grade_target);
        res.trace.push_back({lambda, score, p.technique_probs, p.grade});
        if (score < best_score) {
            best_score = score;
            res.lambda_star = lambda;
            res.z = head.destandardize(cand);
        }
    }
    return res;
}

MotionSequence manipulate_motion(const MotionSequence& seq,
                                 const ManipulationTargets& targets,
                                 const SkeletonChain& chain, const ModelParams& model,
                                 const AttributeHead& head, int substeps, int grid,
                                 const LambdaMaxOptions& options,
                                 ManipulationResult* details) {
    PoseFeatures features = encode_sequence(seq, chain);
    const Eigen::MatrixXd x0 = features.as_tensor();
    const int n_real = static_cast<int>(x0.rows());
    const Eigen::VectorXd z = semantic_encode(model, x0, n_real);
    const NoiseSchedule sched = make_schedule(model.sched_kind, model.sched_T);
    const DenoiserFn denoiser = denoiser_fn(model);
    const Eigen::MatrixXd x_T = stochastic_encode(x0, z, denoiser, sched, substeps);

    const ManipulationResult manip = guided_manipulate(z, head, targets, grid, options);
    if (details) *details = manip;

    Rng rng(0); // unused in deterministic mode
    const Eigen::MatrixXd x0_hat = decode(x_T, manip.z, denoiser, sched, substeps,
                                          ReverseMode::Deterministic, rng);
    features.from_tensor(x0_hat);
    return decode_sequence(features);
}

namespace {
constexpr char kHeadMagic[4] = {'M', 'D', 'A', 'H'};
constexpr std::uint32_t kHeadVersion = 1;
} // namespace

void save_head(const AttributeHead& head, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(kHeadMagic, 4);
    out.write(reinterpret_cast<const char*>(&kHeadVersion), 4);
    json classes = json::array();
    for (int i = 0; i < kTechniqueCount; ++i) {
        classes.push_back(technique_name(static_cast<Technique>(i)));
    }
    json header = {{"d_z", head.d_z()},
                   {"classes", classes},
                   {"z_mean", std::vector<double>(head.z_mean.data(),
                                                  head.z_mean.data() + head.z_mean.size())},
                   {"z_std", std::vector<double>(head.z_std.data(),
                                                 head.z_std.data() + head.z_std.size())}};
    const std::string hs = header.dump();
    const std::uint64_t hlen = hs.size();
    out.write(reinterpret_cast<const char*>(&hlen), 8);
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    out.write(reinterpret_cast<const char*>(head.technique_weights.data()),
              static_cast<std::streamsize>(sizeof(double) * head.technique_weights.size()));
    out.write(reinterpret_cast<const char*>(head.technique_bias.data()),
              static_cast<std::streamsize>(sizeof(double) * head.technique_bias.size()));
    out.write(reinterpret_cast<const char*>(head.grade_weights.data()),
              static_cast<std::streamsize>(sizeof(double) * head.grade_weights.size()));
    out.write(reinterpret_cast<const char*>(&head.grade_bias), sizeof(double));
    if (!out) throw IoError("write failed: " + path);
}

AttributeHead load_head(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kHeadMagic, 4) != 0) {
        throw IoError("not an MDAH head file: " + path);
    }
    std::uint32_t version;
    in.read(reinterpret_cast<char*>(&version), 4);
    if (!in || version != kHeadVersion) throw IoError("unsupported head version");
    std::uint64_t hlen;
    in.read(reinterpret_cast<char*>(&hlen), 8);
    if (!in) throw IoError("corrupt head file: " + path);
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw IoError("corrupt head file: " + path);
    const json header = json::parse(hs);
    const int d_z = header.at("d_z").get<int>();
    AttributeHead head;
    const auto mean = header.at("z_mean").get<std::vector<double>>();
    const auto std_dev = header.at("z_std").get<std::vector<double>>();
    if (static_cast<int>(mean.size()) != d_z || static_cast<int>(std_dev.size()) != d_z) {
        throw IoError("z-stats dimension mismatch in " + path);
    }
    head.z_mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), d_z);
    head.z_std = Eigen::Map<const Eigen::VectorXd>(std_dev.data(), d_z);
    head.technique_weights.resize(kTechniqueCount, d_z);
    head.technique_bias.resize(kTechniqueCount);
    head.grade_weights.resize(d_z);
    in.read(reinterpret_cast<char*>(head.technique_weights.data()),
            static_cast<std::streamsize>(sizeof(double) * head.technique_weights.size()));
    in.read(reinterpret_cast<char*>(head.technique_bias.data()),
            static_cast<std::streamsize>(sizeof(double) * head.technique_bias.size()));
    in.read(reinterpret_cast<char*>(head.grade_weights.data()),
            static_cast<std::streamsize>(sizeof(double) * head.grade_weights.size()));
    in.read(reinterpret_cast<char*>(&head.grade_bias), sizeof(double));
    if (!in) throw IoError("truncated head file: " + path);
    return head;
}

} // namespace mdae
