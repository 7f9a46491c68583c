#pragma once

#include "mdae/autodiff.hpp"
#include "mdae/diffusion.hpp"
#include "mdae/pose_repr.hpp"

#include <string>
#include <vector>

namespace mdae {

struct Dims {
    int feature_dim = 27; // 3 + 6 * links
    int d_model = 48;
    int heads = 4;
    int layers = 2; // per module (encoder and denoiser)
    int d_ff = 96;
    int d_z = 32;
    int max_frames = 100;
};

/// Named weight tensors; the order is fixed at construction and shared with
/// gradient buffers.
struct ParamSet {
    std::vector<std::pair<std::string, Eigen::MatrixXd>> tensors;

    Eigen::MatrixXd& at(const std::string& name);
    const Eigen::MatrixXd& at(const std::string& name) const;
    std::size_t scalar_count() const;
    ParamSet zeros_like() const;
};

struct ModelParams {
    Dims dims;
    ScheduleKind sched_kind = ScheduleKind::Cosine;
    int sched_T = 1000;
    ParamSet params; // names prefixed enc. / den.
};

ModelParams init_model(const Dims& dims, Rng& rng);

/// Node ids of bound parameters, index-parallel to ParamSet::tensors.
std::vector<int> bind_params(ad::Tape& tape, const ParamSet& params);

/// Semantic encoder forward on the tape; returns the 1 x d_z node for z.
/// n_real <= rows(x0) <= max_frames; padded frames do not influence z.
int encoder_forward(ad::Tape& tape, const std::vector<int>& bound, const ModelParams& mp,
                    int x0_node, int n_real);

/// Denoiser forward; returns the frames x feature_dim node for x0_hat.
int denoiser_forward(ad::Tape& tape, const std::vector<int>& bound, const ModelParams& mp,
                     int xt_node, int t, int z_node, int n_real);

/// Forward-only convenience wrappers.
Eigen::VectorXd semantic_encode(const ModelParams& mp, const Eigen::MatrixXd& x0,
                                int n_real);
Eigen::MatrixXd denoise(const ModelParams& mp, const Eigen::MatrixXd& x_t, int t,
                        const Eigen::VectorXd& z);

/// DenoiserFn adapter for the diffusion loops.
DenoiserFn denoiser_fn(const ModelParams& mp);

struct TrainConfig {
    double phi_pos = 1.0;
    double phi_foot = 1.0;
    double phi_vel = 1.0;
    int batch_size = 16;
    double learning_rate = 1e-3;
    int steps = 2000;
    std::uint64_t seed = 0;
};

struct BatchItem {
    Eigen::MatrixXd x0; // frames x feature_dim (unpadded)
    int n_real = 0;
    Eigen::MatrixXi contacts; // frames x foot markers, may be empty
};

struct LossBreakdown {
    double total = 0, simple = 0, pos = 0, foot = 0, vel = 0;
};

// Plain loss evaluations matching the tape versions.
double loss_simple(const Eigen::MatrixXd& x0, const Eigen::MatrixXd& x0_hat);
double loss_pos(const Eigen::MatrixXd& x0, const Eigen::MatrixXd& x0_hat,
                const SkeletonChain& chain);
double loss_foot(const Eigen::MatrixXd& x0_hat, const Eigen::MatrixXi& contacts,
                 const SkeletonChain& chain, const std::vector<std::string>& foot_markers);
double loss_vel(const Eigen::MatrixXd& x0, const Eigen::MatrixXd& x0_hat);

/// Composite objective over a batch: samples t and noise per item, forms x_t,
/// denoises with z = f(x0), and combines the four losses. When grad_out is
/// non-null the parameter gradients (mean over the batch) are accumulated
/// into it. Deterministic given rng state; items may be evaluated in
/// parallel, with gradients reduced in index order.
LossBreakdown loss_total(const ModelParams& mp, const std::vector<BatchItem>& batch,
                         const TrainConfig& config, const NoiseSchedule& sched,
                         const SkeletonChain& chain,
                         const std::vector<std::string>& foot_markers, Rng& rng,
                         ParamSet* grad_out);

/// Adam state for train_step.
struct Optimizer {
    ParamSet m, v;
    long step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

Optimizer make_optimizer(const ModelParams& mp);

/// One optimization update of all parameters on loss_total. Returns the
/// pre-update loss. Skips the update (and reports it) on a non-finite loss.
LossBreakdown train_step(ModelParams& mp, Optimizer& opt,
                         const std::vector<BatchItem>& batch, const TrainConfig& config,
                         const NoiseSchedule& sched, const SkeletonChain& chain,
                         const std::vector<std::string>& foot_markers, Rng& rng,
                         bool* update_skipped = nullptr);

void save_checkpoint(const ModelParams& mp, const TrainConfig& config,
                     const std::string& path);
struct Checkpoint {
    ModelParams model;
    TrainConfig config;
};
Checkpoint load_checkpoint(const std::string& path);

} // namespace mdae
