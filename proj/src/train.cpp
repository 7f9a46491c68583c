#include "mdae/model.hpp"
#include "mdae/parallel.hpp"

#include <cmath>

namespace mdae {

namespace {

// Position-column indices of the foot markers in decode_positions output
// (root is marker 0, the child of link l is marker l + 1).
std::vector<int> foot_position_indices(const SkeletonChain& chain,
                                       const std::vector<std::string>& foot_markers) {
    std::vector<int> out;
    for (const auto& name : foot_markers) {
        if (name == chain.root) {
            out.push_back(0);
            continue;
        }
        bool found = false;
        for (int l = 0; l < chain.link_count(); ++l) {
            if (chain.links[static_cast<std::size_t>(l)].child == name) {
                out.push_back(l + 1);
                found = true;
                break;
            }
        }
        if (!found) throw Error("foot marker not in chain: " + name);
    }
    return out;
}

int tape_loss_simple(ad::Tape& t, int x0, int x0_hat, int n_real) {
    const int a = ad::slice_rows(t, x0, 0, n_real);
    const int b = ad::slice_rows(t, x0_hat, 0, n_real);
    const int diff = ad::sub(t, a, b);
    const int sq = ad::mul(t, diff, diff);
    const double denom = static_cast<double>(n_real) * t.val(x0).cols();
    return ad::scale(t, ad::sum_all(t, sq), 1.0 / denom);
}

int tape_loss_pos(ad::Tape& t, int x0, int x0_hat, int n_real, const SkeletonChain& chain) {
    if (n_real < 2) throw Error("loss_pos: need at least 2 frames");
    const int a = ad::decode_positions(t, ad::slice_rows(t, x0, 0, n_real), chain);
    const int b = ad::decode_positions(t, ad::slice_rows(t, x0_hat, 0, n_real), chain);
    const int diff = ad::sub(t, a, b);
    const int sq = ad::mul(t, diff, diff);
    return ad::scale(t, ad::sum_all(t, sq), 1.0 / (n_real - 1));
}

int tape_loss_foot(ad::Tape& t, int x0_hat, int n_real, const Eigen::MatrixXi& contacts,
                   const SkeletonChain& chain,
                   const std::vector<std::string>& foot_markers) {
    if (n_real < 3) throw Error("loss_foot: need at least 3 frames");
    if (contacts.rows() < n_real) throw Error("loss_foot: contact mask shorter than frames");
    const std::vector<int> feet = foot_position_indices(chain, foot_markers);
    if (static_cast<std::size_t>(contacts.cols()) != feet.size()) {
        throw Error("loss_foot: contact mask width does not match foot markers");
    }
    const int positions = ad::decode_positions(t, ad::slice_rows(t, x0_hat, 0, n_real), chain);
    std::vector<int> cols;
    for (int f : feet) cols.push_back(ad::slice_cols(t, positions, 3 * f, 3));
    const int foot_pos = cols.size() == 1 ? cols[0] : ad::concat_cols(t, cols);
    const int vel = ad::sub(t, ad::slice_rows(t, foot_pos, 1, n_real - 1),
                            ad::slice_rows(t, foot_pos, 0, n_real - 1));
    Eigen::MatrixXd mask(n_real - 1, 3 * static_cast<Eigen::Index>(feet.size()));
    for (int i = 0; i < n_real - 1; ++i) {
        for (std::size_t f = 0; f < feet.size(); ++f) {
            const double c = contacts(i, static_cast<Eigen::Index>(f)) ? 1.0 : 0.0;
            mask.block<1, 3>(i, 3 * static_cast<Eigen::Index>(f)).setConstant(c);
        }
    }
    const int masked = ad::mul(t, vel, t.constant(mask));
    const int sq = ad::mul(t, masked, masked);
    return ad::scale(t, ad::sum_all(t, sq), 1.0 / (n_real - 2));
}

int tape_loss_vel(ad::Tape& t, int x0, int x0_hat, int n_real) {
    if (n_real < 3) throw Error("loss_vel: need at least 3 frames");
    auto deltas = [&](int x) {
        return ad::sub(t, ad::slice_rows(t, x, 1, n_real - 1),
                       ad::slice_rows(t, x, 0, n_real - 1));
    };
    const int diff = ad::sub(t, deltas(x0), deltas(x0_hat));
    const int sq = ad::mul(t, diff, diff);
    return ad::scale(t, ad::sum_all(t, sq), 1.0 / (n_real - 2));
}

} // namespace

double loss_simple(const Eigen::MatrixXd& x0, const Eigen::MatrixXd& x0_hat) {
    if (x0.rows() != x0_hat.rows() || x0.cols() != x0_hat.cols()) {
        throw Error("loss_simple: shape mismatch");
    }
    ad::Tape t;
    return t.val(tape_loss_simple(t, t.constant(x0), t.constant(x0_hat),
                                  static_cast<int>(x0.rows())))(0, 0);
}

double loss_pos(const Eigen::MatrixXd& x0, const Eigen::MatrixXd& x0_hat,
                const SkeletonChain& chain) {
    if (x0.rows() != x0_hat.rows() || x0.cols() != x0_hat.cols()) {
        throw Error("loss_pos: shape mismatch");
    }
    ad::Tape t;
    return t.val(tape_loss_pos(t, t.constant(x0), t.constant(x0_hat),
                               static_cast<int>(x0.rows()), chain))(0, 0);
}

double loss_foot(const Eigen::MatrixXd& x0_hat, const Eigen::MatrixXi& contacts,
                 const SkeletonChain& chain,
                 const std::vector<std::string>& foot_markers) {
    ad::Tape t;
    return t.val(tape_loss_foot(t, t.constant(x0_hat), static_cast<int>(x0_hat.rows()),
                                contacts, chain, foot_markers))(0, 0);
}

double loss_vel(const Eigen::MatrixXd& x0, const Eigen::MatrixXd& x0_hat) {
    if (x0.rows() != x0_hat.rows() || x0.cols() != x0_hat.cols()) {
        throw Error("loss_vel: shape mismatch");
    }
    ad::Tape t;
    return t.val(tape_loss_vel(t, t.constant(x0), t.constant(x0_hat),
                               static_cast<int>(x0.rows())))(0, 0);
}

LossBreakdown loss_total(const ModelParams& mp, const std::vector<BatchItem>& batch,
                         const TrainConfig& config, const NoiseSchedule& sched,
                         const SkeletonChain& chain,
                         const std::vector<std::string>& foot_markers, Rng& rng,
                         ParamSet* grad_out) {
    if (batch.empty()) throw Error("loss_total: empty batch");

    // Presample the diffusion step and noise per item so the result does not
    // depend on evaluation order.
    struct Draw {
        int t;
        Eigen::MatrixXd eps;
    };
    std::vector<Draw> draws;
    draws.reserve(batch.size());
    std::uniform_int_distribution<int> t_dist(1, sched.T);
    for (const auto& item : batch) {
        Draw d;
        d.t = t_dist(rng);
        d.eps = gaussian_noise(static_cast<int>(item.x0.rows()),
                               static_cast<int>(item.x0.cols()), rng);
        draws.push_back(std::move(d));
    }

    const int n = static_cast<int>(batch.size());
    std::vector<LossBreakdown> per_item(static_cast<std::size_t>(n));
    std::vector<ParamSet> per_item_grads;
    if (grad_out) {
        per_item_grads.assign(static_cast<std::size_t>(n), mp.params.zeros_like());
    }
    std::exception_ptr first_error;

#pragma omp parallel for schedule(static) num_threads(worker_count(thread_cap()))
    for (int i = 0; i < n; ++i) {
        try {
            const BatchItem& item = batch[static_cast<std::size_t>(i)];
            const int n_real = item.n_real > 0 ? item.n_real
                                               : static_cast<int>(item.x0.rows());
            ad::Tape tape;
            const std::vector<int> bound = bind_params(tape, mp.params);
            const int x0 = tape.constant(item.x0);
            const int z = encoder_forward(tape, bound, mp, x0, n_real);
            const Draw& d = draws[static_cast<std::size_t>(i)];
            const int xt = tape.constant(q_sample(item.x0, d.t, d.eps, sched));
            const int x0_hat = denoiser_forward(tape, bound, mp, xt, d.t, z, n_real);

            const int l_simple = tape_loss_simple(tape, x0, x0_hat, n_real);
            int total = l_simple;
            LossBreakdown& lb = per_item[static_cast<std::size_t>(i)];
            lb.simple = tape.val(l_simple)(0, 0);
            if (config.phi_pos > 0) {
                const int l = tape_loss_pos(tape, x0, x0_hat, n_real, chain);
                lb.pos = tape.val(l)(0, 0);
                total = ad::add(tape, total, ad::scale(tape, l, config.phi_pos));
            }
            if (config.phi_foot > 0 && item.contacts.size() > 0 && !foot_markers.empty()) {
                const int l = tape_loss_foot(tape, x0_hat, n_real, item.contacts, chain,
                                             foot_markers);
                lb.foot = tape.val(l)(0, 0);
                total = ad::add(tape, total, ad::scale(tape, l, config.phi_foot));
            }
            if (config.phi_vel > 0) {
                const int l = tape_loss_vel(tape, x0, x0_hat, n_real);
                lb.vel = tape.val(l)(0, 0);
                total = ad::add(tape, total, ad::scale(tape, l, config.phi_vel));
            }
            lb.total = tape.val(total)(0, 0);

            if (grad_out) {
                tape.backward(total);
                ParamSet& g = per_item_grads[static_cast<std::size_t>(i)];
                for (std::size_t p = 0; p < g.tensors.size(); ++p) {
                    g.tensors[p].second = tape.grad(bound[p]);
                }
            }
        } catch (...) {
#pragma omp critical
            if (!first_error) first_error = std::current_exception();
        }
    }
    if (first_error) std::rethrow_exception(first_error);

    LossBreakdown mean;
    for (const auto& lb : per_item) {
        mean.total += lb.total / n;
        mean.simple += lb.simple / n;
        mean.pos += lb.pos / n;
        mean.foot += lb.foot / n;
        mean.vel += lb.vel / n;
    }
    if (grad_out) {
        // Fixed-order reduction keeps runs bit-reproducible.
        for (int i = 0; i < n; ++i) {
            const ParamSet& g = per_item_grads[static_cast<std::size_t>(i)];
            for (std::size_t p = 0; p < g.tensors.size(); ++p) {
                grad_out->tensors[p].second += g.tensors[p].second / n;
            }
        }
    }
    return mean;
}

Optimizer make_optimizer(const ModelParams& mp) {
    Optimizer opt;
    opt.m = mp.params.zeros_like();
    opt.v = mp.params.zeros_like();
    return opt;
}

LossBreakdown train_step(ModelParams& mp, Optimizer& opt,
                         const std::vector<BatchItem>& batch, const TrainConfig& config,
                         const NoiseSchedule& sched, const SkeletonChain& chain,
                         const std::vector<std::string>& foot_markers, Rng& rng,
                         bool* update_skipped) {
    ParamSet grad = mp.params.zeros_like();
    const LossBreakdown lb =
        loss_total(mp, batch, config, sched, chain, foot_markers, rng, &grad);
    if (update_skipped) *update_skipped = false;
    if (!std::isfinite(lb.total)) {
        if (update_skipped) *update_skipped = true;
        return lb;
    }
    if (config.learning_rate == 0.0) return lb;

    // Adam.
    ++opt.step;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
    for (std::size_t p = 0; p < mp.params.tensors.size(); ++p) {
        Eigen::MatrixXd& w = mp.params.tensors[p].second;
        const Eigen::MatrixXd& g = grad.tensors[p].second;
        Eigen::MatrixXd& m = opt.m.tensors[p].second;
        Eigen::MatrixXd& v = opt.v.tensors[p].second;
        m = opt.beta1 * m + (1.0 - opt.beta1) * g;
        v = opt.beta2 * v + (1.0 - opt.beta2) * g.cwiseProduct(g);
        const Eigen::MatrixXd m_hat = m / bc1;
        const Eigen::MatrixXd v_hat = v / bc2;
        w -= config.learning_rate *
             m_hat.cwiseQuotient((v_hat.cwiseSqrt().array() + opt.eps).matrix());
    }
    return lb;
}

} // namespace mdae
