#include "mdae/autodiff.hpp"

#include <cmath>
#include <memory>
#include <unordered_map>

namespace mdae::ad {

int Tape::put(Eigen::MatrixXd v) {
    nodes_.push_back(Node{std::move(v), Eigen::MatrixXd(), nullptr});
    return static_cast<int>(nodes_.size()) - 1;
}

void Tape::set_back(int id, std::function<void()> back) {
    nodes_[static_cast<std::size_t>(id)].back = std::move(back);
}

Eigen::MatrixXd& Tape::grad(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) {
        n.grad = Eigen::MatrixXd::Zero(n.val.rows(), n.val.cols());
    }
    return n.grad;
}

void Tape::backward(int loss) {
    if (val(loss).rows() != 1 || val(loss).cols() != 1) {
        throw Error("backward: loss node must be 1x1");
    }
    grad(loss)(0, 0) = 1.0;
    for (int i = loss; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.back && n.grad.size() != 0) n.back();
    }
}

int add(Tape& t, int a, int b) {
    const int out = t.put(t.val(a) + t.val(b));
    t.set_back(out, [&t, a, b, out] {
        t.grad(a) += t.grad(out);
        t.grad(b) += t.grad(out);
    });
    return out;
}

int sub(Tape& t, int a, int b) {
    const int out = t.put(t.val(a) - t.val(b));
    t.set_back(out, [&t, a, b, out] {
        t.grad(a) += t.grad(out);
        t.grad(b) -= t.grad(out);
    });
    return out;
}

int mul(Tape& t, int a, int b) {
    const int out = t.put(t.val(a).cwiseProduct(t.val(b)));
    t.set_back(out, [&t, a, b, out] {
        t.grad(a) += t.grad(out).cwiseProduct(t.val(b));
        t.grad(b) += t.grad(out).cwiseProduct(t.val(a));
    });
    return out;
}

int matmul(Tape& t, int a, int b) {
    if (t.val(a).cols() != t.val(b).rows()) throw Error("matmul: shape mismatch");
    const int out = t.put(t.val(a) * t.val(b));
    t.set_back(out, [&t, a, b, out] {
        t.grad(a) += t.grad(out) * t.val(b).transpose();
        t.grad(b) += t.val(a).transpose() * t.grad(out);
    });
    return out;
}

int scale(Tape& t, int a, double s) {
    const int out = t.put(s * t.val(a));
    t.set_back(out, [&t, a, out, s] { t.grad(a) += s * t.grad(out); });
    return out;
}

int transpose(Tape& t, int a) {
    const int out = t.put(t.val(a).transpose());
    t.set_back(out, [&t, a, out] { t.grad(a) += t.grad(out).transpose(); });
    return out;
}

int add_rowvec(Tape& t, int a, int bias) {
    if (t.val(bias).rows() != 1 || t.val(bias).cols() != t.val(a).cols()) {
        throw Error("add_rowvec: bias must be 1 x cols");
    }
    Eigen::MatrixXd v = t.val(a);
    v.rowwise() += t.val(bias).row(0);
    const int out = t.put(std::move(v));
    t.set_back(out, [&t, a, bias, out] {
        t.grad(a) += t.grad(out);
        t.grad(bias) += t.grad(out).colwise().sum();
    });
    return out;
}

int gelu(Tape& t, int a) {
    const Eigen::MatrixXd& x = t.val(a);
    Eigen::MatrixXd y(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double v = x(i);
        y(i) = 0.5 * v * (1.0 + std::erf(v / M_SQRT2));
    }
    const int out = t.put(std::move(y));
    t.set_back(out, [&t, a, out] {
        const Eigen::MatrixXd& x_ = t.val(a);
        Eigen::MatrixXd& ga = t.grad(a);
        const Eigen::MatrixXd& go = t.grad(out);
        for (Eigen::Index i = 0; i < x_.size(); ++i) {
            const double v = x_(i);
            const double cdf = 0.5 * (1.0 + std::erf(v / M_SQRT2));
            const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * M_PI);
            ga(i) += go(i) * (cdf + v * pdf);
        }
    });
    return out;
}

int slice_rows(Tape& t, int a, int start, int count) {
    const int out = t.put(t.val(a).middleRows(start, count));
    t.set_back(out, [&t, a, out, start, count] {
        t.grad(a).middleRows(start, count) += t.grad(out);
    });
    return out;
}

int slice_cols(Tape& t, int a, int start, int count) {
    const int out = t.put(t.val(a).middleCols(start, count));
    t.set_back(out, [&t, a, out, start, count] {
        t.grad(a).middleCols(start, count) += t.grad(out);
    });
    return out;
}

int concat_rows(Tape& t, const std::vector<int>& parts) {
    if (parts.empty()) throw Error("concat_rows: empty list");
    Eigen::Index rows = 0;
    const Eigen::Index cols = t.val(parts[0]).cols();
    for (int p : parts) rows += t.val(p).rows();
    Eigen::MatrixXd v(rows, cols);
    Eigen::Index at = 0;
    for (int p : parts) {
        v.middleRows(at, t.val(p).rows()) = t.val(p);
        at += t.val(p).rows();
    }
    const int out = t.put(std::move(v));
    t.set_back(out, [&t, parts, out] {
        Eigen::Index at_ = 0;
        for (int p : parts) {
            const Eigen::Index n = t.val(p).rows();
            t.grad(p) += t.grad(out).middleRows(at_, n);
            at_ += n;
        }
    });
    return out;
}

int concat_cols(Tape& t, const std::vector<int>& parts) {
    if (parts.empty()) throw Error("concat_cols: empty list");
    Eigen::Index cols = 0;
    const Eigen::Index rows = t.val(parts[0]).rows();
    for (int p : parts) cols += t.val(p).cols();
    Eigen::MatrixXd v(rows, cols);
    Eigen::Index at = 0;
    for (int p : parts) {
        v.middleCols(at, t.val(p).cols()) = t.val(p);
        at += t.val(p).cols();
    }
    const int out = t.put(std::move(v));
    t.set_back(out, [&t, parts, out] {
        Eigen::Index at_ = 0;
        for (int p : parts) {
            const Eigen::Index n = t.val(p).cols();
            t.grad(p) += t.grad(out).middleCols(at_, n);
            at_ += n;
        }
    });
    return out;
}

int softmax_rows(Tape& t, int a) {
    Eigen::MatrixXd p = t.val(a);
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        const double m = p.row(r).maxCoeff();
        p.row(r) = (p.row(r).array() - m).exp();
        p.row(r) /= p.row(r).sum();
    }
    const int out = t.put(std::move(p));
    t.set_back(out, [&t, a, out] {
        const Eigen::MatrixXd& p_ = t.val(out);
        const Eigen::MatrixXd& go = t.grad(out);
        Eigen::MatrixXd& ga = t.grad(a);
        for (Eigen::Index r = 0; r < p_.rows(); ++r) {
            const double dot = go.row(r).dot(p_.row(r));
            ga.row(r) += p_.row(r).cwiseProduct(((go.row(r).array() - dot).matrix()));
        }
    });
    return out;
}

int layernorm_rows(Tape& t, int a, int gamma, int beta, double eps) {
    const Eigen::MatrixXd& x = t.val(a);
    const Eigen::Index n = x.cols();
    Eigen::MatrixXd xhat(x.rows(), n);
    Eigen::VectorXd inv_std(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mean = x.row(r).mean();
        const double var = (x.row(r).array() - mean).square().mean();
        inv_std(r) = 1.0 / std::sqrt(var + eps);
        xhat.row(r) = (x.row(r).array() - mean) * inv_std(r);
    }
    Eigen::MatrixXd y = xhat;
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
        y.row(r) = y.row(r).cwiseProduct(t.val(gamma).row(0)) + t.val(beta).row(0);
    }
    const int out = t.put(std::move(y));
    auto cache = std::make_shared<std::pair<Eigen::MatrixXd, Eigen::VectorXd>>(
        std::move(xhat), std::move(inv_std));
    t.set_back(out, [&t, a, gamma, beta, out, cache] {
        const Eigen::MatrixXd& xhat_ = cache->first;
        const Eigen::VectorXd& inv_std_ = cache->second;
        const Eigen::MatrixXd& go = t.grad(out);
        const Eigen::RowVectorXd g = t.val(gamma).row(0);
        for (Eigen::Index r = 0; r < go.rows(); ++r) {
            const Eigen::RowVectorXd dxhat = go.row(r).cwiseProduct(g);
            const double m1 = dxhat.mean();
            const double m2 = dxhat.cwiseProduct(xhat_.row(r)).mean();
            t.grad(a).row(r) +=
                inv_std_(r) * (dxhat.array() - m1 - xhat_.row(r).array() * m2).matrix();
            t.grad(gamma).row(0) += go.row(r).cwiseProduct(xhat_.row(r));
            t.grad(beta).row(0) += go.row(r);
        }
    });
    return out;
}

int sum_all(Tape& t, int a) {
    Eigen::MatrixXd v(1, 1);
    v(0, 0) = t.val(a).sum();
    const int out = t.put(std::move(v));
    t.set_back(out, [&t, a, out] {
        t.grad(a).array() += t.grad(out)(0, 0);
    });
    return out;
}

namespace {

constexpr double kSafeEps = 1e-12;

inline double safe_norm(const Vec3& v) { return std::sqrt(v.squaredNorm() + kSafeEps); }

// Backward of r = v / sqrt(|v|^2 + eps).
inline Vec3 normalize_back(const Vec3& v, double n, const Vec3& g_r) {
    return g_r / n - v * (v.dot(g_r)) / (n * n * n);
}

struct LinkCache {
    Vec3 a;          // parent position
    double na;       // safe norm of a
    Vec3 u;          // -a / na
    Vec3 c1, c2;     // Stiefel columns
    double n1, nw;   // safe norms
    Vec3 r1, r2, r3; // Gram-Schmidt frame
    Vec3 w;
    double s; // r1 . c2
};

} // namespace

int decode_positions(Tape& t, int features, const SkeletonChain& chain) {
    chain.validate();
    if (chain.distances.empty()) throw Error("decode_positions: chain has no distances");
    const Eigen::MatrixXd& x = t.val(features);
    const int links = chain.link_count();
    if (x.cols() != 3 + 6 * links) throw Error("decode_positions: feature width mismatch");
    const int frames = static_cast<int>(x.rows());
    const int markers = links + 1;

    // Marker position index: root -> 0, child of link l -> l + 1.
    std::unordered_map<std::string, int> pos_index;
    pos_index[chain.root] = 0;
    for (int l = 0; l < links; ++l) pos_index[chain.links[static_cast<std::size_t>(l)].child] = l + 1;
    std::vector<int> parent_index(static_cast<std::size_t>(links));
    for (int l = 0; l < links; ++l) {
        parent_index[static_cast<std::size_t>(l)] =
            pos_index.at(chain.links[static_cast<std::size_t>(l)].parent);
    }

    auto cache = std::make_shared<std::vector<LinkCache>>(
        static_cast<std::size_t>(frames) * static_cast<std::size_t>(links));
    Eigen::MatrixXd positions(frames, 3 * markers);
    for (int f = 0; f < frames; ++f) {
        positions.block<1, 3>(f, 0) = x.block<1, 3>(f, 0);
        for (int l = 0; l < links; ++l) {
            LinkCache& c = (*cache)[static_cast<std::size_t>(f) * links + l];
            const int pi = parent_index[static_cast<std::size_t>(l)];
            c.a = positions.block<1, 3>(f, 3 * pi).transpose();
            c.na = safe_norm(c.a);
            c.u = -c.a / c.na;
            const int base = 3 + 6 * l;
            c.c1 = Vec3(x(f, base), x(f, base + 1), x(f, base + 2));
            c.c2 = Vec3(x(f, base + 3), x(f, base + 4), x(f, base + 5));
            c.n1 = safe_norm(c.c1);
            c.r1 = c.c1 / c.n1;
            c.s = c.r1.dot(c.c2);
            c.w = c.c2 - c.s * c.r1;
            c.nw = safe_norm(c.w);
            c.r2 = c.w / c.nw;
            c.r3 = c.r1.cross(c.r2);
            const double d = chain.distances[static_cast<std::size_t>(l)];
            // R * u with R = [r1 r2 r3].
            const Vec3 b = c.a + d * (c.r1 * c.u.x() + c.r2 * c.u.y() + c.r3 * c.u.z());
            positions.block<1, 3>(f, 3 * (l + 1)) = b.transpose();
        }
    }

    const int out = t.put(std::move(positions));
    std::vector<double> dist = chain.distances;
    t.set_back(out, [&t, features, out, cache, parent_index, dist, frames, links] {
        const Eigen::MatrixXd& go = t.grad(out);
        Eigen::MatrixXd& gx = t.grad(features);
        for (int f = 0; f < frames; ++f) {
            // Position gradient accumulators per marker.
            std::vector<Vec3> gpos(static_cast<std::size_t>(links) + 1);
            for (int m = 0; m <= links; ++m) {
                gpos[static_cast<std::size_t>(m)] = go.block<1, 3>(f, 3 * m).transpose();
            }
            for (int l = links - 1; l >= 0; --l) {
                const LinkCache& c = (*cache)[static_cast<std::size_t>(f) * links + l];
                const double d = dist[static_cast<std::size_t>(l)];
                const Vec3 g_b = gpos[static_cast<std::size_t>(l) + 1];

                // b = a + d * R u.
                Vec3 g_r1 = d * c.u.x() * g_b;
                Vec3 g_r2 = d * c.u.y() * g_b;
                const Vec3 g_r3 = d * c.u.z() * g_b;
                Vec3 g_u(d * c.r1.dot(g_b), d * c.r2.dot(g_b), d * c.r3.dot(g_b));

                // r3 = r1 x r2.
                g_r1 += c.r2.cross(g_r3);
                g_r2 += g_r3.cross(c.r1);

                // r2 = w / nw.
                const Vec3 g_w = normalize_back(c.w, c.nw, g_r2);
                // w = c2 - (r1 . c2) r1.
                Vec3 g_c2 = g_w - (g_w.dot(c.r1)) * c.r1;
                g_r1 += -(g_w.dot(c.r1)) * c.c2 - c.s * g_w;
                // r1 = c1 / n1.
                const Vec3 g_c1 = normalize_back(c.c1, c.n1, g_r1);

                // u = -a / na.
                const Vec3 g_a_from_u = -normalize_back(c.a, c.na, g_u);
                const Vec3 g_a = g_b + g_a_from_u;

                const int base = 3 + 6 * l;
                for (int i = 0; i < 3; ++i) {
                    gx(f, base + i) += g_c1[i];
                    gx(f, base + 3 + i) += g_c2[i];
                }
                gpos[static_cast<std::size_t>(parent_index[static_cast<std::size_t>(l)])] +=
                    g_a;
            }
            gx.block<1, 3>(f, 0) += gpos[0].transpose();
        }
    });
    return out;
}

} // namespace mdae::ad
