#pragma once

#include "mdae/common.hpp"
#include "mdae/pose_repr.hpp"

#include <functional>
#include <vector>

namespace mdae::ad {

/// Reverse-mode tape over Eigen matrices. Nodes are created in topological
/// order; backward() walks them in reverse. One tape per forward pass.
class Tape {
public:
    struct Node {
        Eigen::MatrixXd val;
        Eigen::MatrixXd grad; // lazily sized on first accumulation
        std::function<void()> back;
    };

    int put(Eigen::MatrixXd v);
    void set_back(int id, std::function<void()> back);

    /// Leaf with gradient tracking (parameters and differentiable inputs).
    int input(const Eigen::MatrixXd& v) { return put(v); }
    /// Leaf without a backward function (data, masks, embeddings of t).
    int constant(const Eigen::MatrixXd& v) { return put(v); }

    const Eigen::MatrixXd& val(int id) const { return nodes_[static_cast<std::size_t>(id)].val; }
    Eigen::MatrixXd& grad(int id);

    /// Seeds the (1x1) loss node with 1 and accumulates gradients.
    void backward(int loss);

    std::size_t size() const { return nodes_.size(); }

private:
    std::vector<Node> nodes_;
};

// Elementwise and matrix ops. All return new node ids.
int add(Tape& t, int a, int b);
int sub(Tape& t, int a, int b);
int mul(Tape& t, int a, int b); // elementwise
int matmul(Tape& t, int a, int b);
int scale(Tape& t, int a, double s);
int transpose(Tape& t, int a);
int add_rowvec(Tape& t, int a, int bias); // bias is 1 x cols
int gelu(Tape& t, int a);
int slice_rows(Tape& t, int a, int start, int count);
int slice_cols(Tape& t, int a, int start, int count);
int concat_rows(Tape& t, const std::vector<int>& parts);
int concat_cols(Tape& t, const std::vector<int>& parts);
int softmax_rows(Tape& t, int a); // numerically stabilized
int layernorm_rows(Tape& t, int a, int gamma, int beta, double eps = 1e-5);
int sum_all(Tape& t, int a); // 1x1

/// Differentiable skeleton reconstruction: per-frame features
/// [root xyz | 6 per link] -> marker positions [root xyz | child xyz ...].
/// Norms are epsilon-regularized so the map is smooth everywhere.
int decode_positions(Tape& t, int features, const SkeletonChain& chain);

} // namespace mdae::ad
