#include "mdae/evaluate.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>

namespace mdae {

UarResult confusion_and_uar(const std::vector<Technique>& predictions,
                            const std::vector<Technique>& truths) {
    if (predictions.size() != truths.size() || truths.empty()) {
        throw Error("confusion_and_uar: predictions and truths must be non-empty "
                    "and equal length");
    }
    UarResult out;
    out.confusion = Eigen::MatrixXi::Zero(kTechniqueCount, kTechniqueCount);
    for (std::size_t i = 0; i < truths.size(); ++i) {
        out.confusion(static_cast<int>(truths[i]), static_cast<int>(predictions[i])) += 1;
    }
    int present = 0;
    double recall_sum = 0.0;
    for (int c = 0; c < kTechniqueCount; ++c) {
        const int row_total = out.confusion.row(c).sum();
        if (row_total == 0) continue;
        ++present;
        recall_sum += static_cast<double>(out.confusion(c, c)) / row_total;
    }
    out.uar = recall_sum / present;
    return out;
}

GradeMae grade_mae(const std::vector<double>& predicted,
                   const std::vector<double>& truth) {
    if (predicted.size() != truth.size() || truth.empty()) {
        throw Error("grade_mae: predicted and truth must be non-empty and equal length");
    }
    std::map<int, std::pair<double, int>> acc;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int level = static_cast<int>(std::lround(truth[i] * kMaxGradeIndex));
        auto& a = acc[std::clamp(level, 0, kMaxGradeIndex)];
        a.first += std::abs(predicted[i] - truth[i]);
        a.second += 1;
    }
    GradeMae out;
    for (const auto& [level, a] : acc) {
        const double level_mae = a.first / a.second;
        out.per_grade.emplace_back(level, level_mae);
        out.mae += level_mae / static_cast<double>(acc.size());
    }
    out.mae_levels = out.mae * kMaxGradeIndex;
    return out;
}

SeparabilityReport evaluate_separability(const AttributeHead& head,
                                         const std::vector<Eigen::VectorXd>& embeddings,
                                         const std::vector<SampleMeta>& labels) {
    if (embeddings.size() != labels.size() || embeddings.empty()) {
        throw Error("evaluate_separability: embeddings and labels must be non-empty "
                    "and equal length");
    }
    SeparabilityReport rep;
    rep.confusion = Eigen::MatrixXi::Zero(kTechniqueCount, kTechniqueCount);
    std::map<int, std::pair<double, int>> grade_abs; // grade index -> (sum |err|, n)
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        const Prediction p = predict(head, embeddings[i]);
        int pred = 0;
        p.technique_probs.maxCoeff(&pred);
        const int truth = static_cast<int>(labels[i].technique);
        rep.confusion(truth, pred) += 1;
        auto& acc = grade_abs[labels[i].grade_index];
        acc.first += std::abs(p.grade - grade_value(labels[i].grade_index));
        acc.second += 1;
    }
    int present = 0;
    double recall_sum = 0.0;
    for (int c = 0; c < kTechniqueCount; ++c) {
        const int row_total = rep.confusion.row(c).sum();
        if (row_total == 0) continue;
        ++present;
        recall_sum += static_cast<double>(rep.confusion(c, c)) / row_total;
    }
    rep.uar = recall_sum / present;
    double mae_sum = 0.0;
    for (const auto& [idx, acc] : grade_abs) mae_sum += acc.first / acc.second;
    rep.grade_mae = mae_sum / static_cast<double>(grade_abs.size());
    rep.grade_mae_levels = rep.grade_mae * kMaxGradeIndex;
    return rep;
}

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw Error("sqrt_psd: matrix must be square");
    const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    if (es.info() != Eigen::Success) throw Error("sqrt_psd: eigendecomposition failed");
    const Eigen::VectorXd roots = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
}

namespace {

void gaussian_fit(const Eigen::MatrixXd& samples, Eigen::VectorXd& mu,
                  Eigen::MatrixXd& sigma, bool& ridged) {
    const int n = static_cast<int>(samples.rows());
    const int d = static_cast<int>(samples.cols());
    if (n < 2) throw Error("fid: each group needs at least 2 samples");
    mu = samples.colwise().mean().transpose();
    const Eigen::MatrixXd centered = samples.rowwise() - mu.transpose();
    sigma = centered.transpose() * centered / (n - 1);
    if (n < d + 1) {
        sigma += 1e-6 * Eigen::MatrixXd::Identity(d, d);
        ridged = true;
    }
}

} // namespace

FidResult fid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.cols() != b.cols()) throw Error("fid: groups have different dimension");
    FidResult out;
    Eigen::VectorXd mu_a, mu_b;
    Eigen::MatrixXd sig_a, sig_b;
    gaussian_fit(a, mu_a, sig_a, out.ridged);
    gaussian_fit(b, mu_b, sig_b, out.ridged);
    const Eigen::MatrixXd root_a = sqrt_psd(sig_a);
    const Eigen::MatrixXd cross = sqrt_psd(root_a * sig_b * root_a);
    out.fid = (mu_a - mu_b).squaredNorm() + (sig_a + sig_b - 2.0 * cross).trace();
    return out;
}

Projection2d pca_project_2d(const std::vector<Eigen::VectorXd>& embeddings) {
    if (embeddings.size() < 2) throw Error("pca: need at least 2 points");
    const int n = static_cast<int>(embeddings.size());
    const int d = static_cast<int>(embeddings[0].size());
    Eigen::MatrixXd data(n, d);
    for (int i = 0; i < n; ++i) {
        if (embeddings[static_cast<std::size_t>(i)].size() != d) {
            throw Error("pca: dimension mismatch");
        }
        data.row(i) = embeddings[static_cast<std::size_t>(i)].transpose();
    }
    const Eigen::RowVectorXd mean = data.colwise().mean();
    const Eigen::MatrixXd centered = data.rowwise() - mean;
    const Eigen::MatrixXd cov = centered.transpose() * centered / (n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw Error("pca: eigendecomposition failed");

    Projection2d out;
    const double total_var = std::max(es.eigenvalues().cwiseMax(0.0).sum(), 1e-300);
    out.points = Eigen::MatrixXd::Zero(n, 2);
    out.explained_variance_ratio.setZero();
    out.rank = 0;
    for (int k = 0; k < 2 && k < d; ++k) {
        const int idx = d - 1 - k; // eigenvalues are ascending
        const double ev = std::max(es.eigenvalues()(idx), 0.0);
        if (ev <= 1e-12 * total_var) break;
        Eigen::VectorXd axis = es.eigenvectors().col(idx);
        int imax = 0;
        axis.cwiseAbs().maxCoeff(&imax);
        if (axis(imax) < 0) axis = -axis;
        out.points.col(k) = centered * axis;
        out.explained_variance_ratio(k) = ev / total_var;
        ++out.rank;
    }
    if (out.rank == 0) throw Error("pca: all points identical");
    return out;
}

} // namespace mdae
