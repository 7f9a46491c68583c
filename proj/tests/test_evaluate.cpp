#include "mdae/evaluate.hpp"

#include <doctest.h>

#include <random>

using namespace mdae;

namespace {

Eigen::MatrixXd gaussian_samples(int n, int d, const Eigen::VectorXd& mean,
                                 std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Eigen::MatrixXd s(n, d);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) s(i, j) = mean(j) + g(rng);
    }
    return s;
}

} // namespace

TEST_CASE("confusion_and_uar forced arithmetic") {
    using T = Technique;
    // Class RP: 2/2 correct; class FK: 1/2 correct -> UAR 0.75.
    const std::vector<T> truths = {T::RP, T::RP, T::FK, T::FK};
    const std::vector<T> preds = {T::RP, T::RP, T::FK, T::RP};
    const UarResult r = confusion_and_uar(preds, truths);
    CHECK(r.uar == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(r.confusion(0, 0) == 2);
    CHECK(r.confusion(1, 0) == 1);
    CHECK(r.confusion(1, 1) == 1);

    const UarResult perfect = confusion_and_uar(truths, truths);
    CHECK(perfect.uar == 1.0);
    CHECK(perfect.confusion.diagonal().sum() == 4);
    CHECK(perfect.confusion.sum() == 4);
}

TEST_CASE("uar is invariant under consistent class relabeling") {
    using T = Technique;
    const std::vector<T> truths = {T::RP, T::RP, T::FK, T::FK, T::LRK, T::LRK};
    const std::vector<T> preds = {T::RP, T::FK, T::FK, T::FK, T::LRK, T::RP};
    const auto relabel = [](T t) {
        switch (t) {
        case T::RP: return T::HRK;
        case T::FK: return T::SBK;
        default: return T::RP;
        }
    };
    std::vector<T> truths2, preds2;
    for (auto t : truths) truths2.push_back(relabel(t));
    for (auto p : preds) preds2.push_back(relabel(p));
    CHECK(confusion_and_uar(preds, truths).uar ==
          doctest::Approx(confusion_and_uar(preds2, truths2).uar).epsilon(1e-12));
}

TEST_CASE("grade_mae forced arithmetic and level scaling") {
    const std::vector<double> truth = {0.0, 0.5, 1.0};
    CHECK(grade_mae(truth, truth).mae == 0.0);
    std::vector<double> off;
    for (double t : truth) off.push_back(t + 0.1);
    const GradeMae g = grade_mae(off, truth);
    CHECK(g.mae == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(g.mae_levels == doctest::Approx(1.2).epsilon(1e-12));
    // Macro averaging: a grade with many samples counts once.
    const std::vector<double> truth2 = {0.0, 0.0, 0.0, 1.0};
    const std::vector<double> pred2 = {0.2, 0.2, 0.2, 1.0};
    CHECK(grade_mae(pred2, truth2).mae == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("sqrt_psd forced values and reconstruction") {
    const Eigen::MatrixXd i3 = Eigen::MatrixXd::Identity(3, 3);
    CHECK((sqrt_psd(i3) - i3).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::MatrixXd d(2, 2);
    d << 4, 0, 0, 9;
    Eigen::MatrixXd expect(2, 2);
    expect << 2, 0, 0, 3;
    CHECK((sqrt_psd(d) - expect).cwiseAbs().maxCoeff() < 1e-12);

    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    Eigen::MatrixXd a(6, 6);
    for (int i = 0; i < 36; ++i) a.data()[i] = g(rng);
    const Eigen::MatrixXd m = a.transpose() * a;
    const Eigen::MatrixXd s = sqrt_psd(m);
    CHECK((s * s - m).norm() / m.norm() < 1e-8);
    CHECK((s - s.transpose()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("fid identities and symmetry") {
    const Eigen::MatrixXd a = gaussian_samples(200, 4, Eigen::VectorXd::Zero(4), 2);
    const Eigen::MatrixXd b =
        gaussian_samples(200, 4, Eigen::VectorXd::Constant(4, 1.0), 3);
    CHECK(std::abs(fid(a, a).fid) < 1e-8);
    CHECK(fid(a, b).fid == doctest::Approx(fid(b, a).fid).epsilon(1e-8));
    CHECK(fid(a, b).fid > 0.0);
}

TEST_CASE("fid is invariant under a common orthogonal transform") {
    const Eigen::MatrixXd a = gaussian_samples(300, 3, Eigen::VectorXd::Zero(3), 4);
    const Eigen::MatrixXd b =
        gaussian_samples(300, 3, Eigen::VectorXd::Constant(3, 0.5), 5);
    // Rotation in the (0,1) plane plus a flip of axis 2.
    Eigen::MatrixXd q(3, 3);
    const double c = std::cos(0.7), s = std::sin(0.7);
    q << c, -s, 0, s, c, 0, 0, 0, -1;
    const double before = fid(a, b).fid;
    const double after = fid((a * q.transpose()).eval(), (b * q.transpose()).eval()).fid;
    CHECK(before == doctest::Approx(after).epsilon(1e-6));
}

TEST_CASE("fid recovers the analytic Gaussian distance") {
    const int n = 10000;
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(2);
    const Eigen::MatrixXd a = gaussian_samples(n, 2, mu, 6);
    mu(0) = 3.0;
    const Eigen::MatrixXd b = gaussian_samples(n, 2, mu, 7);
    const FidResult r = fid(a, b);
    CHECK_FALSE(r.ridged);
    CHECK(std::abs(r.fid - 9.0) < 0.5);
}

TEST_CASE("fid ridges small groups and flags them") {
    const Eigen::MatrixXd a = gaussian_samples(4, 8, Eigen::VectorXd::Zero(8), 8);
    const Eigen::MatrixXd b = gaussian_samples(4, 8, Eigen::VectorXd::Zero(8), 9);
    CHECK(fid(a, b).ridged);
    CHECK_THROWS_AS((void)fid(a.topRows(1), b), Error);
}

TEST_CASE("evaluate_separability on a perfect head-like setup") {
    std::vector<Eigen::VectorXd> embeddings;
    std::vector<SampleMeta> labels;
    std::mt19937_64 rng(10);
    std::normal_distribution<double> g(0.0, 0.2);
    for (int cls = 0; cls < 2; ++cls) {
        for (int i = 0; i < 15; ++i) {
            Eigen::VectorXd z(4);
            z << (cls ? 2.0 : -2.0) + g(rng), g(rng), g(rng), g(rng);
            embeddings.push_back(z);
            SampleMeta meta;
            meta.technique = cls ? Technique::FK : Technique::RP;
            meta.grade_index = cls ? 10 : 2;
            labels.push_back(meta);
        }
    }
    const AttributeHead head = train_head(embeddings, labels);
    const SeparabilityReport rep = evaluate_separability(head, embeddings, labels);
    CHECK(rep.uar == 1.0);
    CHECK(rep.grade_mae < 0.1);
    CHECK(rep.grade_mae_levels == doctest::Approx(rep.grade_mae * 12).epsilon(1e-12));
}

TEST_CASE("pca plane case preserves pairwise distances") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    // Points in a 2D plane embedded in 6D via an orthonormal pair.
    Eigen::VectorXd u = Eigen::VectorXd::Zero(6), v = Eigen::VectorXd::Zero(6);
    u(0) = u(2) = std::sqrt(0.5);
    v(1) = v(3) = std::sqrt(0.5);
    std::vector<Eigen::VectorXd> pts;
    for (int i = 0; i < 40; ++i) pts.push_back(g(rng) * u + g(rng) * v);
    const Projection2d p = pca_project_2d(pts);
    CHECK(p.rank == 2);
    CHECK(p.explained_variance_ratio.sum() == doctest::Approx(1.0).epsilon(1e-9));
    for (int i = 0; i < 10; ++i) {
        for (int j = i + 1; j < 10; ++j) {
            const double orig = (pts[static_cast<std::size_t>(i)] -
                                 pts[static_cast<std::size_t>(j)])
                                    .norm();
            const double proj = (p.points.row(i) - p.points.row(j)).norm();
            CHECK(orig == doctest::Approx(proj).epsilon(1e-9));
        }
    }
}

TEST_CASE("pca separates planted clusters and reports degeneracy") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> g(0.0, 0.1);
    std::vector<Eigen::VectorXd> pts;
    for (int cls = 0; cls < 2; ++cls) {
        for (int i = 0; i < 25; ++i) {
            Eigen::VectorXd z(5);
            for (int k = 0; k < 5; ++k) z(k) = g(rng);
            z(0) += cls ? 5.0 : -5.0;
            pts.push_back(z);
        }
    }
    const Projection2d p = pca_project_2d(pts);
    const double c0 = p.points.topRows(25).col(0).mean();
    const double c1 = p.points.bottomRows(25).col(0).mean();
    double within = 0.0;
    for (int i = 0; i < 25; ++i) {
        within += std::pow(p.points(i, 0) - c0, 2) / 24.0;
    }
    CHECK(std::abs(c0 - c1) > 5.0 * std::sqrt(within));

    const std::vector<Eigen::VectorXd> identical(4, Eigen::VectorXd::Ones(3));
    CHECK_THROWS_AS((void)pca_project_2d(identical), Error);
    // Rank-1 data falls back to a single component.
    std::vector<Eigen::VectorXd> line;
    for (int i = 0; i < 6; ++i) line.push_back(i * Eigen::VectorXd::Ones(3));
    const Projection2d one = pca_project_2d(line);
    CHECK(one.rank == 1);
    CHECK(one.points.col(1).cwiseAbs().maxCoeff() == 0.0);
}
