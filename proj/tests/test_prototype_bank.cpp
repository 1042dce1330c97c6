#include "fsrl/errors.hpp"
#include "fsrl/kmeans.hpp"
#include "fsrl/prototype_bank.hpp"
#include "fsrl/rng.hpp"

#include "temp_dir.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <limits>

using namespace fsrl;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(v.size()));
    int i = 0;
    for (double x : v) r[i++] = x;
    return r;
}

// Minimum-SSE split of the rows into two nonempty groups, by enumeration.
Eigen::MatrixXd best_two_partition(const Eigen::MatrixXd& pts) {
    const int n = static_cast<int>(pts.rows());
    double best = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd best_centers;
    for (int mask = 1; mask < (1 << n) - 1; ++mask) {
        Eigen::MatrixXd c = Eigen::MatrixXd::Zero(2, pts.cols());
        int count[2] = {0, 0};
        for (int i = 0; i < n; ++i) {
            const int g = (mask >> i) & 1;
            c.row(g) += pts.row(i);
            ++count[g];
        }
        c.row(0) /= count[0];
        c.row(1) /= count[1];
        double sse = 0.0;
        for (int i = 0; i < n; ++i) sse += (pts.row(i) - c.row((mask >> i) & 1)).squaredNorm();
        if (sse < best) {
            best = sse;
            best_centers = c;
        }
    }
    return best_centers;
}

}  // namespace

TEST(PrototypeBank, PushOnce) {
    PrototypeBank bank(3, 2, 2);
    bank.push(1, vec({1, 2}), false);
    EXPECT_EQ(bank.size(1), 1);
    EXPECT_EQ(bank.size(0), 0);
    EXPECT_EQ(bank.capacity(), 4);
}

TEST(PrototypeBank, EvictsOldestPastCapacity) {
    const int k = 3;
    PrototypeBank bank(1, k, 1);
    for (int i = 0; i <= 2 * k; ++i) bank.push(0, vec({static_cast<double>(i)}), false);
    ASSERT_EQ(bank.size(0), 2 * k);
    for (const auto& e : bank.queue(0)) EXPECT_NE(e[0], 0.0);
    EXPECT_EQ(bank.queue(0).front()[0], 1.0);
    EXPECT_EQ(bank.accepted(0), static_cast<std::uint64_t>(2 * k + 1));
}

TEST(PrototypeBank, AugmentedPushLeavesBankUnchanged) {
    PrototypeBank bank(2, 1, 2);
    bank.push(0, vec({1, 1}), false);
    const PrototypeBank before = bank;
    bank.push(0, vec({5, 5}), true);
    bank.push(1, vec({5, 5}), true);
    EXPECT_TRUE(bank == before);
    EXPECT_EQ(bank.accepted(1), 0u);
}

TEST(PrototypeBank, RejectsBadInput) {
    PrototypeBank bank(2, 1, 2);
    EXPECT_THROW(bank.push(0, vec({1, 2, 3}), false), ValidationError);
    EXPECT_THROW(bank.push(2, vec({1, 2}), false), ValidationError);
    EXPECT_THROW(bank.centers(0, 0), ValidationError);
}

TEST(PrototypeBank, RandomSequencesMatchReplay) {
    Rng rng(11);
    for (int t = 0; t < 1000; ++t) {
        const int c = 1 + static_cast<int>(rng.index(4));
        const int k = 1 + static_cast<int>(rng.index(5));
        PrototypeBank bank(c, k, 2);
        std::vector<std::vector<Eigen::VectorXd>> replay(static_cast<std::size_t>(c));
        const int pushes = static_cast<int>(rng.index(40));
        for (int p = 0; p < pushes; ++p) {
            const int cat = static_cast<int>(rng.index(static_cast<std::uint64_t>(c)));
            const bool aug = rng.bernoulli(0.3);
            const Eigen::VectorXd e = vec({rng.normal(), static_cast<double>(p)});
            bank.push(cat, e, aug);
            if (!aug) replay[static_cast<std::size_t>(cat)].push_back(e);
        }
        for (int cat = 0; cat < c; ++cat) {
            auto& list = replay[static_cast<std::size_t>(cat)];
            const std::size_t keep = std::min<std::size_t>(list.size(), static_cast<std::size_t>(2 * k));
            std::vector<Eigen::VectorXd> tail(list.end() - static_cast<std::ptrdiff_t>(keep), list.end());
            ASSERT_LE(bank.size(cat), 2 * k);
            ASSERT_EQ(static_cast<std::size_t>(bank.size(cat)), tail.size());
            for (std::size_t i = 0; i < tail.size(); ++i) EXPECT_EQ(bank.queue(cat)[i], tail[i]);
        }
    }
}

TEST(PrototypeCenters, MeanOfTwo) {
    PrototypeBank bank(1, 1, 2);
    bank.push(0, vec({1, 1}), false);
    bank.push(0, vec({3, 3}), false);
    const auto pc = bank.centers(1, 0);
    ASSERT_EQ(pc.centers.rows(), 1);
    EXPECT_EQ(pc.centers(0, 0), 2.0);
    EXPECT_EQ(pc.centers(0, 1), 2.0);
    EXPECT_EQ(pc.labels, std::vector<int>{0});
}

TEST(PrototypeCenters, SingleClusterIsMeanAndMatchesKmeans) {
    Rng rng(12);
    for (int t = 0; t < 100; ++t) {
        PrototypeBank bank(3, 4, 5);
        for (int p = 0; p < 20; ++p) {
            Eigen::VectorXd e(5);
            for (int j = 0; j < 5; ++j) e[j] = rng.normal();
            bank.push(static_cast<int>(rng.index(3)), e, false);
        }
        const auto pc = bank.centers(1, 3);
        int row = 0;
        for (int cat = 0; cat < 3; ++cat) {
            if (bank.size(cat) == 0) continue;
            Eigen::MatrixXd pts(bank.size(cat), 5);
            Eigen::VectorXd mean = Eigen::VectorXd::Zero(5);
            for (int i = 0; i < bank.size(cat); ++i) {
                pts.row(i) = bank.queue(cat)[static_cast<std::size_t>(i)].transpose();
                mean += bank.queue(cat)[static_cast<std::size_t>(i)];
            }
            mean /= bank.size(cat);
            EXPECT_EQ(pc.labels[static_cast<std::size_t>(row)], cat);
            EXPECT_LE((pc.centers.row(row).transpose() - mean).cwiseAbs().maxCoeff(), 1e-12);
            EXPECT_LE((pc.centers.row(row) - kmeans(pts, 1, 0).centers.row(0)).cwiseAbs().maxCoeff(), 1e-12);
            ++row;
        }
        EXPECT_EQ(pc.centers.rows(), row);
    }
}

TEST(PrototypeCenters, TwoClustersMatchExhaustivePartition) {
    PrototypeBank bank(1, 2, 2);
    const double pts[4][2] = {{0, 0}, {0, 1}, {8, 8}, {9, 8}};
    Eigen::MatrixXd m(4, 2);
    for (int i = 0; i < 4; ++i) {
        bank.push(0, vec({pts[i][0], pts[i][1]}), false);
        m(i, 0) = pts[i][0];
        m(i, 1) = pts[i][1];
    }
    Eigen::MatrixXd got = bank.centers(2, 5).centers;
    Eigen::MatrixXd want = best_two_partition(m);
    auto order = [](Eigen::MatrixXd& c) {
        if (c(0, 0) > c(1, 0)) c.row(0).swap(c.row(1));
    };
    order(got);
    order(want);
    EXPECT_LE((got - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PrototypeCenters, SparseCategoriesFallBackAndEmptyOmitted) {
    PrototypeBank bank(3, 3, 1);
    bank.push(2, vec({4}), false);
    bank.push(2, vec({6}), false);
    const auto pc = bank.centers(3, 0);
    ASSERT_EQ(pc.centers.rows(), 1);
    EXPECT_EQ(pc.labels, std::vector<int>{2});
    EXPECT_EQ(pc.centers(0, 0), 5.0);
    EXPECT_EQ(PrototypeBank(2, 1, 3).centers(1, 0).centers.rows(), 0);
}

TEST(PrototypeCenters, EntriesListEverything) {
    PrototypeBank bank(2, 2, 1);
    bank.push(1, vec({1}), false);
    bank.push(0, vec({2}), false);
    bank.push(1, vec({3}), false);
    const auto pc = bank.entries();
    EXPECT_EQ(pc.labels, (std::vector<int>{0, 1, 1}));
    EXPECT_EQ(pc.centers(0, 0), 2.0);
    EXPECT_EQ(pc.centers(2, 0), 3.0);
}

TEST(PrototypeBank, CheckpointRoundTrip) {
    TempDir dir("bank");
    Rng rng(13);
    PrototypeBank bank(3, 2, 4);
    for (int p = 0; p < 15; ++p) {
        Eigen::VectorXd e(4);
        for (int j = 0; j < 4; ++j) e[j] = rng.normal();
        bank.push(static_cast<int>(rng.index(2)), e, false);
    }
    bank.save(dir / "bank");
    const PrototypeBank back = PrototypeBank::load(dir / "bank");
    EXPECT_TRUE(back == bank);
    EXPECT_EQ(back.accepted(0), bank.accepted(0));
    EXPECT_EQ(back.size(2), 0);
}
