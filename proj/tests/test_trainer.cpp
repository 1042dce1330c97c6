#include "fsrl/errors.hpp"
#include "fsrl/trainer.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace fsrl;

namespace {

DatasetConfig small_data() {
    DatasetConfig d;
    d.base_per_category = 12;
    d.test_per_category = 8;
    d.seed = 3;
    return d;
}

TrainConfig small_train() {
    TrainConfig c;
    c.base_iterations = 120;
    c.iterations = 15;
    return c;
}

std::vector<std::string> metric_lines(const FineTuneResult& r) {
    std::vector<std::string> lines;
    for (const auto& m : r.metrics.iterations) lines.push_back(metrics_line(m));
    return lines;
}

class TrainerTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dataset_ = new Dataset(generate_dataset(small_data()));
        base_ = new BaseTrainResult(train_base(small_train(), *dataset_));
        zeta_ = new KnowledgeMatrix(dataset_knowledge(*dataset_, KnowledgeCase::Mixed, &base_->params, 5, 0));
    }
    static void TearDownTestSuite() {
        delete zeta_;
        delete base_;
        delete dataset_;
    }
    static const Dataset& data() { return *dataset_; }
    static const ToyModelParams& base() { return base_->params; }
    static const KnowledgeMatrix& zeta() { return *zeta_; }

    static Dataset* dataset_;
    static BaseTrainResult* base_;
    static KnowledgeMatrix* zeta_;
};

Dataset* TrainerTest::dataset_ = nullptr;
BaseTrainResult* TrainerTest::base_ = nullptr;
KnowledgeMatrix* TrainerTest::zeta_ = nullptr;

}  // namespace

TEST(TrainConfig, DefaultsAndValidation) {
    const TrainConfig c;
    EXPECT_EQ(c.tau, 0.2);
    EXPECT_EQ(c.epsilon, 0.05);
    EXPECT_EQ(c.threshold, 0.8);
    EXPECT_EQ(c.k_e, 3);
    EXPECT_EQ(c.bank_clusters, 1);
    EXPECT_EQ(c.knowledge_case, 3);
    EXPECT_EQ(c.knowledge_clusters, 5);
    EXPECT_EQ(c.lambdas.cls, 1.0);
    EXPECT_EQ(c.lambdas.reg, 1.0);
    EXPECT_EQ(c.lambdas.ccl, 1.0);
    EXPECT_NO_THROW(c.validate());
    TrainConfig bad = c;
    bad.epsilon = 1.5;
    EXPECT_THROW(bad.validate(), ValidationError);
    bad = c;
    bad.lambdas.ccl = -1.0;
    EXPECT_THROW(bad.validate(), ValidationError);
    bad = c;
    bad.threshold = 1.0;
    EXPECT_THROW(bad.validate(), ValidationError);
    bad = c;
    bad.tau = 0.0;
    EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(TrainConfig, JsonRoundTripAndKeyErrors) {
    TrainConfig c;
    c.tau = 0.35;
    c.use_ccl = false;
    c.seed_data = 12;
    c.stage = "base";
    const auto j = config_to_json(c);
    EXPECT_EQ(j.size(), config_keys().size());
    const TrainConfig back = config_from_json(j);
    EXPECT_EQ(config_to_json(back), j);
    EXPECT_THROW(config_from_json(nlohmann::json{{"ccl.temperature", 0.1}}), ValidationError);
    EXPECT_THROW(config_from_json(nlohmann::json{{"ccl.tau", "warm"}}), ValidationError);
    EXPECT_THROW(config_from_json(nlohmann::json{{"k_shot", 2.5}}), ValidationError);

    TrainConfig s;
    set_config_value(s, "augment.epsilon", "0.25");
    set_config_value(s, "ablation.use_clustering", "false");
    set_config_value(s, "stage", "base");
    EXPECT_EQ(s.epsilon, 0.25);
    EXPECT_FALSE(s.use_clustering);
    EXPECT_EQ(s.stage, "base");
    EXPECT_THROW(set_config_value(s, "nope", "1"), ValidationError);
}

TEST(Separability, MatchesPairwiseOracle) {
    Rng rng(1);
    for (int t = 0; t < 50; ++t) {
        const int n = 3 + static_cast<int>(rng.index(20));
        Eigen::MatrixXd z(n, 5);
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
        std::vector<int> l(static_cast<std::size_t>(n));
        for (auto& x : l) x = static_cast<int>(rng.index(3));
        EXPECT_NEAR(separability_margin(z, l), oracle::separability(z, l), 1e-12);
    }
}

TEST(Evaluate, RandomInitIsNearChance) {
    const Dataset ds = generate_dataset(small_data());
    const int inits = 40;
    std::vector<double> acc;
    for (int s = 0; s < inits; ++s) {
        TrainConfig c;
        Rng rng(static_cast<std::uint64_t>(s) + 1000);
        acc.push_back(evaluate(init_params(c.model_config(ds.config), rng), ds).novel_accuracy);
    }
    double mean = 0.0, var = 0.0;
    for (double a : acc) mean += a / inits;
    for (double a : acc) var += (a - mean) * (a - mean) / (inits - 1);
    const double chance = 1.0 / ds.num_categories();
    EXPECT_LT(std::abs(mean - chance), 3.0 * std::sqrt(var / inits) + 1e-9);
}

TEST(Evaluate, MemorizedSetScoresOne) {
    // Dark images are category 0, bright ones category 1; hand-set weights tell them apart.
    ModelConfig cfg;
    cfg.image_size = 6;
    cfg.conv1_channels = 1;
    cfg.conv2_channels = 1;
    cfg.num_categories = 2;
    cfg.projection_dim = 2;
    ToyModelParams p(cfg);
    p.group(ParamGroup::Conv1Weight)[4] = 1.0;  // centre tap, channel 0
    p.group(ParamGroup::Conv1Bias)[0] = 0.5;
    p.group(ParamGroup::Conv2Weight)[4] = 1.0;
    p.group(ParamGroup::ClassifierWeight)[1] = 10.0;
    p.group(ParamGroup::ClassifierBias)[1] = -5.0;
    p.group(ParamGroup::Projection)[0] = 1.0;
    p.group(ParamGroup::Projection)[1] = 0.5;

    Dataset ds;
    ds.config.num_base = 1;
    ds.config.num_novel = 1;
    ds.config.image_size = 6;
    ds.names = {"dark", "bright"};
    Rng rng(2);
    for (int i = 0; i < 20; ++i) {
        ToyImage s{Image(6, 6), i % 2, Split::Test, {}};
        for (auto& px : s.image.pixels) px = static_cast<std::uint8_t>(s.label ? 200 + rng.index(56) : rng.index(56));
        ds.test.push_back(s);
    }
    const EvalMetrics e = evaluate(p, ds);
    EXPECT_EQ(e.overall_accuracy, 1.0);
    EXPECT_EQ(e.novel_accuracy, 1.0);
    EXPECT_EQ(e.base_accuracy, 1.0);
}

TEST(TrainBase, SingleCategoryIsTriviallySeparable) {
    DatasetConfig d = small_data();
    d.num_base = 1;
    d.num_novel = 1;
    const Dataset ds = generate_dataset(d);
    TrainConfig c = small_train();
    c.base_iterations = 10;
    EXPECT_GE(train_base(c, ds).train_accuracy, 0.99);
}

TEST(TrainBase, EmptyBaseSplitIsAnError) {
    Dataset ds = generate_dataset(small_data());
    ds.base.clear();
    EXPECT_THROW(train_base(small_train(), ds), ValidationError);
}

TEST_F(TrainerTest, BaseTrainingIsDeterministicAndFinite) {
    const BaseTrainResult again = train_base(small_train(), data());
    EXPECT_TRUE(again.params == base());
    EXPECT_EQ(again.losses, base_->losses);
    EXPECT_EQ(static_cast<int>(again.losses.size()), small_train().base_iterations);
    for (double l : again.losses) EXPECT_TRUE(std::isfinite(l));
    EXPECT_GT(base_->train_accuracy, 1.0 / 8.0);
}

TEST_F(TrainerTest, FineTuneIsDeterministic) {
    const TrainConfig c = small_train();
    const FineTuneResult a = fine_tune(base(), c, data(), zeta());
    const FineTuneResult b = fine_tune(base(), c, data(), zeta());
    EXPECT_TRUE(a.params == b.params);
    EXPECT_EQ(metric_lines(a), metric_lines(b));
    EXPECT_TRUE(a.bank == b.bank);
    EXPECT_EQ(static_cast<int>(a.metrics.iterations.size()), c.iterations);
    for (int i = 0; i < c.iterations; ++i) EXPECT_EQ(a.metrics.iterations[static_cast<std::size_t>(i)].iteration, i);
}

TEST_F(TrainerTest, ZeroEpsilonNeverAugments) {
    TrainConfig c = small_train();
    c.epsilon = 0.0;
    const FineTuneResult r = fine_tune(base(), c, data(), zeta());
    for (const auto& m : r.metrics.iterations) {
        EXPECT_EQ(m.augmented, 0);
        EXPECT_EQ(m.erased_pixels, 0);
    }
}

TEST_F(TrainerTest, BankNeverReceivesAugmentedSamples) {
    TrainConfig c = small_train();
    c.epsilon = 0.5;
    const FineTuneResult r = fine_tune(base(), c, data(), zeta());
    std::uint64_t accepted = 0;
    int augmented = 0;
    for (const auto& m : r.metrics.iterations) {
        EXPECT_EQ(m.bank_accepted, m.batch_size - m.augmented);
        accepted += static_cast<std::uint64_t>(m.bank_accepted);
        augmented += m.augmented;
    }
    EXPECT_GT(augmented, 0);
    std::uint64_t bank_total = 0;
    for (int cat = 0; cat < data().num_categories(); ++cat) bank_total += r.bank.accepted(cat);
    EXPECT_EQ(bank_total, accepted);
}

TEST_F(TrainerTest, DisabledContrastiveTermIsInert) {
    TrainConfig off = small_train();
    off.use_ccl = false;
    TrainConfig off_other = off;
    off_other.tau = 0.9;
    off_other.lambdas.ccl = 7.0;
    off_other.bank_clusters = 2;
    const FineTuneResult a = fine_tune(base(), off, data(), zeta());
    const FineTuneResult b = fine_tune(base(), off_other, data(), zeta());
    EXPECT_TRUE(a.params == b.params);
    for (std::size_t i = 0; i < a.metrics.iterations.size(); ++i) {
        EXPECT_EQ(a.metrics.iterations[i].loss.parts.cls, b.metrics.iterations[i].loss.parts.cls);
        EXPECT_EQ(a.metrics.iterations[i].loss.parts.ccl, 0.0);
    }

    TrainConfig zero_weight = small_train();
    zero_weight.lambdas.ccl = 0.0;
    const FineTuneResult z = fine_tune(base(), zero_weight, data(), zeta());
    EXPECT_TRUE(z.params == a.params);
}

TEST_F(TrainerTest, NoKnowledgeMatrixEqualsAllOnes) {
    TrainConfig no_k = small_train();
    no_k.use_knowledge_matrix = false;
    no_k.epsilon = 0.3;
    TrainConfig ones = small_train();
    ones.epsilon = 0.3;
    const FineTuneResult a = fine_tune(base(), no_k, data(), zeta());
    const FineTuneResult b = fine_tune(base(), ones, data(), KnowledgeMatrix::all_ones(zeta().category_names()));
    EXPECT_TRUE(a.params == b.params);
    EXPECT_EQ(metric_lines(a), metric_lines(b));
}

TEST_F(TrainerTest, AlwaysAugmentingKeepsAugmentedOutOfTheBank) {
    TrainConfig high = small_train();
    high.epsilon = 1.0;
    high.threshold = std::nextafter(1.0, 0.0);
    TrainConfig low = high;
    low.threshold = 0.5;
    const FineTuneResult h = fine_tune(base(), high, data(), zeta());
    const FineTuneResult l = fine_tune(base(), low, data(), zeta());
    for (const auto& m : h.metrics.iterations) {
        EXPECT_EQ(m.augmented, m.batch_size);
        EXPECT_EQ(m.bank_accepted, 0);
    }
    // Same parameters and batch on the first step: a higher threshold erases a subset.
    EXPECT_LE(h.metrics.iterations.front().erased_pixels, l.metrics.iterations.front().erased_pixels);
    EXPECT_GT(l.metrics.iterations.front().erased_pixels, 0);
}

TEST_F(TrainerTest, RandomMaskBaselineErases) {
    TrainConfig c = small_train();
    c.epsilon = 1.0;
    c.use_random_mask_baseline = true;
    const FineTuneResult r = fine_tune(base(), c, data(), zeta());
    for (const auto& m : r.metrics.iterations) EXPECT_GT(m.erased_pixels, 0);
}

TEST_F(TrainerTest, RejectsMismatchedInputs) {
    const KnowledgeMatrix small = KnowledgeMatrix::all_ones({"a", "b"});
    EXPECT_THROW(fine_tune(base(), small_train(), data(), small), ValidationError);
    TrainConfig c = small_train();
    c.k_shot = 2;
    EXPECT_THROW(fine_tune(base(), c, data(), zeta()), ValidationError);
}

TEST_F(TrainerTest, EvaluateSeparabilityUsesProjectedEmbeddings) {
    const EvalMetrics e = evaluate(base(), data());
    Eigen::MatrixXd z(static_cast<Eigen::Index>(data().test.size()), base().config.projection_dim);
    std::vector<int> labels;
    const Eigen::MatrixXd w = base().projection_weights();
    for (std::size_t i = 0; i < data().test.size(); ++i) {
        z.row(static_cast<Eigen::Index>(i)) = (w * forward(base(), data().test[i].image).pooled).transpose();
        labels.push_back(data().test[i].label);
    }
    EXPECT_NEAR(e.separability, oracle::separability(z, labels), 1e-12);
    for (double a : e.per_class_accuracy) {
        EXPECT_GE(a, 0.0);
        EXPECT_LE(a, 1.0);
    }
}

TEST_F(TrainerTest, PoolTakesFirstShots) {
    for (int c = 0; c < data().num_categories(); ++c) {
        const auto pool = fine_tune_pool(data(), 5, c);
        ASSERT_EQ(pool.size(), 5u);
        for (const auto* s : pool) {
            EXPECT_EQ(s->label, c);
            EXPECT_EQ(s->split, data().is_novel(c) ? Split::Novel : Split::Base);
        }
    }
}

TEST_F(TrainerTest, LabelKnowledgeMatchesDirectBuild) {
    const KnowledgeMatrix z = dataset_knowledge(data(), KnowledgeCase::Label, nullptr, 5, 0);
    for (int i = 0; i < z.size(); ++i)
        for (int j = 0; j < z.size(); ++j)
            if (i != j)
                EXPECT_NEAR(z(i, j), label_similarity(data().attributes[static_cast<std::size_t>(i)],
                                                      data().attributes[static_cast<std::size_t>(j)]),
                            1e-15);
    EXPECT_THROW(dataset_knowledge(data(), KnowledgeCase::Mixed, nullptr, 5, 0), ValidationError);
}

TEST(Metrics, LineIsJsonWithAllFields) {
    IterationMetrics m;
    m.iteration = 3;
    m.loss = total_loss({0, 1.5, 0, 0.25});
    m.batch_size = 12;
    m.augmented = 1;
    m.erased_pixels = 9;
    const auto j = nlohmann::json::parse(metrics_line(m));
    EXPECT_EQ(j["iteration"], 3);
    EXPECT_EQ(j["total"], 1.75);
    EXPECT_EQ(j["erased_pixels"], 9);
    EXPECT_EQ(j["batch"], 12);
}
