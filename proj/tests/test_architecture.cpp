#include <gtest/gtest.h>

#include "covilearn/architecture.hpp"
#include "covilearn/errors.hpp"
#include "covilearn/executor.hpp"
#include "covilearn/parameters.hpp"
#include "support/oracles.hpp"

using namespace covilearn;

namespace {

std::size_t densenet121() { return oracle::densenet_backbone({6, 12, 24, 16}, 32, 64, 7, 128); }
std::size_t densenet169() { return oracle::densenet_backbone({6, 12, 32, 32}, 32, 64, 7, 128); }
std::size_t micro() { return oracle::densenet_backbone({2, 2}, 8, 16, 3, 32); }

}  // namespace

TEST(Counting, BackbonesMatchOracle) {
    EXPECT_EQ(build_backbone("densenet121").total_parameters(), densenet121());
    EXPECT_EQ(build_backbone("densenet169").total_parameters(), densenet169());
    EXPECT_EQ(build_backbone("resnet50").total_parameters(), oracle::resnet_backbone({3, 4, 6, 3}));
    EXPECT_EQ(build_backbone("resnet101").total_parameters(), oracle::resnet_backbone({3, 4, 23, 3}));
    EXPECT_EQ(build_backbone("micro").total_parameters(), micro());
}

TEST(Counting, KnownBackboneFigures) {
    EXPECT_EQ(densenet121(), 7037504u);
    EXPECT_EQ(densenet169(), 12642880u);
    EXPECT_EQ(oracle::resnet_backbone({3, 4, 6, 3}), 23587712u);
    EXPECT_EQ(oracle::resnet_backbone({3, 4, 23, 3}), 42658176u);
}

TEST(Counting, AssembledTableTotals) {
    const auto dnn3 = assemble_model(ModelVariant::parse("densenet121-gapdense"));
    EXPECT_EQ(dnn3.total_parameters(), 7103234u);
    EXPECT_EQ(dnn3.trainable_parameters(), 65730u);
    EXPECT_EQ(dnn3.frozen_parameters(), 7037504u);
    const auto dnn4 = assemble_model(ModelVariant::parse("densenet169-gapdense"));
    EXPECT_EQ(dnn4.total_parameters(), 12749570u);
    EXPECT_EQ(dnn4.trainable_parameters(), 106690u);
}

TEST(Counting, ResNetTotalsDifferFromReferenceFigures) {
    const auto dnn1 = assemble_model(ModelVariant::parse("dnn-i"));
    const auto dnn2 = assemble_model(ModelVariant::parse("dnn-ii"));
    EXPECT_EQ(dnn1.total_parameters(), oracle::resnet_backbone({3, 4, 6, 3}) + oracle::gap_dense_head(2048));
    EXPECT_EQ(dnn2.total_parameters(), oracle::resnet_backbone({3, 4, 23, 3}) + oracle::gap_dense_head(2048));
    // Known difference: the usual reference figures are 23,696,066 and 42,757,826.
    EXPECT_NE(dnn1.total_parameters(), 23696066u);
    EXPECT_NE(dnn2.total_parameters(), 42757826u);
    EXPECT_EQ(23696066u - oracle::resnet_backbone({3, 4, 6, 3}), 108354u);
    EXPECT_EQ(42757826u - oracle::resnet_backbone({3, 4, 23, 3}), 99650u);
}

TEST(Counting, Heads) {
    EXPECT_EQ(build_head(1024, HeadKind::GapDense).total_parameters(), 65730u);
    EXPECT_EQ(build_head(1664, HeadKind::GapDense).total_parameters(), 106690u);
    EXPECT_EQ(build_head(1024, HeadKind::Alg1Conv).total_parameters(), oracle::alg1_conv_head(1024, 7));
    EXPECT_EQ(assemble_model(ModelVariant::parse("micro")).total_parameters(),
              micro() + oracle::gap_dense_head(oracle::densenet_channels({2, 2}, 8, 16)));
    EXPECT_EQ(assemble_model(ModelVariant::parse("micro-alg1conv")).total_parameters(),
              micro() + oracle::alg1_conv_head(32, 8));
}

TEST(Counting, SingleDenseAndFreeze) {
    ArchitectureGraph g("t", Shape{3});
    g.dense("d", "input", 2, InitScheme::GlorotUniform);
    EXPECT_EQ(g.total_parameters(), 8u);
    EXPECT_EQ(g.trainable_parameters(), 8u);
    g.freeze_all();
    EXPECT_EQ(g.trainable_parameters(), 0u);
    EXPECT_EQ(g.total_parameters(), g.trainable_parameters() + g.frozen_parameters());
}

TEST(Shapes, DenseNetFeatureMapsAndOutputs) {
    EXPECT_EQ(build_backbone("densenet121").output().output_shape, (Shape{1024, 7, 7}));
    EXPECT_EQ(build_backbone("densenet169").output().output_shape, (Shape{1664, 7, 7}));
    EXPECT_EQ(build_backbone("resnet50").output().output_shape, (Shape{2048, 7, 7}));
    EXPECT_EQ(build_backbone("micro").output().output_shape, (Shape{32, 8, 8}));
    for (const char* v : {"dnn-i", "dnn-ii", "dnn-iii", "dnn-iv", "micro", "densenet121-alg1conv"}) {
        const auto g = assemble_model(ModelVariant::parse(v));
        EXPECT_EQ(g.output_shape(1), (Shape{1, 2})) << v;
        EXPECT_EQ(g.output_shape(5), (Shape{5, 2})) << v;
    }
}

TEST(Shapes, DenseBlockFeatureReuse) {
    const auto g = build_backbone("densenet121");
    const std::size_t c0[] = {64, 128, 256, 512};
    const std::size_t layers[] = {6, 12, 24, 16};
    for (std::size_t b = 0; b < 4; ++b)
        for (std::size_t l = 0; l < layers[b]; ++l) {
            const auto name = "conv" + std::to_string(b + 2) + "_block" + std::to_string(l + 1) + "_1_conv";
            EXPECT_EQ(g.layer(name).params[0].shape[1], c0[b] + l * 32) << name;
        }
}

TEST(Shapes, DeclaredShapesMatchExecution) {
    const auto g = assemble_model(ModelVariant::parse("micro-alg1conv"));
    const auto params = initialize_parameters(g, 3);
    std::mt19937_64 rng(4);
    const auto x = oracle::random_tensor({2, 3, 32, 32}, rng, 0, 1);
    for (const auto& layer : g.layers()) {
        const auto y = forward(g, params, x, {}, layer.name);
        Shape expected{2};
        expected.insert(expected.end(), layer.output_shape.begin(), layer.output_shape.end());
        EXPECT_EQ(y.shape(), expected) << layer.name;
    }
}

TEST(Freeze, BackboneFrozenHeadTrainable) {
    const auto g = assemble_model(ModelVariant::parse("densenet121"));
    for (const auto& layer : g.layers()) EXPECT_EQ(layer.frozen, layer.name.rfind("head_", 0) != 0) << layer.name;
    ASSERT_TRUE(g.backbone_output().has_value());
    EXPECT_EQ(*g.backbone_output(), "relu");
}

TEST(Variants, ParsingAndErrors) {
    EXPECT_EQ(ModelVariant::parse("dnn-iii").name(), "densenet121-gapdense");
    EXPECT_EQ(ModelVariant::parse("densenet169").tag(), "DNN-IV");
    EXPECT_EQ(ModelVariant::parse("resnet50-alg1conv").head, HeadKind::Alg1Conv);
    EXPECT_EQ(ModelVariant::parse("micro").tag(), "micro");
    EXPECT_THROW(ModelVariant::parse("vgg16"), ArgumentError);
    EXPECT_THROW(ModelVariant::parse("densenet121-mlp"), ArgumentError);
    EXPECT_THROW(build_backbone("alexnet"), ArgumentError);
    EXPECT_THROW(parse_head_kind("transformer"), ArgumentError);
    EXPECT_THROW(build_head(0, HeadKind::GapDense), ArgumentError);
}

TEST(Graph, DuplicateNamesRejected) {
    ArchitectureGraph g("t", Shape{3, 4, 4});
    g.relu("r", "input");
    EXPECT_THROW(g.relu("r", "input"), ArgumentError);
    EXPECT_THROW(g.relu("s", "missing"), ArgumentError);
}

TEST(Table, ReportsGroupedTotals) {
    EXPECT_EQ(group_thousands(7103234), "7,103,234");
    EXPECT_EQ(group_thousands(0), "0");
    EXPECT_EQ(group_thousands(999), "999");
    EXPECT_EQ(group_thousands(1000), "1,000");
    const auto table = format_parameter_table(assemble_model(ModelVariant::parse("densenet121-gapdense")));
    EXPECT_NE(table.find("total parameters: 7,103,234"), std::string::npos);
    EXPECT_NE(table.find("trainable parameters: 65,730"), std::string::npos);
    EXPECT_NE(table.find("conv2_block1_1_conv"), std::string::npos);
}

TEST(Init, DeterministicAndSchemeBounds) {
    const auto g = assemble_model(ModelVariant::parse("micro"));
    const auto a = initialize_parameters(g, 9), b = initialize_parameters(g, 9), c = initialize_parameters(g, 10);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    EXPECT_EQ(a.scalar_count(), g.total_parameters());
    const double he = std::sqrt(6.0 / 32.0);
    for (double v : a.at("head_dense/kernel").data()) EXPECT_LE(std::abs(v), he);
    const double glorot = std::sqrt(6.0 / (64.0 + 2.0));
    for (double v : a.at("head_logits/kernel").data()) EXPECT_LE(std::abs(v), glorot);
    for (double v : a.at("conv1_bn/gamma").data()) EXPECT_EQ(v, 1.0);
    for (double v : a.at("conv1_bn/moving_variance").data()) EXPECT_EQ(v, 1.0);
    for (double v : a.at("head_dense/bias").data()) EXPECT_EQ(v, 0.0);
}
