#include "lgn/model.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace lgn;

namespace {

std::vector<Frame<double>> frames(const ModelDims& d, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Frame<double>> out;
  for (int i = 0; i < count; ++i) {
    auto f = lgn::testing::random_tensor(d.frame_shape(), rng, 0.5);
    f.data = f.data.cwiseMax(-1.0).cwiseMin(1.0);
    out.push_back(f);
  }
  return out;
}

}  // namespace

TEST(Variant, NamesRoundTrip) {
  for (Variant v : {Variant::lgn_net, Variant::lgn_st, Variant::loc_net, Variant::glo_net}) {
    EXPECT_EQ(parse_variant(to_string(v)), v);
  }
  EXPECT_THROW(parse_variant("fancy_net"), UserError);
  EXPECT_FALSE(has_memory(Variant::loc_net));
  EXPECT_FALSE(has_stp(Variant::glo_net));
  EXPECT_EQ(cell_kind(Variant::lgn_net), stlstm::CellKind::st_lstm);
  EXPECT_EQ(cell_kind(Variant::lgn_st), stlstm::CellKind::conv_lstm);
}

TEST(Model, PredictionShapesPerVariant) {
  const ModelDims d = ModelDims::toy();
  const auto pool = memory::init_pool<double>(d.memory_size, d.feature_dim, 1);
  const auto in = frames(d, d.inputs, 2);
  for (Variant v : {Variant::lgn_net, Variant::lgn_st, Variant::loc_net, Variant::glo_net}) {
    const Model<double> model(d, v, 3);
    const auto out = model.predict_next_frame(in, pool);
    EXPECT_EQ(out.predicted.shape, d.frame_shape()) << to_string(v);
    EXPECT_LE(out.predicted.data.cwiseAbs().maxCoeff(), 1.0);
    EXPECT_EQ(out.queries.has_value(), has_memory(v));
    EXPECT_EQ(out.f_loc.data.size() > 0, has_stp(v));
    if (out.queries) {
      EXPECT_EQ(out.queries->count(), d.lat_size() * d.lat_size());
      EXPECT_LT((out.queries->queries.colwise().norm().array() - 1.0).abs().maxCoeff(), 1e-9);
      EXPECT_EQ(out.f_glo.shape, (Shape{d.feature_dim, d.lat_size(), d.lat_size()}));
    }
  }
}

TEST(Model, SameSeedSameParameters) {
  const ModelDims d = ModelDims::toy();
  const Model<double> a(d, Variant::lgn_net, 5), b(d, Variant::lgn_net, 5), c(d, Variant::lgn_net, 6);
  ASSERT_EQ(a.params().names(), b.params().names());
  bool all_equal = true, any_diff = false;
  for (const auto& n : a.params().names()) {
    all_equal &= a.params().at(n).value == b.params().at(n).value;
    any_diff |= a.params().at(n).value != c.params().at(n).value;
  }
  EXPECT_TRUE(all_equal);
  EXPECT_TRUE(any_diff);
}

TEST(Model, RejectsForeignParameters) {
  const ModelDims d = ModelDims::toy();
  auto ps = Model<double>::make_params(d, Variant::loc_net, 1);
  EXPECT_THROW(Model<double>(d, Variant::lgn_net, ps), UserError);
  EXPECT_NO_THROW(Model<double>(d, Variant::loc_net, ps));
}

TEST(Model, PoolDimensionMustMatch) {
  const ModelDims d = ModelDims::toy();
  const Model<double> model(d, Variant::lgn_net, 1);
  const auto bad = memory::init_pool<double>(d.memory_size, d.feature_dim + 1, 1);
  EXPECT_THROW(model.predict_next_frame(frames(d, d.inputs, 1), bad), UserError);
}

TEST(Model, WindowLossPartsAreConsistent) {
  const ModelDims d = ModelDims::toy();
  const Model<double> model(d, Variant::lgn_net, 7);
  const auto pool = memory::init_pool<double>(d.memory_size, d.feature_dim, 8);
  const auto in = frames(d, d.inputs + 1, 9);
  Tape<double> t;
  Binding<double> bind(t, model.params());
  std::vector<Var> fs;
  for (int i = 0; i < d.inputs; ++i) fs.push_back(t.constant(in[i]));
  const LossWeights w{10.0, 5.0, 1.0};
  const auto wl = model.window_loss(bind, std::span<const Var>(fs), t.constant(in.back()),
                                    t.constant(pool.prototypes, Shape{d.feature_dim, 1, d.memory_size}), w);
  const double expected = t.scalar(wl.intensity) + 10.0 * t.scalar(wl.compactness) + 5.0 * t.scalar(wl.separateness);
  EXPECT_NEAR(t.scalar(wl.total), expected, 1e-10 * expected);
  const auto pred = model.predict_next_frame(std::span<const Frame<double>>(in.data(), d.inputs), pool);
  EXPECT_NEAR(t.scalar(wl.intensity), losses::intensity_loss(pred.predicted, in.back()), 1e-10);
}

TEST(Model, EndToEndGradients) {
  const ModelDims d = ModelDims::toy();
  Model<double> model(d, Variant::lgn_net, 11);
  const auto pool = memory::init_pool<double>(d.memory_size, d.feature_dim, 12);
  const auto in = frames(d, d.inputs + 1, 13);
  const LossWeights w{0.1, 0.1, 1.0};
  const auto r = lgn::testing::check_param_grads(model.params(), [&](Tape<double>& t, ParameterSet<double>& p) {
    Binding<double> bind(t, p);
    std::vector<Var> fs;
    for (int i = 0; i < d.inputs; ++i) fs.push_back(t.constant(in[i]));
    return model.window_loss(bind, std::span<const Var>(fs), t.constant(in.back()),
                             t.constant(pool.prototypes, Shape{d.feature_dim, 1, d.memory_size}), w)
        .total;
  }, 2);
  EXPECT_LT(r.max_rel, 1e-3) << r.worst;
}
