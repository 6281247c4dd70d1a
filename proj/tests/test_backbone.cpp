#include "lgn/backbone.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace lgn;

namespace {

std::vector<Frame<double>> random_frames(const ModelDims& d, int count, std::mt19937_64& rng) {
  std::vector<Frame<double>> out;
  for (int i = 0; i < count; ++i) out.push_back(lgn::testing::random_tensor(d.frame_shape(), rng, 0.5));
  return out;
}

}  // namespace

TEST(ModelDims, ValidateRejectsBadSizes) {
  ModelDims d = ModelDims::toy();
  EXPECT_NO_THROW(d.validate());
  d.input_size = 20;
  EXPECT_THROW(d.validate(), UserError);
  d = ModelDims::toy();
  d.cell_kernel = 4;
  EXPECT_THROW(d.validate(), UserError);
  d = ModelDims::toy();
  d.memory_size = 1;
  EXPECT_THROW(d.validate(), UserError);
}

TEST(ModelDims, DefaultResolutionsFollowTheArchitecture) {
  const ModelDims d;
  EXPECT_EQ(d.loc_size(), 64);
  EXPECT_EQ(d.loc_channels, 128);
  EXPECT_EQ(d.lat_size(), 32);
  EXPECT_EQ(d.feature_dim, 512);
  EXPECT_EQ(d.inputs, 4);
}

TEST(Backbone, EncoderShapes) {
  for (const ModelDims& d : {ModelDims::toy(), ModelDims::synthetic()}) {
    std::mt19937_64 rng(1);
    ParameterSet<double> ps;
    backbone::add_loc_encoder(ps, d, rng);
    backbone::add_glo_encoder(ps, d, rng);
    const auto frames = random_frames(d, d.inputs, rng);
    const auto loc = backbone::encode_loc(frames[0], ps, d);
    EXPECT_EQ(loc.shape, (Shape{d.loc_channels, d.loc_size(), d.loc_size()}));
    const auto glo = backbone::encode_glo(std::span<const Frame<double>>(frames), ps, d);
    EXPECT_EQ(glo.shape, (Shape{d.feature_dim, d.lat_size(), d.lat_size()}));
  }
}

TEST(Backbone, GlobalEncoderRejectsWrongFrameCount) {
  const ModelDims d = ModelDims::toy();
  std::mt19937_64 rng(2);
  ParameterSet<double> ps;
  backbone::add_glo_encoder(ps, d, rng);
  const auto frames = random_frames(d, d.inputs - 1, rng);
  EXPECT_THROW(backbone::encode_glo(std::span<const Frame<double>>(frames), ps, d), UserError);
}

TEST(Backbone, DecoderProducesFrameInRange) {
  const ModelDims d = ModelDims::toy();
  std::mt19937_64 rng(3);
  ParameterSet<double> ps;
  backbone::add_decoder(ps, d, backbone::FusionLayout{}, rng);
  const auto f_loc = lgn::testing::random_tensor(Shape{2 * d.hidden, d.loc_size(), d.loc_size()}, rng, 3.0);
  const auto f_glo = lgn::testing::random_tensor(Shape{d.feature_dim, d.lat_size(), d.lat_size()}, rng, 3.0);
  const auto frame = backbone::fuse_and_decode(f_loc, f_glo, ps, d);
  EXPECT_EQ(frame.shape, d.frame_shape());
  EXPECT_LE(frame.data.cwiseAbs().maxCoeff(), 1.0);
}

TEST(Backbone, DecoderRequiresAtLeastOneFeature) {
  const ModelDims d = ModelDims::toy();
  std::mt19937_64 rng(4);
  ParameterSet<double> ps;
  backbone::add_decoder(ps, d, backbone::FusionLayout{}, rng);
  Tape<double> tape;
  Binding<double> bind(tape, std::as_const(ps));
  EXPECT_THROW(backbone::fuse_and_decode(bind, d, Var{}, Var{}), UserError);
}

TEST(Backbone, EncoderGradients) {
  const ModelDims d = ModelDims::toy();
  std::mt19937_64 rng(5);
  ParameterSet<double> ps;
  backbone::add_loc_encoder(ps, d, rng);
  backbone::add_glo_encoder(ps, d, rng);
  const auto frames = random_frames(d, d.inputs, rng);
  const auto report = lgn::testing::check_param_grads(ps, [&](Tape<double>& t, ParameterSet<double>& p) {
    Binding<double> bind(t, p);
    std::vector<Var> fs;
    for (const auto& f : frames) fs.push_back(t.constant(f));
    Var loc = backbone::encode_loc(bind, d, fs[0]);
    Var glo = backbone::encode_glo(bind, d, std::span<const Var>(fs));
    return t.add(t.norm(loc), t.norm(glo));
  });
  EXPECT_LT(report.max_rel, 1e-5) << report.worst;
}
