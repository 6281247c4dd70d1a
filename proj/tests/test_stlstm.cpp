#include "lgn/stlstm.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace lgn;
using lgn::testing::naive_conv;
using lgn::testing::random_tensor;

namespace {

constexpr int kIn = 3, kHidden = 2, kSide = 4, kKernel = 3;
const std::string kPrefix = "cell";

ParameterSet<double> cell_params(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParameterSet<double> ps;
  stlstm::add_stlstm_cell(ps, kPrefix, kIn, kHidden, kKernel, rng);
  // Nonzero biases so their paths are exercised.
  std::normal_distribution<double> d(0.0, 0.5);
  for (auto& p : ps.items()) {
    if (p.name.find(".b_") != std::string::npos) {
      for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = d(rng);
    }
  }
  return ps;
}

Tensor3<double> sig(const Tensor3<double>& a) {
  return Tensor3<double>(a.shape, (1.0 / (1.0 + (-a.data.array()).exp())).matrix());
}
Tensor3<double> tnh(const Tensor3<double>& a) { return Tensor3<double>(a.shape, a.data.array().tanh().matrix()); }
Tensor3<double> operator+(const Tensor3<double>& a, const Tensor3<double>& b) {
  return Tensor3<double>(a.shape, a.data + b.data);
}
Tensor3<double> operator*(const Tensor3<double>& a, const Tensor3<double>& b) {
  return Tensor3<double>(a.shape, a.data.cwiseProduct(b.data));
}

// Independent evaluation of the ST-LSTM equations with direct-loop convolutions.
struct CellRef {
  const ParameterSet<double>& ps;
  Tensor3<double> w(const std::string& g, const Tensor3<double>& x, int k = kKernel) const {
    return naive_conv(x, ps.at(kPrefix + "." + g).value, Matrix<double>(), ConvGeometry{k, 1, k / 2});
  }
  Tensor3<double> b(const std::string& g) const {
    Tensor3<double> t(Shape{kHidden, kSide, kSide});
    t.data = ps.at(kPrefix + "." + g).value.col(0).replicate(1, kSide * kSide);
    return t;
  }
  std::tuple<Tensor3<double>, Tensor3<double>, Tensor3<double>> step(const Tensor3<double>& x,
                                                                     const Tensor3<double>& h,
                                                                     const Tensor3<double>& c,
                                                                     const Tensor3<double>& m) const {
    const auto i = sig(w("x_i", x) + w("h_i", h) + b("b_i"));
    const auto f = sig(w("x_f", x) + w("h_f", h) + b("b_f"));
    const auto g = tnh(w("x_c", x) + w("h_c", h) + b("b_c"));
    const auto c_new = f * c + i * g;
    const auto ip = sig(w("x_im", x) + w("m_i", m) + b("b_im"));
    const auto fp = sig(w("x_fm", x) + w("m_f", m) + b("b_fm"));
    const auto gp = tnh(w("x_m", x) + w("m_m", m) + b("b_m"));
    const auto m_new = fp * m + ip * gp;
    const auto o = sig(w("x_o", x) + w("h_o", h) + w("c_o", c_new) + w("m_o", m_new) + b("b_o"));
    Tensor3<double> cm(Shape{2 * kHidden, kSide, kSide});
    cm.data << c_new.data, m_new.data;
    const auto h_new = o * tnh(w("w11", cm, 1));
    return {h_new, c_new, m_new};
  }
};

}  // namespace

TEST(StLstmCell, MatchesDirectEquations) {
  const auto ps = cell_params(1);
  std::mt19937_64 rng(2);
  const auto x = random_tensor(Shape{kIn, kSide, kSide}, rng);
  const auto h = random_tensor(Shape{kHidden, kSide, kSide}, rng);
  const auto c = random_tensor(Shape{kHidden, kSide, kSide}, rng);
  const auto m = random_tensor(Shape{kHidden, kSide, kSide}, rng);
  const auto [h1, c1, m1] = stlstm::cell_step(x, h, c, m, ps, kPrefix, kKernel);
  const auto [rh, rc, rm] = CellRef{ps}.step(x, h, c, m);
  EXPECT_LT((h1.data - rh.data).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((c1.data - rc.data).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((m1.data - rm.data).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(StLstmCell, BiasesReachEveryGate) {
  // Zero kernels leave only the biases: C = s(b_f) c + s(b_i) tanh(b_c), and
  // M = s(b_fm) m + s(b_im) tanh(b_m).
  auto ps = cell_params(3);
  for (auto& p : ps.items()) {
    if (p.name.find(".b_") == std::string::npos && p.name != kPrefix + ".w11") p.value.setZero();
  }
  const double bi = 0.3, bf = -0.7, bim = 1.1, bfm = 0.2, bc = -0.4, bm = 0.9, bo = 0.5;
  auto setb = [&](const char* n, double v) { ps.at(kPrefix + "." + n).value.setConstant(v); };
  setb("b_i", bi), setb("b_f", bf), setb("b_im", bim), setb("b_fm", bfm), setb("b_c", bc), setb("b_m", bm),
      setb("b_o", bo);
  std::mt19937_64 rng(4);
  const auto x = random_tensor(Shape{kIn, kSide, kSide}, rng);
  const auto h = random_tensor(Shape{kHidden, kSide, kSide}, rng);
  const auto c = random_tensor(Shape{kHidden, kSide, kSide}, rng);
  const auto m = random_tensor(Shape{kHidden, kSide, kSide}, rng);
  const auto [h1, c1, m1] = stlstm::cell_step(x, h, c, m, ps, kPrefix, kKernel);
  auto s = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const Matrix<double> c_ref = (s(bf) * c.data).array() + s(bi) * std::tanh(bc);
  const Matrix<double> m_ref = (s(bfm) * m.data).array() + s(bim) * std::tanh(bm);
  EXPECT_LT((c1.data - c_ref).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((m1.data - m_ref).cwiseAbs().maxCoeff(), 1e-14);
  Matrix<double> cm(2 * kHidden, kSide * kSide);
  cm << c_ref, m_ref;
  const Matrix<double> h_ref = s(bo) * (ps.at(kPrefix + ".w11").value * cm).array().tanh();
  EXPECT_LT((h1.data - h_ref).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(StLstmCell, RejectsMisalignedState) {
  const auto ps = cell_params(5);
  std::mt19937_64 rng(6);
  const auto x = random_tensor(Shape{kIn, kSide, kSide}, rng);
  const auto h = random_tensor(Shape{kHidden, kSide, kSide}, rng);
  const auto bad = random_tensor(Shape{kHidden, kSide + 1, kSide}, rng);
  EXPECT_THROW(stlstm::cell_step(x, h, bad, h, ps, kPrefix, kKernel), UserError);
}

TEST(StLstmCell, GradientsMatchFiniteDifferences) {
  auto ps = cell_params(7);
  std::mt19937_64 rng(8);
  Matrix<double> x = lgn::testing::random_matrix(kIn, kSide * kSide, rng);
  Matrix<double> h = lgn::testing::random_matrix(kHidden, kSide * kSide, rng);
  Matrix<double> c = lgn::testing::random_matrix(kHidden, kSide * kSide, rng);
  Matrix<double> m = lgn::testing::random_matrix(kHidden, kSide * kSide, rng);
  const Shape xs{kIn, kSide, kSide}, hs{kHidden, kSide, kSide};
  auto loss = [&](Tape<double>& t, const Binding<double>& bind, Var vx, Var vh, Var vc, Var vm) {
    const auto out = stlstm::stlstm_cell(bind, kPrefix, vx, vh, vc, vm, kKernel);
    return t.add(t.add(t.norm(out.h), t.norm(out.c)), t.norm(out.m));
  };
  const auto pr = lgn::testing::check_param_grads(ps, [&](Tape<double>& t, ParameterSet<double>& p) {
    Binding<double> bind(t, p);
    return loss(t, bind, t.constant(x, xs), t.constant(h, hs), t.constant(c, hs), t.constant(m, hs));
  });
  EXPECT_LT(pr.max_rel, 1e-4) << pr.worst;
  const auto ir = lgn::testing::check_input_grads(
      {&x, &h, &c, &m}, {xs, hs, hs, hs}, [&](Tape<double>& t, const std::vector<Var>& v) {
        Binding<double> bind(t, std::as_const(ps));
        return loss(t, bind, v[0], v[1], v[2], v[3]);
      });
  EXPECT_LT(ir.max_rel, 1e-4) << ir.worst;
}

TEST(StpNet, ZigzagCarriesTopMemoryToNextBottom) {
  ModelDims d = ModelDims::toy();
  d.layers = 4;
  for (auto kind : {stlstm::CellKind::st_lstm}) {
    std::mt19937_64 rng(9);
    ParameterSet<double> ps;
    stlstm::add_stack(ps, kind, d, rng);
    std::vector<FeatureMap<double>> xs;
    for (int t = 0; t < 5; ++t) xs.push_back(random_tensor(Shape{d.loc_channels, 4, 4}, rng));
    stlstm::StpTrace<double> trace;
    stlstm::stp_forward(std::span<const FeatureMap<double>>(xs), ps, kind, d, &trace);
    ASSERT_EQ(trace.bottom_memory_in.size(), 5u);
    ASSERT_EQ(trace.top_memory_out.size(), 5u);
    EXPECT_EQ(trace.bottom_memory_in[0].cwiseAbs().maxCoeff(), 0.0);
    for (int t = 1; t < 5; ++t) {
      EXPECT_TRUE(trace.bottom_memory_in[t] == trace.top_memory_out[t - 1]) << "step " << t;
      EXPECT_GT(trace.top_memory_out[t - 1].cwiseAbs().maxCoeff(), 0.0);
    }
  }
}

TEST(StpNet, OutputStacksHiddenAndMemory) {
  const ModelDims d = ModelDims::toy();
  std::mt19937_64 rng(10);
  for (auto kind : {stlstm::CellKind::st_lstm, stlstm::CellKind::conv_lstm}) {
    ParameterSet<double> ps;
    stlstm::add_stack(ps, kind, d, rng);
    std::vector<FeatureMap<double>> xs;
    for (int t = 0; t < 3; ++t) xs.push_back(random_tensor(Shape{d.loc_channels, 4, 4}, rng));
    stlstm::StpTrace<double> trace;
    const auto out = stlstm::stp_forward(std::span<const FeatureMap<double>>(xs), ps, kind, d, &trace);
    EXPECT_EQ(out.shape, (Shape{2 * d.hidden, 4, 4}));
    if (kind == stlstm::CellKind::st_lstm) {
      EXPECT_TRUE(out.data.bottomRows(d.hidden) == trace.top_memory_out.back());
    }
  }
}

TEST(StpNet, RejectsEmptySequence) {
  const ModelDims d = ModelDims::toy();
  std::mt19937_64 rng(11);
  ParameterSet<double> ps;
  stlstm::add_stack(ps, stlstm::CellKind::st_lstm, d, rng);
  std::vector<FeatureMap<double>> none;
  EXPECT_THROW(stlstm::stp_forward(std::span<const FeatureMap<double>>(none), ps, stlstm::CellKind::st_lstm, d),
               UserError);
}

TEST(StpNet, TwoStepTwoLayerGradients) {
  ModelDims d = ModelDims::toy();
  d.layers = 2;
  d.hidden = 3;
  d.loc_channels = 2;
  for (auto kind : {stlstm::CellKind::st_lstm, stlstm::CellKind::conv_lstm}) {
    std::mt19937_64 rng(12);
    ParameterSet<double> ps;
    stlstm::add_stack(ps, kind, d, rng);
    Matrix<double> x0 = lgn::testing::random_matrix(2, 16, rng), x1 = lgn::testing::random_matrix(2, 16, rng);
    const Shape xs{2, 4, 4};
    auto build = [&](Tape<double>& t, const Binding<double>& bind, Var a, Var b) {
      const std::vector<Var> seq{a, b};
      return t.norm(stlstm::stp_forward(bind, kind, d, std::span<const Var>(seq)));
    };
    const auto pr = lgn::testing::check_param_grads(ps, [&](Tape<double>& t, ParameterSet<double>& p) {
      Binding<double> bind(t, p);
      return build(t, bind, t.constant(x0, xs), t.constant(x1, xs));
    });
    EXPECT_LT(pr.max_rel, 1e-4) << pr.worst;
    const auto ir = lgn::testing::check_input_grads({&x0, &x1}, {xs, xs}, [&](Tape<double>& t, const std::vector<Var>& v) {
      Binding<double> bind(t, std::as_const(ps));
      return build(t, bind, v[0], v[1]);
    });
    EXPECT_LT(ir.max_rel, 1e-4) << ir.worst;
  }
}
