#include "lgn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace lgn {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw UserError("learning rate must be >= 0");
  if (batch_size < 1) throw UserError("batch size must be >= 1");
  if (epochs < 0) throw UserError("epochs must be >= 0");
  if (weights.lambda_c < 0 || weights.lambda_s < 0 || weights.alpha < 0) {
    throw UserError("loss weights must be >= 0");
  }
}

// ---------------------------------------------------------------------------
// Adam

template <typename Scalar>
Adam<Scalar>::Adam(const ParameterSet<Scalar>& params) {
  for (const auto& p : params.items()) {
    m_.push_back(Matrix<Scalar>::Zero(p.value.rows(), p.value.cols()));
    v_.push_back(Matrix<Scalar>::Zero(p.value.rows(), p.value.cols()));
  }
}

template <typename Scalar>
void Adam<Scalar>::step(ParameterSet<Scalar>& params, const TrainConfig& c) {
  ++steps_;
  const double bc1 = 1.0 - std::pow(c.beta1, double(steps_));
  const double bc2 = 1.0 - std::pow(c.beta2, double(steps_));
  const auto b1 = Scalar(c.beta1), b2 = Scalar(c.beta2);
  std::size_t i = 0;
  for (auto& p : params.items()) {
    auto& m = m_[i];
    auto& v = v_[i];
    ++i;
    m = b1 * m + (Scalar(1) - b1) * p.grad;
    v = b2 * v + (Scalar(1) - b2) * p.grad.cwiseAbs2();
    const auto step_size = Scalar(c.learning_rate / bc1);
    const auto denom = ((v.array() / Scalar(bc2)).sqrt() + Scalar(c.adam_eps));
    p.value.array() -= step_size * m.array() / denom;
  }
}

template <typename Scalar>
TrainState<Scalar> TrainState<Scalar>::create(const ModelDims& dims, Variant variant, std::uint64_t seed) {
  return TrainState(Model<Scalar>(dims, variant, seed),
                    memory::init_pool<Scalar>(dims.memory_size, dims.feature_dim, seed ^ 0x9e3779b97f4a7c15ULL));
}

namespace trainer {

template <typename Scalar>
double clip_gradients(ParameterSet<Scalar>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params.items()) sq += p.grad.template cast<double>().squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const auto s = Scalar(max_norm / norm);
    for (auto& p : params.items()) p.grad *= s;
  }
  return norm;
}

template <typename Scalar>
LossParts train_step(TrainState<Scalar>& state, std::span<const FrameWindow> batch, const TrainConfig& config) {
  if (batch.empty()) throw UserError("train_step: empty batch");
  auto& params = state.model.params();
  params.zero_grad();
  const bool memory_branch = has_memory(state.model.variant());

  LossParts mean;
  std::vector<Matrix<Scalar>> queries;
  for (const FrameWindow& w : batch) {
    Tape<Scalar> tape;
    Binding<Scalar> bind(tape, params);
    std::vector<Var> frames;
    for (const auto& f : w.inputs()) frames.push_back(tape.constant(f.data.template cast<Scalar>(), f.shape));
    const Var target = tape.constant(w.target().data.template cast<Scalar>(), w.target().shape);
    Var prototypes;
    if (memory_branch) {
      prototypes = tape.constant(state.pool.prototypes, Shape{state.pool.dim(), 1, state.pool.size()});
    }
    const WindowLoss<Scalar> wl = state.model.window_loss(bind, std::span<const Var>(frames), target, prototypes,
                                                          config.weights);
    tape.backward(wl.total);
    mean.intensity += double(tape.scalar(wl.intensity));
    if (wl.compactness.valid()) mean.compactness += double(tape.scalar(wl.compactness));
    if (wl.separateness.valid()) mean.separateness += double(tape.scalar(wl.separateness));
    mean.total += double(tape.scalar(wl.total));
    if (memory_branch) queries.push_back(tape.value(wl.graph.queries));
  }
  const double inv = 1.0 / double(batch.size());
  mean.intensity *= inv;
  mean.compactness *= inv;
  mean.separateness *= inv;
  mean.total *= inv;
  if (!std::isfinite(mean.total) || !std::isfinite(mean.intensity) || !std::isfinite(mean.compactness) ||
      !std::isfinite(mean.separateness)) {
    std::ostringstream msg;
    msg << "non-finite loss at step " << state.step << ": L_int=" << mean.intensity << " L_com=" << mean.compactness
        << " L_sep=" << mean.separateness << " total=" << mean.total;
    throw std::runtime_error(msg.str());
  }
  for (auto& p : params.items()) p.grad *= Scalar(inv);
  clip_gradients(params, config.clip_norm);
  state.optimizer.step(params, config);

  if (memory_branch) {
    const int dim = state.pool.dim();
    Eigen::Index total = 0;
    for (const auto& q : queries) total += q.cols();
    QueryGrid<Scalar> all{Matrix<Scalar>(dim, total), 1, int(total)};
    Eigen::Index col = 0;
    for (const auto& q : queries) {
      all.queries.middleCols(col, q.cols()) = q;
      col += q.cols();
    }
    state.pool = memory::update(all, state.pool);
  }
  ++state.step;
  return mean;
}

template <typename Scalar>
void train(TrainState<Scalar>& state, std::span<const FrameWindow> windows, const TrainConfig& config,
           const StepCallback& on_step) {
  config.validate();
  if (windows.empty()) throw UserError("no training windows");
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(windows.size());
  std::vector<FrameWindow> batch;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < order.size(); i += std::size_t(config.batch_size)) {
      batch.clear();
      for (std::size_t j = i; j < std::min(order.size(), i + config.batch_size); ++j) batch.push_back(windows[order[j]]);
      const LossParts loss = train_step(state, std::span<const FrameWindow>(batch), config);
      if (on_step) on_step(state.step, epoch, loss);
    }
  }
}

std::optional<RocCurve> dataset_roc(std::span<const ScoreSeries> videos) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& v : videos) {
    for (const auto& r : v.records) {
      if (!r.label) continue;
      scores.push_back(1.0 - r.normality);
      labels.push_back(*r.label);
    }
  }
  const auto positives = std::count(labels.begin(), labels.end(), 1);
  if (positives == 0 || positives == std::ptrdiff_t(labels.size())) return std::nullopt;
  return eval::roc_auc(scores, labels);
}

std::optional<double> auc_for_lambda(std::span<const ScoreSeries> videos, double lambda) {
  std::vector<ScoreSeries> copy(videos.begin(), videos.end());
  for (auto& v : copy) scoring::finalize(v, lambda);
  const auto roc = dataset_roc(copy);
  if (!roc) return std::nullopt;
  return roc->auc;
}

template <typename Scalar>
EvaluationResult evaluate(const Model<Scalar>& model, const MemoryPool<Scalar>& pool,
                          std::span<const LabeledVideo> videos, const EvalSettings& settings) {
  EvaluationResult result;
  const bool memory_branch = has_memory(model.variant());
  result.lambda = memory_branch ? settings.lambda : 1.0;
  MemoryPool<Scalar> session = pool;
  const int n = model.dims().inputs;

  for (const LabeledVideo& video : videos) {
    ScoreSeries series;
    series.video_id = video.video_id;
    for (const FrameWindow& w : data::make_windows(video, n)) {
      std::vector<Frame<Scalar>> inputs;
      for (const auto& f : w.inputs()) inputs.push_back(f.template cast<Scalar>());
      const PredictionOutput<Scalar> out = model.predict_next_frame(inputs, session);
      const Frame<Scalar> pred = to_unit_range(out.predicted);
      const Frame<Scalar> target = to_unit_range(w.target().template cast<Scalar>());

      ScoreRecord rec;
      rec.frame_index = w.target_index();
      rec.psnr = scoring::psnr(pred, target);
      rec.regular = scoring::regular_score(pred, target);
      if (memory_branch) rec.dist = scoring::feature_distance(*out.queries, session, *out.match);
      if (video.labeled()) rec.label = video.labels[w.target_index()];
      series.records.push_back(rec);

      if (memory_branch && memory::gate_allows(rec.regular, settings.gamma)) {
        session = memory::update(*out.queries, session);
        ++result.pool_updates;
      }
    }
    scoring::finalize(series, result.lambda);
    result.videos.push_back(std::move(series));
  }
  result.roc = dataset_roc(result.videos);
  result.gap = scoring::gap_score(std::span<const ScoreSeries>(result.videos));
  return result;
}

}  // namespace trainer

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'L', 'G', 'N', 'C', 'K', 'P', 'T', '\n'};

template <typename Scalar>
const char* scalar_tag() {
  return std::is_same_v<Scalar, float> ? "float32" : "float64";
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::array<int, 3>& a) {
  return std::to_string(a[0]) + "," + std::to_string(a[1]) + "," + std::to_string(a[2]);
}

std::array<int, 3> split3(const std::string& s) {
  std::array<int, 3> out{};
  std::istringstream in(s);
  char comma = 0;
  in >> out[0] >> comma >> out[1] >> comma >> out[2];
  if (!in) throw UserError("bad width list '" + s + "' in checkpoint");
  return out;
}

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw UserError("checkpoint " + path + " is truncated");
  return v;
}

std::string get_string(std::istream& in, std::uint32_t len, const std::string& path) {
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw UserError("checkpoint " + path + " is truncated");
  return s;
}

template <typename Scalar>
void put_matrix(std::ostream& out, const std::string& name, const Matrix<Scalar>& m) {
  put(out, std::uint32_t(name.size()));
  out.write(name.data(), std::streamsize(name.size()));
  put(out, std::uint64_t(m.rows()));
  put(out, std::uint64_t(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()), std::streamsize(sizeof(Scalar) * m.size()));
}

}  // namespace

template <typename Scalar>
void save_checkpoint(const TrainState<Scalar>& state, const TrainConfig& config, const std::filesystem::path& path) {
  const ModelDims& d = state.model.dims();
  std::ostringstream manifest;
  manifest << "scalar=" << scalar_tag<Scalar>() << '\n'
           << "variant=" << to_string(state.model.variant()) << '\n'
           << "step=" << state.step << '\n'
           << "dims.input_size=" << d.input_size << '\n'
           << "dims.channels=" << d.channels << '\n'
           << "dims.inputs=" << d.inputs << '\n'
           << "dims.loc_mid=" << d.loc_mid << '\n'
           << "dims.loc_channels=" << d.loc_channels << '\n'
           << "dims.hidden=" << d.hidden << '\n'
           << "dims.layers=" << d.layers << '\n'
           << "dims.cell_kernel=" << d.cell_kernel << '\n'
           << "dims.glo_widths=" << join(d.glo_widths) << '\n'
           << "dims.feature_dim=" << d.feature_dim << '\n'
           << "dims.memory_size=" << d.memory_size << '\n'
           << "dims.align_channels=" << d.align_channels << '\n'
           << "dims.decoder_widths=" << join(d.decoder_widths) << '\n'
           << "train.learning_rate=" << fmt_double(config.learning_rate) << '\n'
           << "train.batch_size=" << config.batch_size << '\n'
           << "train.epochs=" << config.epochs << '\n'
           << "train.seed=" << config.seed << '\n'
           << "train.lambda_c=" << fmt_double(config.weights.lambda_c) << '\n'
           << "train.lambda_s=" << fmt_double(config.weights.lambda_s) << '\n'
           << "train.alpha=" << fmt_double(config.weights.alpha) << '\n'
           << "train.clip_norm=" << fmt_double(config.clip_norm) << '\n';
  const std::string text = manifest.str();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UserError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  put(out, kCheckpointVersion);
  put(out, std::uint32_t(text.size()));
  out.write(text.data(), std::streamsize(text.size()));
  const auto& items = state.model.params().items();
  put(out, std::uint32_t(items.size() + 1));
  for (const auto& p : items) put_matrix(out, p.name, p.value);
  put_matrix(out, "memory.prototypes", state.pool.prototypes);
  if (!out) throw UserError("failed writing checkpoint " + path.string());
}

template <typename Scalar>
Checkpoint<Scalar> load_checkpoint(const std::filesystem::path& path) {
  const std::string p = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open checkpoint " + p);
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw UserError(p + " is not a checkpoint");
  const auto version = get<std::uint32_t>(in, p);
  if (version != kCheckpointVersion) {
    throw UserError("checkpoint " + p + " has format version " + std::to_string(version) + ", this build reads version " +
                    std::to_string(kCheckpointVersion));
  }
  const std::string text = get_string(in, get<std::uint32_t>(in, p), p);
  std::map<std::string, std::string> kv;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto need = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw UserError("checkpoint " + p + " lacks manifest key " + key);
    return it->second;
  };
  if (need("scalar") != scalar_tag<Scalar>()) {
    throw UserError("checkpoint " + p + " stores " + need("scalar") + ", expected " + scalar_tag<Scalar>());
  }
  Checkpoint<Scalar> ck;
  ck.variant = parse_variant(need("variant"));
  ck.step = std::stol(need("step"));
  ModelDims& d = ck.dims;
  d.input_size = std::stoi(need("dims.input_size"));
  d.channels = std::stoi(need("dims.channels"));
  d.inputs = std::stoi(need("dims.inputs"));
  d.loc_mid = std::stoi(need("dims.loc_mid"));
  d.loc_channels = std::stoi(need("dims.loc_channels"));
  d.hidden = std::stoi(need("dims.hidden"));
  d.layers = std::stoi(need("dims.layers"));
  d.cell_kernel = std::stoi(need("dims.cell_kernel"));
  d.glo_widths = split3(need("dims.glo_widths"));
  d.feature_dim = std::stoi(need("dims.feature_dim"));
  d.memory_size = std::stoi(need("dims.memory_size"));
  d.align_channels = std::stoi(need("dims.align_channels"));
  d.decoder_widths = split3(need("dims.decoder_widths"));
  TrainConfig& c = ck.config;
  c.learning_rate = std::stod(need("train.learning_rate"));
  c.batch_size = std::stoi(need("train.batch_size"));
  c.epochs = std::stoi(need("train.epochs"));
  c.seed = std::stoull(need("train.seed"));
  c.weights.lambda_c = std::stod(need("train.lambda_c"));
  c.weights.lambda_s = std::stod(need("train.lambda_s"));
  c.weights.alpha = std::stod(need("train.alpha"));
  c.clip_norm = std::stod(need("train.clip_norm"));

  const auto count = get<std::uint32_t>(in, p);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = get_string(in, get<std::uint32_t>(in, p), p);
    const auto rows = get<std::uint64_t>(in, p);
    const auto cols = get<std::uint64_t>(in, p);
    if (rows * cols > (std::uint64_t(1) << 32)) throw UserError("checkpoint " + p + ": tensor " + name + " too large");
    Matrix<Scalar> m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char*>(m.data()), std::streamsize(sizeof(Scalar) * m.size()));
    if (!in) throw UserError("checkpoint " + p + " is truncated");
    if (name == "memory.prototypes") {
      ck.pool.prototypes = std::move(m);
    } else {
      ck.params.add(name, std::move(m));
    }
  }
  if (ck.pool.prototypes.size() == 0) throw UserError("checkpoint " + p + " has no memory pool");
  return ck;
}

template <typename Scalar>
TrainState<Scalar> restore(Checkpoint<Scalar> ck) {
  TrainState<Scalar> state(Model<Scalar>(ck.dims, ck.variant, std::move(ck.params)), std::move(ck.pool));
  state.step = ck.step;
  return state;
}

#define LGN_INSTANTIATE(S)                                                                                  \
  template class Adam<S>;                                                                                   \
  template struct TrainState<S>;                                                                            \
  template double trainer::clip_gradients<S>(ParameterSet<S>&, double);                                     \
  template LossParts trainer::train_step<S>(TrainState<S>&, std::span<const FrameWindow>, const TrainConfig&); \
  template void trainer::train<S>(TrainState<S>&, std::span<const FrameWindow>, const TrainConfig&,         \
                                  const trainer::StepCallback&);                                            \
  template trainer::EvaluationResult trainer::evaluate<S>(const Model<S>&, const MemoryPool<S>&,            \
                                                          std::span<const LabeledVideo>,                    \
                                                          const trainer::EvalSettings&);                    \
  template void save_checkpoint<S>(const TrainState<S>&, const TrainConfig&, const std::filesystem::path&); \
  template Checkpoint<S> load_checkpoint<S>(const std::filesystem::path&);                                  \
  template TrainState<S> restore<S>(Checkpoint<S>);

LGN_INSTANTIATE(float)
LGN_INSTANTIATE(double)
#undef LGN_INSTANTIATE

}  // namespace lgn
