#include "lgn/cli.hpp"

#include "lgn/config.hpp"
#include "lgn/data.hpp"
#include "lgn/plot.hpp"
#include "lgn/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace lgn::cli {

namespace fs = std::filesystem;

namespace {

using Scalar = float;

struct Common {
  std::string config_file;
  std::map<std::string, std::string> values;
  bool print_config = false;
};

std::string flag_name(const std::string& key) {
  std::string dashed = key;
  std::replace(dashed.begin(), dashed.end(), '_', '-');
  return dashed == key ? "--" + key : "--" + key + ",--" + dashed;
}

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("-c,--config", common.config_file, "key = value config file");
  cmd->add_flag("--print-config", common.print_config, "print the resolved configuration and exit");
  for (const auto& key : RunConfig::keys()) {
    cmd->add_option(flag_name(key), common.values[key], "override '" + key + "'");
  }
}

RunConfig resolve(CLI::App* cmd, const Common& common) {
  KeyValues file;
  if (!common.config_file.empty()) file = config::parse_file(common.config_file);
  if (const char* env = std::getenv("LGN_OUTPUT_DIR"); env && *env && !file.count("out")) file["out"] = env;
  KeyValues flags;
  for (const auto& key : RunConfig::keys()) {
    if (cmd->count("--" + key) > 0) flags[key] = common.values.at(key);
  }
  return RunConfig::resolve(file, flags);
}

fs::path checkpoint_path(const RunConfig& c) {
  return c.checkpoint.empty() ? c.out / "checkpoint.lgn" : c.checkpoint;
}

void require_data(const RunConfig& c) {
  if (c.data.empty()) throw UserError("no dataset given (use --data DIR or 'data = DIR' in the config)");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

int run_synth(const RunConfig& c, int train_videos, int test_videos, const std::vector<std::string>& kind_names,
              int length) {
  std::set<data::AnomalyKind> kinds;
  for (const auto& k : kind_names) kinds.insert(data::parse_anomaly_kind(k));
  if (kinds.empty()) throw UserError("at least one anomaly kind is required");
  data::SynthOptions opts;
  opts.size = c.dims.input_size;
  opts.train_length = length;
  opts.test_length = length;
  const fs::path root = c.data.empty() ? c.out / "synthetic" : c.data;
  const auto ds = data::synth_generate(c.train.seed, train_videos, test_videos, kinds, opts);
  data::write_dataset(ds, root);
  std::cout << "wrote " << ds.train.size() << " training and " << ds.test.size() << " test videos to "
            << root.string() << '\n';
  return kExitOk;
}

int run_train(const RunConfig& c) {
  require_data(c);
  const auto videos = data::load_video_frames(c.data, Split::train, c.dims.input_size);
  const auto windows = data::make_windows(std::span<const LabeledVideo>(videos), c.dims.inputs);
  if (windows.empty()) throw UserError("no training windows in " + c.data.string());
  fs::create_directories(c.out);
  std::ofstream log(c.out / "train_log.csv");
  if (!log) throw UserError("cannot write " + (c.out / "train_log.csv").string());
  log << "step,epoch,intensity,compactness,separateness,total\n";
  auto state = TrainState<Scalar>::create(c.dims, c.variant, c.train.seed);
  std::cout << "training " << to_string(c.variant) << " on " << windows.size() << " windows from "
            << videos.size() << " videos\n";
  trainer::train(state, std::span<const FrameWindow>(windows), c.train,
                 [&](long step, int epoch, const LossParts& l) {
                   char buf[200];
                   std::snprintf(buf, sizeof buf, "%ld,%d,%.9g,%.9g,%.9g,%.9g\n", step, epoch, l.intensity,
                                 l.compactness, l.separateness, l.total);
                   log << buf;
                   log.flush();
                 });
  const fs::path ck = checkpoint_path(c);
  if (ck.has_parent_path()) fs::create_directories(ck.parent_path());
  save_checkpoint(state, c.train, ck);
  std::ofstream(c.out / "config.txt") << c.dump();
  std::cout << "checkpoint " << ck.string() << " (" << state.step << " steps)\n";
  return kExitOk;
}

void write_summary(const RunConfig& c, const Checkpoint<Scalar>& ck, const trainer::EvaluationResult& r) {
  nlohmann::json j;
  j["variant"] = to_string(ck.variant);
  j["preset"] = c.preset;
  j["gamma"] = c.eval.gamma;
  j["lambda"] = r.lambda;
  j["pool_updates"] = r.pool_updates;
  std::size_t frames = 0;
  for (const auto& v : r.videos) frames += v.records.size();
  j["videos"] = r.videos.size();
  j["frames"] = frames;
  j["auc"] = r.roc ? nlohmann::json(r.roc->auc) : nlohmann::json();
  j["gap"] = r.gap ? nlohmann::json(*r.gap) : nlohmann::json();
  nlohmann::json sweep = nlohmann::json::array();
  for (double lam : {0.0, r.lambda, 1.0}) {
    const auto auc = trainer::auc_for_lambda(std::span<const ScoreSeries>(r.videos), lam);
    sweep.push_back({{"lambda", lam}, {"auc", auc ? nlohmann::json(*auc) : nlohmann::json()}});
  }
  j["auc_by_lambda"] = sweep;
  std::ofstream(c.out / "summary.json") << j.dump(2) << '\n';

  std::ostringstream txt;
  txt << "variant        " << to_string(ck.variant) << '\n'
      << "preset         " << c.preset << '\n'
      << "videos         " << r.videos.size() << '\n'
      << "frames         " << frames << '\n'
      << "gamma          " << c.eval.gamma << '\n'
      << "lambda         " << r.lambda << '\n'
      << "pool updates   " << r.pool_updates << '\n'
      << "frame AUC      " << (r.roc ? fmt(r.roc->auc) : "n/a") << '\n'
      << "gap score      " << (r.gap ? fmt(*r.gap) : "n/a") << '\n';
  for (const auto& s : sweep) {
    txt << "AUC @ lambda=" << s["lambda"].get<double>() << "  "
        << (s["auc"].is_null() ? "n/a" : fmt(s["auc"].get<double>())) << '\n';
  }
  std::ofstream(c.out / "summary.txt") << txt.str();
  std::cout << txt.str();
}

int run_eval(const RunConfig& c, const std::string& only_video) {
  require_data(c);
  const auto ck = load_checkpoint<Scalar>(checkpoint_path(c));
  auto videos = data::load_video_frames(c.data, Split::test, ck.dims.input_size);
  if (!only_video.empty()) {
    std::erase_if(videos, [&](const LabeledVideo& v) { return v.video_id != only_video; });
    if (videos.empty()) throw UserError("no test video '" + only_video + "' under " + c.data.string());
  }
  const auto state = restore(ck);
  const auto result = trainer::evaluate(state.model, state.pool, std::span<const LabeledVideo>(videos), c.eval);
  fs::create_directories(c.out / "scores");
  for (const auto& s : result.videos) scoring::write_csv(s, c.out / "scores" / (s.video_id + ".csv"));
  if (result.roc) eval::write_roc_csv(*result.roc, c.out / "roc.csv");
  write_summary(c, ck, result);
  return kExitOk;
}

int run_plot(const RunConfig& c, const std::vector<std::string>& score_files, const std::string& heatmap_video) {
  const fs::path dir = c.out / "plots";
  fs::create_directories(dir);
  std::vector<ScoreSeries> series;
  std::vector<fs::path> files;
  for (const auto& f : score_files) {
    if (fs::is_directory(f)) {
      for (const auto& e : fs::directory_iterator(f)) {
        if (e.path().extension() == ".csv") files.push_back(e.path());
      }
    } else {
      files.push_back(f);
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    series.push_back(scoring::read_csv(f));
    plot::normality_curve(series.back(), dir / (series.back().video_id + "_normality.png"));
  }
  if (const auto roc = trainer::dataset_roc(series)) plot::roc_curve(*roc, dir / "roc.png");

  if (!heatmap_video.empty()) {
    require_data(c);
    const auto ck = load_checkpoint<Scalar>(checkpoint_path(c));
    auto videos = data::load_video_frames(c.data, Split::test, ck.dims.input_size);
    const auto it = std::find_if(videos.begin(), videos.end(),
                                 [&](const LabeledVideo& v) { return v.video_id == heatmap_video; });
    if (it == videos.end()) throw UserError("no test video '" + heatmap_video + "'");
    const auto state = restore(ck);
    for (const auto& w : data::make_windows(*it, ck.dims.inputs)) {
      const std::vector<Frame<Scalar>> inputs(w.inputs().begin(), w.inputs().end());
      const auto out = state.model.predict_next_frame(inputs, state.pool);
      const auto map = eval::error_map(to_unit_range(out.predicted), to_unit_range(w.target()));
      char name[64];
      std::snprintf(name, sizeof name, "%s_error_%04d.png", heatmap_video.c_str(), w.target_index());
      plot::error_heatmap(map, dir / name);
    }
  }
  std::cout << "wrote plots for " << series.size() << " score files to " << dir.string() << '\n';
  return kExitOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"Local-global normality video anomaly detection", "lgn"};
  app.require_subcommand(1);
  app.fallthrough(false);

  Common common;
  auto* synth = app.add_subcommand("synth", "write a synthetic moving-shape dataset");
  auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
  auto* evalc = app.add_subcommand("eval", "score all test videos and report AUC");
  auto* score = app.add_subcommand("score", "score a single test video (--video)");
  auto* plotc = app.add_subcommand("plot", "render normality curves, ROC and error heatmaps");
  for (auto* cmd : {synth, train, evalc, score, plotc}) add_common(cmd, common);

  int train_videos = 8, test_videos = 4, length = 48;
  std::vector<std::string> kinds = {"fast_motion", "shape_swap", "reverse_path"};
  synth->add_option("--train-videos", train_videos, "number of normal training videos")->check(CLI::PositiveNumber);
  synth->add_option("--test-videos", test_videos, "number of labeled test videos")->check(CLI::PositiveNumber);
  synth->add_option("--length", length, "frames per video")->check(CLI::PositiveNumber);
  synth->add_option("--kinds", kinds, "anomaly kinds")->delimiter(',');

  std::vector<std::string> score_files;
  std::string heatmap_video;
  plotc->add_option("--scores", score_files, "score CSV files or directories");
  plotc->add_option("--heatmaps", heatmap_video, "test video to render error heatmaps for");

  static const std::set<std::string> commands = {"synth", "train", "eval", "score", "plot"};
  if (!args.empty() && args.front()[0] != '-' && !commands.count(args.front())) {
    std::cerr << "error: unknown command '" << args.front() << "'\n\n" << app.help();
    return kExitUser;
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUser;
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    const RunConfig c = resolve(cmd, common);
    if (common.print_config) {
      std::cout << c.dump();
      return kExitOk;
    }
    if (cmd == synth) return run_synth(c, train_videos, test_videos, kinds, length);
    if (cmd == train) return run_train(c);
    if (cmd == evalc) return run_eval(c, "");
    if (cmd == score) {
      if (c.video.empty()) throw UserError("score needs --video ID");
      return run_eval(c, c.video);
    }
    if (score_files.empty()) score_files.push_back((c.out / "scores").string());
    return run_plot(c, score_files, heatmap_video);
  } catch (const UserError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUser;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args);
}

}  // namespace lgn::cli
