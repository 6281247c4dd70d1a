#pragma once

#include "lgn/layers.hpp"
#include "lgn/model.hpp"
#include "lgn/trainer.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace lgn {

using KeyValues = std::map<std::string, std::string>;

struct RunConfig {
  std::string preset = "synthetic";
  ModelDims dims = ModelDims::synthetic();
  Variant variant = Variant::lgn_net;
  TrainConfig train;
  trainer::EvalSettings eval;
  std::filesystem::path data;
  std::filesystem::path out = "runs";
  std::filesystem::path checkpoint;
  std::string video;  // score: which test video

  static RunConfig from_preset(const std::string& name);

  /// Sets one field by its config key; throws UserError on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);

  /// Every key accepted by set(), in a stable order.
  static const std::vector<std::string>& keys();

  /// Preset defaults, then the config file, then flags. The preset itself is
  /// taken from the flags, else the file, else "synthetic".
  static RunConfig resolve(const KeyValues& file, const KeyValues& flags);

  /// key = value lines with the current values.
  std::string dump() const;
};

namespace config {

/// Flat `key = value` text; `#` starts a comment. Errors carry the line number.
KeyValues parse(const std::string& text, const std::string& origin = "config");
KeyValues parse_file(const std::filesystem::path& path);

const std::vector<std::string>& preset_names();

}  // namespace config
}  // namespace lgn
