#pragma once

#include "lgn/eval.hpp"
#include "lgn/scoring.hpp"

#include <filesystem>
#include <string>

namespace lgn::plot {

/// Normality score over frame index; frames labeled abnormal are shaded.
void normality_curve(const ScoreSeries& series, const std::filesystem::path& png);

/// ROC curve with the chance diagonal and the AUC in the title.
void roc_curve(const RocCurve& roc, const std::filesystem::path& png, const std::string& title = "ROC");

/// Values in [0, 1] rendered with a jet colormap, each cell scaled up by `scale`.
void error_heatmap(const Matrix<double>& map, const std::filesystem::path& png, int scale = 4);

}  // namespace lgn::plot
