#pragma once

#include <string>

#include "json.hpp"
#include "ota/analysis.hpp"
#include "ota/perturb.hpp"
#include "ota/train.hpp"

namespace ota {

using json = nlohmann::ordered_json;

json to_json(const MetricsReport& m);
json to_json(const CvReport& r);
json to_json(const RobustnessReport& r);
json to_json(const std::array<ClassFeatureMeans, kNumClasses>& summary);
json to_json(const DivergenceMatrix& m);

// aligned plain-text tables mirroring the report layouts
std::string metrics_table(const MetricsReport& m);
std::string cv_table(const CvReport& r);
std::string robustness_table(const RobustnessReport& r);
std::string feature_summary_table(const std::array<ClassFeatureMeans, kNumClasses>& summary);
std::string divergence_csv(const DivergenceMatrix& m);

}  // namespace ota
