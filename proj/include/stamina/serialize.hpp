#pragma once

#include "stamina/trainer.hpp"

#include <json.hpp>

namespace stamina {

using ordered_json = nlohmann::ordered_json;

// Matrices travel as {"rows", "cols", "data"} with row-major float64 data.
// nlohmann emits shortest-round-trip doubles, so save/load is bit-exact.
ordered_json mat_to_json(const Mat& m);
Mat mat_from_json(const ordered_json& j);

ordered_json model_to_json(const ContinualModel& model);
ContinualModel model_from_json(const ordered_json& j);

ordered_json log_to_json(const ContinualLog& log);
ContinualLog log_from_json(const ordered_json& j);

// Checkpoint = model + log + config hash, written after every fold.
ordered_json checkpoint_to_json(const ContinualModel& model, const ContinualLog& log,
                                const std::string& config_hash);

void write_json_file(const std::string& path, const ordered_json& j);
ordered_json read_json_file(const std::string& path);

}  // namespace stamina
