#pragma once

#include <json.hpp>

#include "segdiscover/crossvideo/crossvideo.hpp"
#include "segdiscover/data/synth.hpp"
#include "segdiscover/ranking/ranking.hpp"
#include "segdiscover/trainer/trainer.hpp"

namespace segdiscover {

/// Raised for a config field that is missing, mistyped or out of range.
/// field() names the offending key (dotted for nested objects).
class ConfigError : public InvalidArgument {
 public:
  ConfigError(std::string field, const std::string& what)
      : InvalidArgument("config field '" + field + "': " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Absent keys keep their defaults except SynthConfig.k, which is required.
nlohmann::json to_json(const SynthConfig& c);
SynthConfig synth_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const LengthModel& lm);
LengthModel length_model_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RankingConfig& c);
RankingConfig ranking_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const CrossVideoConfig& c);
CrossVideoConfig cross_video_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const EpochRecord& r);

}  // namespace segdiscover
