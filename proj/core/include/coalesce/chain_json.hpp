#pragma once

#include <filesystem>

#include <json.hpp>

#include "coalesce/chain.hpp"

namespace coalesce {

/// {"n": <states>, "triplets": [[x, y, rate], ...]}
nlohmann::json generator_to_json(const RateGenerator& q);
RateGenerator generator_from_json(const nlohmann::json& doc);

RateGenerator load_generator(const std::filesystem::path& path);
void save_generator(const RateGenerator& q, const std::filesystem::path& path);

}  // namespace coalesce
