#pragma once

#include "dyncontract/game.hpp"
#include "dyncontract/loyalty.hpp"

#include <json.hpp>

#include <string>

namespace dyncontract {

/// Keys: states, actions, u, v (|A| rows of |S|), k, prior, discount,
/// optional transition (|S| rows) and promise_bound.
DiscountedGame game_from_json(const nlohmann::json& j);
nlohmann::json game_to_json(const DiscountedGame& game);

/// Keys: n, c, mu0, k, discount.
RideGame ride_from_json(const nlohmann::json& j);
nlohmann::json ride_to_json(const RideGame& ride);

/// Parses a file; malformed JSON or missing keys raise InvalidInput.
nlohmann::json read_json_file(const std::string& path);

nlohmann::json belief_to_json(const Belief& b);
nlohmann::json matrix_to_json(const Matrix& m);

}  // namespace dyncontract
