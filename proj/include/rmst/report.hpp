#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "rmst/gee.hpp"
#include "rmst/sampler.hpp"

namespace rmst {

// Round-trippable text for reports; "NA" for NaN, "inf"/"-inf" for infinities.
std::string format_number(double x);

// NaN and infinities become null, which JSON cannot otherwise carry.
nlohmann::json json_number(double x);

nlohmann::json to_json(const GeeFit& fit);
nlohmann::json to_json(const RmstDifference& diff);
nlohmann::json to_json(const PosteriorSummary& summary, const PosteriorDraws& draws);

// chain,iteration,<parameter names>
void write_draws_csv(std::ostream& out, const PosteriorDraws& draws);

}  // namespace rmst
