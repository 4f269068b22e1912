#pragma once

#include <json.hpp>

#include <string>

#include "ckspectra/measure.hpp"
#include "ckspectra/simulator.hpp"
#include "ckspectra/spike_engine.hpp"
#include "ckspectra/trained_ck.hpp"

namespace ckspectra {

using json = nlohmann::json;

// {"atoms":[[value,weight],...]}
json to_json(const DiscreteMeasure& mu);
DiscreteMeasure measure_from_json(const json& j);

// {"zero_mass":..., "grid":[[x,f],...]}
json to_json(const BulkLaw& law);
BulkLaw bulk_from_json(const json& j, int discretization_order = 2000);

json to_json(const Interval& iv);
json to_json(const NormalizedActivation& act);
json to_json(const SpikeTrajectory& traj);
json to_json(const DeepPrediction& pred);
json to_json(const TrainedCkPrediction& pred);
json to_json(const SimResult& res);
json to_json(const DeepExperimentResult& res);
json to_json(const GdExperimentResult& res);

std::string csv_density(const BulkLaw& law);
std::string csv_histogram(const Histogram& aggregated, const BulkLaw& predicted);

uint64_t fnv1a64(const std::string& bytes);

}  // namespace ckspectra
