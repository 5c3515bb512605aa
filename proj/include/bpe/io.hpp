#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bpe/mc.hpp"

namespace bpe {

inline constexpr const char* kToolVersion = "0.1.0";

/// Shortest round-trip text for a double ("%.17g"); inf/nan spelled out.
std::string format_double(double v);

inline constexpr const char* kExperimentCsvHeader = "k_or_param,point,stderr,ci_low,ci_high,trials,censored,reference_value";
void write_experiment_csv(std::ostream& os, const std::vector<ExperimentRow>& rows);

/// FNV-1a 64-bit over the canonical (sorted-key, compact) dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

nlohmann::json make_manifest(const std::string& command, const nlohmann::json& config, std::uint64_t seed,
                             double wall_time_seconds);

}  // namespace bpe
