#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "lpvds/composer.hpp"
#include "lpvds/gmm.hpp"
#include "lpvds/interconnection.hpp"
#include "lpvds/report.hpp"
#include "lpvds/simulator.hpp"
#include "lpvds/subsystem.hpp"

namespace lpvds {

nlohmann::json to_json(const GmmModel& m);
GmmModel gmm_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SubsystemModel& m);
SubsystemModel subsystem_from_json(const nlohmann::json& j);

nlohmann::json to_json(const InterconnectionSpec& spec);
InterconnectionSpec interconnection_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ComposedModel& m);
ComposedModel composed_from_json(const nlohmann::json& j);

nlohmann::json to_json(const CertificateReport& r);
nlohmann::json to_json(const Rollout& r);

/// Canonical text form (sorted keys, two-space indent, trailing newline);
/// identical models produce identical bytes.
std::string canonical_dump(const nlohmann::json& j);

void save_json(const nlohmann::json& j, const std::string& path);
nlohmann::json load_json_file(const std::string& path);

void save_composed(const ComposedModel& m, const std::string& path);
ComposedModel load_composed(const std::string& path);

}  // namespace lpvds
