#include "bassl/crn.hpp"

#include "bassl/errors.hpp"
#include "json.hpp"

namespace bassl {

void validate_config(const CrnConfig& cfg) {
  if (cfg.L < 1) throw ConfigError("crn: L must be >= 1");
  if (cfg.H < 1 || cfg.A < 1 || cfg.H % cfg.A != 0) {
    throw ConfigError("crn: H (" + std::to_string(cfg.H) + ") must be a positive multiple of A (" +
                      std::to_string(cfg.A) + ")");
  }
  if (cfg.dropout_p < 0 || cfg.dropout_p >= 1) throw ConfigError("crn: dropout_p must be in [0,1)");
  if (cfg.K < 1) throw ConfigError("crn: K must be >= 1");
  if (cfg.D_e < 1) throw ConfigError("crn: D_e must be >= 1");
}

std::string crn_config_to_json(const CrnConfig& cfg) {
  nlohmann::json j;
  j["L"] = cfg.L;
  j["H"] = cfg.H;
  j["A"] = cfg.A;
  j["dropout_p"] = cfg.dropout_p;
  j["K"] = cfg.K;
  j["D_e"] = cfg.D_e;
  return j.dump();
}

CrnConfig crn_config_from_json(const std::string& json) {
  CrnConfig cfg;
  try {
    auto j = nlohmann::json::parse(json);
    cfg.L = j.at("L").get<int>();
    cfg.H = j.at("H").get<int>();
    cfg.A = j.at("A").get<int>();
    cfg.dropout_p = j.at("dropout_p").get<double>();
    cfg.K = j.at("K").get<int>();
    cfg.D_e = j.at("D_e").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt checkpoint config: " + std::string(e.what()));
  }
  validate_config(cfg);
  return cfg;
}

}  // namespace bassl
