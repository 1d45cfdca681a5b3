#include "fedcf/report.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace fedcf {

namespace {

using nlohmann::json;

json to_json(const HyperParams& p) {
  const auto& log = p.to_log();
  return {{"sigma0", p.sigma0()},
          {"length_scale", p.length_scale()},
          {"sigma_eps", p.sigma_eps()},
          {"log", {log[0], log[1], log[2]}}};
}

json to_json(const ArmResult& a) {
  return {{"arm", a.arm},
          {"params", to_json(a.params)},
          {"rmse", a.rmse},
          {"coverage", a.coverage},
          {"prediction", a.prediction},
          {"variance", a.variance}};
}

json history_json(const FederationHistory& h) {
  json rounds = json::array();
  for (std::size_t s = 0; s < h.rounds.size(); ++s) {
    const auto& r = h.rounds[s];
    json locals = json::array();
    for (const auto& p : r.locals) locals.push_back(to_json(p));
    rounds.push_back({{"round", s + 1},
                      {"global", to_json(r.global)},
                      {"locals", locals},
                      {"local_nlml", r.local_nlml},
                      {"global_nlml", r.global_nlml},
                      {"weighted_global_nlml", h.weighted_global_nlml(s)}});
  }
  return {{"vehicle_ids", h.vehicle_ids}, {"alphas", h.alphas}, {"rounds", rounds}};
}

}  // namespace

std::string report_to_json(const ExperimentReport& report) {
  json doc;
  doc["experiment"] = report.experiment;
  doc["config"] = report.config_echo.empty() ? json::object()
                                             : json::parse(report.config_echo);
  if (report.federated_global) doc["federated_global"] = to_json(*report.federated_global);
  if (report.pooled) doc["pooled"] = to_json(*report.pooled);

  json rounds = json::array();
  for (std::size_t s = 0; s < report.rounds.size(); ++s) {
    rounds.push_back({{"round", s + 1},
                      {"global", to_json(report.rounds[s].global)},
                      {"weighted_global_nlml", report.rounds[s].weighted_global_nlml}});
  }
  doc["rounds"] = rounds;

  json vehicles = json::array();
  json table = json::object();
  for (const auto& v : report.vehicles) {
    json arms = json::array();
    for (const auto& a : v.arms) {
      arms.push_back(to_json(a));
      table[a.arm][v.vehicle_id] = a.rmse;
    }
    vehicles.push_back({{"vehicle_id", v.vehicle_id},
                        {"scenario", v.scenario},
                        {"train_size", v.train_size},
                        {"test",
                         {{"dt", v.test.dt},
                          {"leader_speed", v.test.leader_speed},
                          {"true_speed", v.test.follower_speed}}},
                        {"arms", arms}});
  }
  doc["vehicles"] = vehicles;
  doc["rmse_table"] = table;
  return doc.dump(2) + "\n";
}

std::string timings_to_json(const ExperimentReport& report) {
  json doc = json::array();
  for (const auto& [stage, seconds] : report.timings) {
    doc.push_back({{"stage", stage}, {"seconds", seconds}});
  }
  return doc.dump(2) + "\n";
}

std::string params_document(const HyperParams& params, const std::string& mode,
                            const FederationHistory* history) {
  json doc{{"mode", mode}, {"params", to_json(params)}};
  if (history) doc["history"] = history_json(*history);
  return doc.dump(2) + "\n";
}

HyperParams params_from_document(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("parameter file: malformed JSON: ") + e.what());
  }
  const json& p = doc.contains("params") ? doc.at("params") : doc;
  try {
    if (p.contains("log")) {
      const auto& l = p.at("log");
      return HyperParams::from_log({l.at(0).get<double>(), l.at(1).get<double>(),
                                    l.at(2).get<double>()});
    }
    return HyperParams(p.at("sigma0").get<double>(), p.at("length_scale").get<double>(),
                       p.at("sigma_eps").get<double>());
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("parameter file: ") + e.what());
  }
}

HyperParams load_params_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot read parameter file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return params_from_document(buf.str());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace fedcf
