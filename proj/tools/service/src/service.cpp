#include "jointrait_service/service.hpp"

#include <jointrait/error.hpp>

#include "jointrait_service/json_api.hpp"

namespace jointrait::service {

namespace {

using nlohmann::json;

Response reply(int status, const json& body) { return {status, dump(body)}; }

Response error(int status, const std::string& message) { return reply(status, {{"error", message}}); }

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::string cur;
  const auto end = path.find('?');
  for (char c : path.substr(0, end)) {
    if (c == '/') {
      if (!cur.empty()) parts.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) parts.push_back(std::move(cur));
  return parts;
}

}  // namespace

Response Service::handle(const std::string& method, const std::string& path, const std::string& body) const {
  const auto parts = split_path(path);
  if (parts.empty() || parts[0] != "models" || parts.size() > 3 || (parts.size() == 3 && parts[2] != "predict"))
    return error(404, "no such route");
  const std::string want = parts.size() == 3 ? "POST" : "GET";
  if (method != want) return error(405, "use " + want + " for this route");
  if (store_.loading()) return error(503, "model store is loading");

  if (parts.size() == 1) {
    auto models = json::array();
    for (const auto& a : store_.all()) models.push_back(manifest_json(*a));
    return reply(200, {{"models", models}});
  }
  const auto archive = store_.find(parts[1]);
  if (!archive) return error(404, "unknown model '" + parts[1] + "'");
  if (parts.size() == 2) return reply(200, model_detail_json(*archive));

  json parsed;
  try {
    parsed = json::parse(body);
  } catch (const json::parse_error& e) {
    return error(400, std::string("body is not valid JSON: ") + e.what());
  }
  try {
    const auto request = request_from_json(parsed, archive->spec);
    return reply(200, run_prediction(*archive, request));
  } catch (const DataError& e) {
    return reply(422, {{"error", "invalid prediction request"},
                       {"model_id", archive->id},
                       {"fields", json::array({{{"field", e.field()}, {"message", e.message()}}})}});
  } catch (const std::exception& e) {
    return reply(500, {{"error", e.what()}, {"model_id", archive->id}});
  }
}

}  // namespace jointrait::service
