#include "tworld/specs.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "tworld/analytic.hpp"
#include "tworld/remote.hpp"

namespace tworld {

namespace {

struct Spec {
  std::string kind;
  std::map<std::string, std::string> params;
};

Spec parse_spec(const std::string& text) {
  Spec spec;
  const auto colon = text.find(':');
  spec.kind = text.substr(0, colon);
  if (colon == std::string::npos) return spec;
  std::string rest = text.substr(colon + 1);
  // Commands keep their own ';' and '=' characters.
  if (spec.kind == "remote" && rest.rfind("cmd=", 0) == 0) {
    spec.params["cmd"] = rest.substr(4);
    return spec;
  }
  std::istringstream ss(rest);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ParseError("spec \"" + text + "\": expected key=value, got \"" + item + "\"");
    spec.params[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return spec;
}

double to_double(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ParseError("invalid number \"" + text + "\" for " + what);
  }
}

std::vector<double> to_doubles(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::istringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(item, what));
  if (out.empty()) throw ParseError("empty list for " + what);
  return out;
}

void reject_unknown(const Spec& spec, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : spec.params) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ParseError("unknown parameter \"" + key + "\" for " + spec.kind);
  }
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed JSON in " + path + ": " + e.what());
  }
}

Pattern parse_pattern(const std::string& text) {
  const auto eq = text.find('=');
  const std::string kind = text.substr(0, eq);
  const std::string value = eq == std::string::npos ? "" : text.substr(eq + 1);
  if (kind == "constant") return {Pattern::Kind::Constant, to_double(value, "constant pattern"), 0.0};
  if (kind == "border") {
    const auto v = to_doubles(value, "border pattern");
    if (v.size() != 2) throw ParseError("border pattern takes interior,edge");
    return {Pattern::Kind::Border, v[0], v[1]};
  }
  throw ParseError("unknown pattern \"" + text + "\"");
}

}  // namespace

std::unique_ptr<Denoiser> make_denoiser(const std::string& text) {
  const Spec spec = parse_spec(text);
  if (spec.kind == "zero") return std::make_unique<ZeroDenoiser>();
  if (spec.kind == "point") {
    reject_unknown(spec, {"mu", "uncond", "table"});
    std::optional<double> fallback;
    std::map<std::string, double> entries;
    if (auto it = spec.params.find("mu"); it != spec.params.end()) fallback = to_double(it->second, "mu");
    if (auto it = spec.params.find("uncond"); it != spec.params.end()) entries[""] = to_double(it->second, "uncond");
    if (auto it = spec.params.find("table"); it != spec.params.end()) {
      const nlohmann::json table = load_json(it->second);
      for (const auto& [cond, value] : table.items()) {
        if (!value.is_number()) throw ParseError("target for \"" + cond + "\" must be a number");
        entries[cond] = value.get<double>();
      }
    }
    if (!fallback && entries.empty()) throw ParseError("point denoiser needs mu= or table=");
    return std::make_unique<PointTargetDenoiser>(TargetTable(fallback, std::move(entries)));
  }
  if (spec.kind == "mixture") {
    reject_unknown(spec, {"pi", "mu"});
    if (!spec.params.count("mu")) throw ParseError("mixture denoiser needs mu=");
    const auto mu = to_doubles(spec.params.at("mu"), "mu");
    std::vector<double> pi(mu.size(), 1.0 / double(mu.size()));
    if (spec.params.count("pi")) pi = to_doubles(spec.params.at("pi"), "pi");
    if (pi.size() != mu.size()) throw ParseError("mixture pi and mu lists differ in length");
    std::vector<MixtureComponent> comps;
    for (std::size_t k = 0; k < mu.size(); ++k) comps.push_back({pi[k], mu[k]});
    return std::make_unique<MixtureDenoiser>(std::move(comps));
  }
  if (spec.kind == "pattern") {
    reject_unknown(spec, {"constant", "border", "table"});
    std::optional<Pattern> fallback;
    std::map<std::string, Pattern> table;
    if (spec.params.count("constant")) fallback = parse_pattern("constant=" + spec.params.at("constant"));
    if (spec.params.count("border")) fallback = parse_pattern("border=" + spec.params.at("border"));
    if (auto it = spec.params.find("table"); it != spec.params.end()) {
      const nlohmann::json patterns = load_json(it->second);
      for (const auto& [cond, value] : patterns.items()) {
        if (!value.is_string()) throw ParseError("pattern for \"" + cond + "\" must be a string");
        table[cond] = parse_pattern(value.get<std::string>());
      }
    }
    if (!fallback && table.empty()) throw ParseError("pattern denoiser needs constant=, border= or table=");
    return std::make_unique<PatternDenoiser>(std::move(table), fallback);
  }
  if (spec.kind == "remote") {
    reject_unknown(spec, {"cmd", "tcp", "timeout"});
    std::chrono::milliseconds timeout = std::chrono::seconds(60);
    if (spec.params.count("timeout"))
      timeout = std::chrono::milliseconds(std::int64_t(1000.0 * to_double(spec.params.at("timeout"), "timeout")));
    if (spec.params.count("cmd")) return std::make_unique<RemoteDenoiser>(LineChannel::spawn(spec.params.at("cmd")), timeout);
    if (spec.params.count("tcp"))
      return std::make_unique<RemoteDenoiser>(LineChannel::connect_tcp(spec.params.at("tcp")), timeout);
    throw ParseError("remote denoiser needs cmd= or tcp=");
  }
  throw ParseError("unknown denoiser \"" + text + "\"");
}

std::unique_ptr<Decoder> make_decoder(const std::string& text, int input_channels) {
  const Spec spec = parse_spec(text);
  if (spec.kind == "identity") return std::make_unique<IdentityDecoder>();
  if (spec.kind == "ramp") {
    reject_unknown(spec, {"slope"});
    return std::make_unique<LocalRampDecoder>(spec.params.count("slope") ? to_double(spec.params.at("slope"), "slope") : 0.5);
  }
  if (spec.kind == "rgb") {
    // First three channels pass through; fewer channels are replicated.
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(3, input_channels);
    for (int r = 0; r < 3; ++r) w(r, std::min(r, input_channels - 1)) = 1.0;
    return std::make_unique<LinearDecoder>(std::move(w), Eigen::VectorXd::Zero(3));
  }
  if (spec.kind == "linear") {
    reject_unknown(spec, {"w", "b"});
    if (!spec.params.count("w")) throw ParseError("linear decoder needs w=");
    std::vector<std::vector<double>> rows;
    std::istringstream ss(spec.params.at("w"));
    std::string row;
    while (std::getline(ss, row, '/')) rows.push_back(to_doubles(row, "w"));
    Eigen::MatrixXd w(Eigen::Index(rows.size()), Eigen::Index(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != rows.front().size()) throw ParseError("linear decoder rows differ in length");
      for (std::size_t c = 0; c < rows[r].size(); ++c) w(Eigen::Index(r), Eigen::Index(c)) = rows[r][c];
    }
    Eigen::VectorXd b = Eigen::VectorXd::Zero(w.rows());
    if (spec.params.count("b")) {
      const auto bias = to_doubles(spec.params.at("b"), "b");
      if (Eigen::Index(bias.size()) != w.rows()) throw ParseError("linear decoder bias length must match rows");
      b = Eigen::Map<const Eigen::VectorXd>(bias.data(), w.rows());
    }
    if (w.cols() != input_channels)
      throw ParseError("linear decoder has " + std::to_string(w.cols()) + " columns but the world has " +
                       std::to_string(input_channels) + " channels");
    return std::make_unique<LinearDecoder>(std::move(w), std::move(b));
  }
  throw ParseError("unknown decoder \"" + text + "\"");
}

std::unique_ptr<Decoder> make_structure_decoder(const std::string& text, int input_channels) {
  const Spec spec = parse_spec(text);
  if (spec.kind != "affine") throw ParseError("unknown structure decoder \"" + text + "\"");
  reject_unknown(spec, {"w", "b", "up"});
  Eigen::MatrixXd w = Eigen::MatrixXd::Constant(1, input_channels, 1.0 / input_channels);
  if (spec.params.count("w")) {
    const auto v = to_doubles(spec.params.at("w"), "w");
    if (int(v.size()) != input_channels) throw ParseError("structure decoder weights must match the channel count");
    w = Eigen::Map<const Eigen::MatrixXd>(v.data(), 1, input_channels);
  }
  Eigen::VectorXd b = Eigen::VectorXd::Zero(1);
  if (spec.params.count("b")) b[0] = to_double(spec.params.at("b"), "b");
  int up = 4;
  if (spec.params.count("up")) up = int(to_double(spec.params.at("up"), "up"));
  return std::make_unique<LinearDecoder>(std::move(w), std::move(b), up);
}

}  // namespace tworld
