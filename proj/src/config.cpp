#include "metarenewal/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "json.hpp"

namespace metarenewal {

namespace {

using json = nlohmann::json;

std::string where(const std::string& path) { return path.empty() ? "/" : path; }

std::string child(const std::string& path, const std::string& key) { return path + "/" + key; }

std::string child(const std::string& path, std::size_t index) { return path + "/" + std::to_string(index); }

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw config_error(where(path), what); }

void expect_object(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) known = known || it.key() == k;
    if (!known) {
      std::string list;
      for (const char* k : allowed) list += std::string(list.empty() ? "" : ", ") + k;
      fail(child(path, it.key()), "unknown key '" + it.key() + "' (expected one of: " + list + ")");
    }
  }
}

const json& required(const json& j, const std::string& path, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) fail(path, std::string("missing required key '") + key + "'");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "expected a finite number");
  return v;
}

double positive(const json& j, const std::string& path) {
  double v = number(j, path);
  if (!(v > 0.0)) fail(path, "expected a positive number");
  return v;
}

long long integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<long long>();
}

const json& array(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array");
  return j;
}

std::vector<std::pair<double, double>> pairs(const json& j, const std::string& path) {
  std::vector<std::pair<double, double>> out;
  std::size_t i = 0;
  for (const auto& e : array(j, path)) {
    auto p = child(path, i++);
    if (!e.is_array() || e.size() != 2) fail(p, "expected a pair [x, value]");
    out.push_back({number(e[0], child(p, std::size_t{0})), number(e[1], child(p, std::size_t{1}))});
  }
  return out;
}

template <class F>
auto guarded(const std::string& path, F&& build) {
  try {
    return build();
  } catch (const config_error&) {
    throw;
  } catch (const error& e) {
    fail(path, e.what());
  }
}

rate_function parse_rate(const json& j, const std::string& path) {
  if (j.is_number()) return rate_function::constant(number(j, path));
  if (!j.is_object()) fail(path, "expected a number or a rate object");
  const json& type = required(j, path, "type");
  if (!type.is_string()) fail(child(path, "type"), "expected a string");
  const auto t = type.get<std::string>();
  return guarded(path, [&] {
    if (t == "constant") {
      expect_object(j, path, {"type", "value"});
      return rate_function::constant(number(required(j, path, "value"), child(path, "value")));
    }
    if (t == "window") {
      expect_object(j, path, {"type", "from", "to", "value"});
      return rate_function::window(number(required(j, path, "from"), child(path, "from")),
                                   number(required(j, path, "to"), child(path, "to")),
                                   number(required(j, path, "value"), child(path, "value")));
    }
    if (t == "piecewise_linear") {
      expect_object(j, path, {"type", "knots"});
      return rate_function::piecewise_linear(pairs(required(j, path, "knots"), child(path, "knots")));
    }
    if (t == "separable") {
      expect_object(j, path, {"type", "age", "period", "samples"});
      auto age = parse_rate(required(j, path, "age"), child(path, "age"));
      periodic_modulation mod(positive(required(j, path, "period"), child(path, "period")),
                              pairs(required(j, path, "samples"), child(path, "samples")));
      return rate_function::separable(age, std::move(mod));
    }
    fail(child(path, "type"), "unknown rate type '" + t + "' (expected constant, window, piecewise_linear, separable)");
  });
}

mortality_law parse_mortality(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected a mortality object");
  const json& law = required(j, path, "law");
  if (!law.is_string()) fail(child(path, "law"), "expected a string");
  const auto l = law.get<std::string>();
  auto rate = [&](const char* key) { return parse_rate(required(j, path, key), child(path, key)); };
  return guarded(path, [&] {
    if (l == "logistic") {
      expect_object(j, path, {"law", "mu", "capacity"});
      return mortality_law::logistic(rate("mu"), rate("capacity"));
    }
    if (l == "power") {
      expect_object(j, path, {"law", "mu", "p", "gamma"});
      return mortality_law::power_law(rate("mu"), rate("p"), positive(required(j, path, "gamma"), child(path, "gamma")));
    }
    if (l == "linear") {
      expect_object(j, path, {"law", "mu"});
      return mortality_law::linear(rate("mu"));
    }
    fail(child(path, "law"), "unknown mortality law '" + l + "' (expected logistic, power, linear)");
  });
}

dispersal_matrix parse_dispersal(const json& j, const std::string& path, std::size_t n) {
  if (!j.is_array() || j.size() != n) fail(path, "expected " + std::to_string(n) + " rows");
  std::vector<rate_function> entries;
  for (std::size_t k = 0; k < n; ++k) {
    auto row = child(path, k);
    if (!j[k].is_array() || j[k].size() != n) fail(row, "expected " + std::to_string(n) + " entries");
    for (std::size_t i = 0; i < n; ++i) entries.push_back(parse_rate(j[k][i], child(row, i)));
  }
  return dispersal_matrix(n, std::move(entries));
}

model_spec parse_model(const json& j, const std::string& path) {
  expect_object(j, path, {"lifespan", "fertility_window", "patches", "dispersal"});
  double b = positive(required(j, path, "lifespan"), child(path, "lifespan"));
  auto wpath = child(path, "fertility_window");
  const json& w = required(j, path, "fertility_window");
  if (!w.is_array() || w.size() != 2) fail(wpath, "expected [a_m, A_m]");
  double lo = number(w[0], child(wpath, std::size_t{0})), hi = number(w[1], child(wpath, std::size_t{1}));

  auto ppath = child(path, "patches");
  const json& patches = array(required(j, path, "patches"), ppath);
  if (patches.empty()) fail(ppath, "at least one patch is required");
  std::vector<rate_function> birth, initial;
  std::vector<mortality_law> mortality;
  for (std::size_t k = 0; k < patches.size(); ++k) {
    auto p = child(ppath, k);
    expect_object(patches[k], p, {"birth", "mortality", "initial"});
    birth.push_back(parse_rate(required(patches[k], p, "birth"), child(p, "birth")));
    mortality.push_back(parse_mortality(required(patches[k], p, "mortality"), child(p, "mortality")));
    initial.push_back(patches[k].contains("initial") ? parse_rate(patches[k]["initial"], child(p, "initial"))
                                                     : rate_function::constant(0.0));
  }
  const std::size_t n = patches.size();
  dispersal_matrix d = j.contains("dispersal") ? parse_dispersal(j["dispersal"], child(path, "dispersal"), n)
                                               : dispersal_matrix(n);
  return guarded(path, [&] {
    return model_spec(n, b, lo, hi, std::move(birth), std::move(mortality), std::move(d), std::move(initial));
  });
}

// envelope models share lifespan, fertility window and initial data with the model
model_spec parse_bound(const json& j, const std::string& path, const model_spec& model) {
  expect_object(j, path, {"patches", "dispersal"});
  const std::size_t n = model.patches();
  auto birth = model.birth();
  auto mortality = model.mortality();
  if (j.contains("patches")) {
    auto ppath = child(path, "patches");
    const json& patches = array(j["patches"], ppath);
    if (patches.size() != n) fail(ppath, "expected " + std::to_string(n) + " patches");
    for (std::size_t k = 0; k < n; ++k) {
      auto p = child(ppath, k);
      expect_object(patches[k], p, {"birth", "mortality"});
      if (patches[k].contains("birth")) birth[k] = parse_rate(patches[k]["birth"], child(p, "birth"));
      if (patches[k].contains("mortality"))
        mortality[k] = parse_mortality(patches[k]["mortality"], child(p, "mortality"));
    }
  }
  dispersal_matrix d =
      j.contains("dispersal") ? parse_dispersal(j["dispersal"], child(path, "dispersal"), n) : model.dispersal();
  return guarded(path, [&] {
    return model.with_birth(std::move(birth)).with_mortality(std::move(mortality)).with_dispersal(std::move(d));
  });
}

run_settings parse_settings(const json& j, const std::string& path) {
  expect_object(j, path,
                {"da", "tol", "t_end", "phase_nodes", "max_iter", "margin", "check_from", "check_eps", "decay_tol"});
  run_settings s;
  auto opt = [&](const char* key, double& out, bool strictly_positive) {
    if (!j.contains(key)) return;
    out = strictly_positive ? positive(j[key], child(path, key)) : number(j[key], child(path, key));
    if (out < 0.0) fail(child(path, key), "expected a nonnegative number");
  };
  opt("da", s.da, true);
  opt("tol", s.tol, true);
  opt("margin", s.margin, false);
  opt("check_from", s.check_from, false);
  opt("check_eps", s.check_eps, true);
  opt("decay_tol", s.decay_tol, true);
  if (j.contains("t_end")) s.t_end = positive(j["t_end"], child(path, "t_end"));
  if (j.contains("phase_nodes")) {
    auto p = integer(j["phase_nodes"], child(path, "phase_nodes"));
    if (p < 1) fail(child(path, "phase_nodes"), "expected a positive integer");
    s.phase_nodes = static_cast<std::size_t>(p);
  }
  if (j.contains("max_iter")) {
    auto m = integer(j["max_iter"], child(path, "max_iter"));
    if (m < 0) fail(child(path, "max_iter"), "expected a nonnegative integer");
    s.max_iter = static_cast<int>(m);
  }
  return s;
}

std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

run_config parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    auto [line, col] = line_column(text, e.byte);
    std::string msg = e.what();
    auto pos = msg.find(": ");
    if (pos != std::string::npos) msg = msg.substr(pos + 2);
    throw config_error("line " + std::to_string(line) + ", column " + std::to_string(col), msg);
  }
  expect_object(root, "", {"version", "model", "settings", "envelope", "perturbation", "output"});
  auto version = integer(required(root, "", "version"), "/version");
  if (version != config_version) fail("/version", "unsupported config version " + std::to_string(version));

  run_config c{static_cast<int>(version), parse_model(required(root, "", "model"), "/model"), {}, {}, {}, {}};
  if (root.contains("settings")) c.settings = parse_settings(root["settings"], "/settings");
  c.settings.eps_ladder = {0.02, 0.01, 0.005};

  if (root.contains("envelope")) {
    const json& e = root["envelope"];
    expect_object(e, "/envelope", {"onset", "lower", "upper"});
    double onset = e.contains("onset") ? number(e["onset"], "/envelope/onset") : 0.0;
    if (onset < 0.0) fail("/envelope/onset", "expected a nonnegative number");
    c.envelope = envelope_pair{parse_bound(required(e, "/envelope", "lower"), "/envelope/lower", c.model),
                               parse_bound(required(e, "/envelope", "upper"), "/envelope/upper", c.model), onset};
  }
  if (root.contains("perturbation")) {
    const json& p = root["perturbation"];
    expect_object(p, "/perturbation", {"direction", "eps"});
    c.perturbation = parse_dispersal(required(p, "/perturbation", "direction"), "/perturbation/direction",
                                     c.model.patches());
    if (p.contains("eps")) {
      c.settings.eps_ladder.clear();
      const json& eps = array(p["eps"], "/perturbation/eps");
      for (std::size_t i = 0; i < eps.size(); ++i)
        c.settings.eps_ladder.push_back(positive(eps[i], child("/perturbation/eps", i)));
      if (c.settings.eps_ladder.empty()) fail("/perturbation/eps", "expected at least one value");
    }
  }
  if (root.contains("output")) {
    const json& o = root["output"];
    expect_object(o, "/output", {"dir"});
    if (o.contains("dir")) {
      if (!o["dir"].is_string()) fail("/output/dir", "expected a string");
      c.output_dir = o["dir"].get<std::string>();
    }
  }
  return c;
}

run_config load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error(path, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace metarenewal
