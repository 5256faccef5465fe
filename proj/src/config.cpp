#include "emlq/config.hpp"

#include "emlq/csv.hpp"
#include "emlq/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

namespace emlq {

namespace {

using Mat = Eigen::MatrixXd;

struct Entry {
  std::string key, value;
  int line = 0;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const Entry& e, const std::string& what) {
  std::ostringstream msg;
  msg << "config line " << e.line << " (" << e.key << "): " << what;
  throw ConfigError(msg.str());
}

double parse_double(const std::string& text, bool* ok) {
  const std::string t = trim(text);
  double v = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (!t.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  *ok = !t.empty() && res.ec == std::errc() && res.ptr == last;
  return v;
}

double number(const Entry& e) {
  bool ok = false;
  const double v = parse_double(e.value, &ok);
  if (!ok || !std::isfinite(v)) fail(e, "expected a finite number, got '" + e.value + "'");
  return v;
}

long long integer(const Entry& e, long long lo) {
  const double v = number(e);
  if (v != std::floor(v) || v < static_cast<double>(lo) || v > 9.0e15)
    fail(e, "expected an integer >= " + std::to_string(lo));
  return static_cast<long long>(v);
}

bool boolean(const Entry& e) {
  if (e.value == "true" || e.value == "1") return true;
  if (e.value == "false" || e.value == "0") return false;
  fail(e, "expected true or false");
}

Mat matrix(const Entry& e) {
  try {
    return parse_matrix(e.value);
  } catch (const ConfigError& err) {
    fail(e, err.what());
  }
}

Eigen::VectorXd vector_of(const Entry& e, int size) {
  const Mat m = matrix(e);
  if (m.size() != size || (m.rows() != 1 && m.cols() != 1))
    fail(e, "expected a vector of length " + std::to_string(size));
  return Eigen::Map<const Eigen::VectorXd>(m.data(), size);
}

const std::set<std::string>& common_keys() {
  static const std::set<std::string> k = {
      "scenario", "T",         "dt",       "paths",      "seed",        "threads",
      "noise_free", "tol",     "max_iter", "damping",    "theta",       "star",
      "cond_cap", "reg_scale", "adjoint_form", "assumption_tol"};
  return k;
}

const std::set<std::string>& advertising_keys() {
  static const std::set<std::string> k = {
      "lambda_m", "lambda_r", "delta", "tau",     "tau1",    "tau2", "mu_m",
      "mu_r",     "pi_m",     "pi_r",  "sigma_m", "sigma_r", "m1",   "m2",
      "c1",       "d1",       "d2",    "lbar1",   "lbar2",   "x0"};
  return k;
}

const std::set<std::string>& raw_keys() {
  static const std::set<std::string> k = {
      "n",  "k1", "k2", "a1",    "a2",    "c1", "c2", "b1", "d1", "b2", "d2",
      "l1", "l2", "lbar1", "lbar2", "r1", "r2", "g1", "g2", "x0", "u2"};
  return k;
}

const std::set<std::string>& block_keys() {
  static const std::set<std::string> k = {"A1", "A2", "Abar1", "Abar2", "B",  "C",  "Cbar",
                                          "H",  "D",  "Dbar",  "G1",    "G2", "xi3"};
  return k;
}

void apply_common(RunConfig& cfg, const Entry& e) {
  const std::string& k = e.key;
  if (k == "scenario") return;
  if (k == "T") {
    cfg.horizon = number(e);
  } else if (k == "dt") {
    cfg.dt = number(e);
  } else if (k == "paths") {
    cfg.paths = static_cast<int>(std::min<long long>(integer(e, 1), 1LL << 30));
  } else if (k == "seed") {
    cfg.seed = static_cast<std::uint64_t>(integer(e, 0));
  } else if (k == "threads") {
    cfg.threads = static_cast<int>(std::min<long long>(integer(e, 1), 1024));
  } else if (k == "noise_free") {
    cfg.noise_free = boolean(e);
  } else if (k == "tol") {
    cfg.solver.tol = number(e);
  } else if (k == "max_iter") {
    cfg.solver.max_iter = static_cast<int>(std::min<long long>(integer(e, 1), 1LL << 30));
  } else if (k == "damping") {
    cfg.solver.damping = number(e);
  } else if (k == "theta") {
    cfg.solver.theta = parse_theta(e.value);
  } else if (k == "star") {
    try {
      cfg.adjoint.star = parse_star_variant(e.value);
    } catch (const ConfigError& err) {
      fail(e, err.what());
    }
  } else if (k == "cond_cap") {
    cfg.solver.cond_cap = number(e);
  } else if (k == "reg_scale") {
    cfg.adjoint.reg_scale = number(e);
  } else if (k == "adjoint_form") {
    if (e.value == "exact")
      cfg.adjoint.form = AdjointForm::ExactAdjoint;
    else if (e.value == "product")
      cfg.adjoint.form = AdjointForm::ProductOfStars;
    else
      fail(e, "expected exact or product");
  } else if (k == "assumption_tol") {
    cfg.assumption_tol = number(e);
  }
}

void apply_advertising(RunConfig& cfg, const Entry& e) {
  AdvertisingScenario& s = cfg.advertising;
  static const std::map<std::string, double AdvertisingScenario::*> fields = {
      {"lambda_m", &AdvertisingScenario::lambda_m}, {"lambda_r", &AdvertisingScenario::lambda_r},
      {"delta", &AdvertisingScenario::delta},       {"tau", &AdvertisingScenario::tau},
      {"tau1", &AdvertisingScenario::tau1},         {"tau2", &AdvertisingScenario::tau2},
      {"mu_m", &AdvertisingScenario::mu_m},         {"mu_r", &AdvertisingScenario::mu_r},
      {"pi_m", &AdvertisingScenario::pi_m},         {"pi_r", &AdvertisingScenario::pi_r},
      {"sigma_m", &AdvertisingScenario::sigma_m},   {"sigma_r", &AdvertisingScenario::sigma_r},
      {"m1", &AdvertisingScenario::m1},             {"m2", &AdvertisingScenario::m2},
      {"c1", &AdvertisingScenario::c1},             {"d1", &AdvertisingScenario::d1},
      {"d2", &AdvertisingScenario::d2},             {"lbar1", &AdvertisingScenario::lbar1},
      {"lbar2", &AdvertisingScenario::lbar2},       {"x0", &AdvertisingScenario::x0}};
  if (e.key == "d1" && e.value == "auto") {
    s.d1 = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  s.*(fields.at(e.key)) = number(e);
}

void finish_raw(RunConfig& cfg, const std::vector<Entry>& entries) {
  std::map<std::string, const Entry*> by_key;
  for (const auto& e : entries) by_key[e.key] = &e;
  auto dim = [&](const char* key) {
    auto it = by_key.find(key);
    if (it == by_key.end()) throw ConfigError(std::string("raw scenario needs key ") + key);
    return static_cast<int>(std::min<long long>(integer(*it->second, 1), 100000));
  };
  const int n = dim("n"), k1 = dim("k1"), k2 = dim("k2");
  ConstantCoefficients& c = cfg.raw;
  struct Slot {
    const char* key;
    Mat ConstantCoefficients::*field;
    int rows, cols;
  };
  const Slot slots[] = {{"a1", &ConstantCoefficients::a1, n, n},
                        {"a2", &ConstantCoefficients::a2, n, n},
                        {"c1", &ConstantCoefficients::c1, n, n},
                        {"c2", &ConstantCoefficients::c2, n, n},
                        {"b1", &ConstantCoefficients::b1, n, k1},
                        {"d1", &ConstantCoefficients::d1, n, k1},
                        {"b2", &ConstantCoefficients::b2, n, k2},
                        {"d2", &ConstantCoefficients::d2, n, k2},
                        {"l1", &ConstantCoefficients::l1, n, n},
                        {"l2", &ConstantCoefficients::l2, n, n},
                        {"lbar1", &ConstantCoefficients::lbar1, n, n},
                        {"lbar2", &ConstantCoefficients::lbar2, n, n},
                        {"r1", &ConstantCoefficients::r1, k1, k1},
                        {"r2", &ConstantCoefficients::r2, k2, k2},
                        {"g1", &ConstantCoefficients::g1, n, n},
                        {"g2", &ConstantCoefficients::g2, n, n}};
  for (const Slot& s : slots) {
    Mat& m = c.*(s.field);
    m = Mat::Zero(s.rows, s.cols);
    auto it = by_key.find(s.key);
    if (it == by_key.end()) continue;
    const Entry& e = *it->second;
    if (e.key == std::string("lbar1") && e.value == "auto") {
      cfg.lbar1_auto = true;
      continue;
    }
    const Mat v = matrix(e);
    if (v.rows() != s.rows || v.cols() != s.cols) {
      std::ostringstream msg;
      msg << "expected " << s.rows << "x" << s.cols << ", got " << v.rows() << "x" << v.cols();
      fail(e, msg.str());
    }
    m = v;
  }
  c.x0 = Eigen::VectorXd::Zero(n);
  cfg.u2 = Eigen::VectorXd::Zero(k2);
  if (auto it = by_key.find("x0"); it != by_key.end()) c.x0 = vector_of(*it->second, n);
  if (auto it = by_key.find("u2"); it != by_key.end()) cfg.u2 = vector_of(*it->second, k2);
}

void finish_blocks(RunConfig& cfg, const std::vector<Entry>& entries) {
  std::map<std::string, const Entry*> by_key;
  for (const auto& e : entries) by_key[e.key] = &e;
  if (!by_key.count("A1")) throw ConfigError("blocks scenario needs key A1");
  if (!by_key.count("xi3")) throw ConfigError("blocks scenario needs key xi3");
  BlockSpec& b = cfg.blocks;
  b.A1 = matrix(*by_key["A1"]);
  b.xi3 = matrix(*by_key["xi3"]);
  const int dim = static_cast<int>(b.A1.rows());
  const int k2 = static_cast<int>(b.xi3.rows());
  if (b.A1.cols() != dim) fail(*by_key["A1"], "must be square");
  if (b.xi3.cols() != k2) fail(*by_key["xi3"], "must be square");
  struct Slot {
    const char* key;
    Mat BlockSpec::*field;
    int cols;
  };
  const Slot slots[] = {{"A2", &BlockSpec::A2, dim},     {"Abar1", &BlockSpec::Abar1, dim},
                        {"Abar2", &BlockSpec::Abar2, dim}, {"B", &BlockSpec::B, dim},
                        {"C", &BlockSpec::C, dim},       {"Cbar", &BlockSpec::Cbar, dim},
                        {"H", &BlockSpec::H, dim},       {"D", &BlockSpec::D, k2},
                        {"Dbar", &BlockSpec::Dbar, k2},  {"G1", &BlockSpec::G1, k2},
                        {"G2", &BlockSpec::G2, k2}};
  for (const Slot& s : slots) {
    Mat& m = b.*(s.field);
    m = Mat::Zero(dim, s.cols);
    auto it = by_key.find(s.key);
    if (it == by_key.end()) continue;
    const Mat v = matrix(*it->second);
    if (v.rows() != dim || v.cols() != s.cols) {
      std::ostringstream msg;
      msg << "expected " << dim << "x" << s.cols << ", got " << v.rows() << "x" << v.cols();
      fail(*it->second, msg.str());
    }
    m = v;
  }
}

}  // namespace

std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::Advertising: return "advertising";
    case ScenarioKind::Raw: return "raw";
    case ScenarioKind::Blocks: return "blocks";
  }
  return "?";
}

Eigen::MatrixXd parse_matrix(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::stringstream all(text);
  std::string row_text;
  while (std::getline(all, row_text, ';')) {
    std::replace(row_text.begin(), row_text.end(), ',', ' ');
    std::stringstream rs(row_text);
    std::vector<double> row;
    std::string tok;
    while (rs >> tok) {
      bool ok = false;
      const double v = parse_double(tok, &ok);
      if (!ok || !std::isfinite(v)) throw ConfigError("bad matrix entry '" + tok + "'");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows[0].empty()) throw ConfigError("empty matrix");
  const std::size_t cols = rows[0].size();
  for (const auto& r : rows)
    if (r.size() != cols) throw ConfigError("matrix rows have different lengths");
  Mat m(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rows[i][j];
  return m;
}

RunConfig parse_config(const std::string& text) {
  std::vector<Entry> entries;
  std::set<std::string> seen;
  std::stringstream in(text);
  std::string raw_line;
  int line_no = 0;
  while (std::getline(in, raw_line)) {
    ++line_no;
    const auto hash = raw_line.find('#');
    const std::string line = trim(hash == std::string::npos ? raw_line : raw_line.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      std::ostringstream msg;
      msg << "config line " << line_no << ": expected key = value";
      throw ConfigError(msg.str());
    }
    Entry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no};
    if (e.key.empty() || e.value.empty()) fail(e, "empty key or value");
    if (!seen.insert(e.key).second) fail(e, "key given twice");
    entries.push_back(std::move(e));
  }

  RunConfig cfg;
  bool horizon_set = false;
  for (const auto& e : entries) {
    if (e.key == "scenario") {
      if (e.value == "advertising")
        cfg.scenario = ScenarioKind::Advertising;
      else if (e.value == "raw")
        cfg.scenario = ScenarioKind::Raw;
      else if (e.value == "blocks")
        cfg.scenario = ScenarioKind::Blocks;
      else
        fail(e, "expected advertising, raw or blocks");
    }
    if (e.key == "T") horizon_set = true;
  }
  if (!horizon_set && cfg.scenario != ScenarioKind::Advertising) cfg.horizon = 1.0;

  const std::set<std::string>& own = cfg.scenario == ScenarioKind::Advertising ? advertising_keys()
                                     : cfg.scenario == ScenarioKind::Raw       ? raw_keys()
                                                                               : block_keys();
  for (const auto& e : entries) {
    if (common_keys().count(e.key)) {
      apply_common(cfg, e);
    } else if (own.count(e.key)) {
      if (cfg.scenario == ScenarioKind::Advertising) apply_advertising(cfg, e);
    } else {
      fail(e, "unknown key for scenario " + to_string(cfg.scenario));
    }
    cfg.entries[e.key] = e.value;
  }
  if (cfg.scenario == ScenarioKind::Raw) finish_raw(cfg, entries);
  if (cfg.scenario == ScenarioKind::Blocks) finish_blocks(cfg, entries);
  cfg.advertising.horizon = cfg.horizon;

  if (!(cfg.horizon > 0.0)) throw ConfigError("T must be positive");
  if (!(cfg.dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(cfg.solver.tol > 0.0)) throw ConfigError("tol must be positive");
  if (!(cfg.solver.damping > 0.0 && cfg.solver.damping <= 1.0))
    throw ConfigError("damping must lie in (0, 1]");
  if (!(cfg.solver.cond_cap > 1.0)) throw ConfigError("cond_cap must exceed 1");
  if (!(cfg.adjoint.reg_scale >= 0.0)) throw ConfigError("reg_scale must be >= 0");
  if (!(cfg.assumption_tol > 0.0)) throw ConfigError("assumption_tol must be positive");
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw ConfigError("cannot read config " + path);
  }
  return parse_config(text);
}

std::vector<std::pair<std::string, std::string>> describe(const RunConfig& cfg) {
  std::map<std::string, std::string> out = cfg.entries;
  out["scenario"] = to_string(cfg.scenario);
  out["T"] = format_number(cfg.horizon);
  out["dt"] = format_number(cfg.dt);
  out["paths"] = format_number(cfg.paths);
  out["seed"] = format_number(cfg.seed);
  out["noise_free"] = cfg.noise_free ? "true" : "false";
  out["tol"] = format_number(cfg.solver.tol);
  out["max_iter"] = format_number(cfg.solver.max_iter);
  out["damping"] = format_number(cfg.solver.damping);
  out["theta"] = cfg.solver.theta.label();
  out["star"] = to_string(cfg.adjoint.star);
  out["adjoint_form"] = cfg.adjoint.form == AdjointForm::ExactAdjoint ? "exact" : "product";
  out["cond_cap"] = format_number(cfg.solver.cond_cap);
  out["reg_scale"] = format_number(cfg.adjoint.reg_scale);
  out["assumption_tol"] = format_number(cfg.assumption_tol);
  // Thread count never changes results, so it is left out on purpose.
  out.erase("threads");
  return {out.begin(), out.end()};
}

}  // namespace emlq
