#include "sdhom/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "sdhom/approx.hpp"
#include "sdhom/field.hpp"
#include "sdhom/oracle.hpp"
#include "sdhom/surface_cell.hpp"

namespace sdh {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Schema helpers

std::string escape_token(const std::string& key) {
  std::string out;
  for (char ch : key) {
    if (ch == '~')
      out += "~0";
    else if (ch == '/')
      out += "~1";
    else
      out += ch;
  }
  return out;
}

std::string child(const std::string& ptr, const std::string& key) { return ptr + "/" + escape_token(key); }
std::string child(const std::string& ptr, std::size_t i) { return ptr + "/" + std::to_string(i); }

void require_object(const json& j, const std::string& ptr) {
  if (!j.is_object()) throw ConfigError(ptr, "expected an object");
}

void check_keys(const json& j, const std::string& ptr, const std::set<std::string>& allowed) {
  require_object(j, ptr);
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError(child(ptr, it.key()), "unknown key");
}

double number(const json& j, const std::string& ptr) {
  if (!j.is_number()) throw ConfigError(ptr, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(ptr, "expected a finite number");
  return v;
}

double positive(const json& j, const std::string& ptr) {
  const double v = number(j, ptr);
  if (!(v > 0.0)) throw ConfigError(ptr, "expected a positive number");
  return v;
}

std::int64_t integer(const json& j, const std::string& ptr, std::int64_t lo, std::int64_t hi) {
  if (!j.is_number_integer()) throw ConfigError(ptr, "expected an integer");
  const auto v = j.get<std::int64_t>();
  if (v < lo || v > hi)
    throw ConfigError(ptr, "expected an integer in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return v;
}

std::string string_of(const json& j, const std::string& ptr, const std::set<std::string>& choices) {
  if (!j.is_string()) throw ConfigError(ptr, "expected a string");
  const auto s = j.get<std::string>();
  if (!choices.empty() && !choices.count(s)) {
    std::string list;
    for (const auto& c : choices) list += (list.empty() ? "" : ", ") + c;
    throw ConfigError(ptr, "expected one of: " + list);
  }
  return s;
}

/// Matrix given as a number (1 x 1) or as an array of equal-length rows.
Mat matrix(const json& j, const std::string& ptr, int rows = -1, int cols = -1) {
  Mat m;
  if (j.is_number()) {
    m = Mat::scalar(number(j, ptr));
  } else if (j.is_array() && !j.empty() && j.size() <= kMaxDim) {
    const auto r = static_cast<int>(j.size());
    int c = -1;
    for (std::size_t i = 0; i < j.size(); ++i) {
      const json& row = j[i];
      if (!row.is_array() || row.empty() || row.size() > kMaxDim)
        throw ConfigError(child(ptr, i), "expected a row of 1 or 2 numbers");
      if (c >= 0 && static_cast<int>(row.size()) != c) throw ConfigError(child(ptr, i), "rows differ in length");
      c = static_cast<int>(row.size());
    }
    m = Mat(r, c);
    for (int a = 0; a < r; ++a)
      for (int b = 0; b < c; ++b)
        m(a, b) = number(j[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)],
                         child(child(ptr, static_cast<std::size_t>(a)), static_cast<std::size_t>(b)));
  } else {
    throw ConfigError(ptr, "expected a number or an array of rows");
  }
  if (rows >= 0 && (m.rows != rows || m.cols != cols))
    throw ConfigError(ptr, "expected a " + std::to_string(rows) + "x" + std::to_string(cols) + " matrix");
  return m;
}

Vec vector_of(const json& j, const std::string& ptr, int dim) {
  Vec v(dim);
  if (j.is_number() && dim == 1) {
    v[0] = number(j, ptr);
    return v;
  }
  if (!j.is_array() || static_cast<int>(j.size()) != dim)
    throw ConfigError(ptr, "expected an array of " + std::to_string(dim) + " numbers");
  for (int i = 0; i < dim; ++i) v[i] = number(j[static_cast<std::size_t>(i)], child(ptr, static_cast<std::size_t>(i)));
  return v;
}

template <typename T, typename F>
std::vector<T> list_of(const json& j, const std::string& ptr, F&& item) {
  if (!j.is_array() || j.empty()) throw ConfigError(ptr, "expected a nonempty array");
  std::vector<T> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(item(j[i], child(ptr, i)));
  return out;
}

json mat_json(const Mat& m) {
  json rows = json::array();
  for (int a = 0; a < m.rows; ++a) {
    json row = json::array();
    for (int b = 0; b < m.cols; ++b) row.push_back(m(a, b));
    rows.push_back(row);
  }
  return rows;
}

json vec_json(const Vec& v) {
  json out = json::array();
  for (int i = 0; i < v.dim; ++i) out.push_back(v[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Densities

json normalize_coefficient(const json& j, const std::string& ptr, const std::string& constant_key,
                           const std::set<std::string>& extra) {
  require_object(j, ptr);
  if (!j.contains("family")) throw ConfigError(child(ptr, "family"), "missing required key");
  const std::string family =
      string_of(j["family"], child(ptr, "family"), {"constant", "layered", "checkerboard", "trigonometric"});
  std::set<std::string> allowed = extra;
  allowed.insert("family");
  json out = {{"family", family}};
  if (family == "constant") {
    allowed.insert(constant_key);
    check_keys(j, ptr, allowed);
    out[constant_key] = j.contains(constant_key) ? positive(j[constant_key], child(ptr, constant_key)) : 1.0;
  } else if (family == "layered") {
    allowed.insert({"values", "axis"});
    check_keys(j, ptr, allowed);
    if (!j.contains("values")) throw ConfigError(child(ptr, "values"), "missing required key");
    out["values"] = list_of<double>(j["values"], child(ptr, "values"), positive);
    out["axis"] = j.contains("axis") ? integer(j["axis"], child(ptr, "axis"), 0, kMaxDim - 1) : 0;
  } else if (family == "checkerboard") {
    allowed.insert({"even", "odd", "cells"});
    check_keys(j, ptr, allowed);
    for (const char* key : {"even", "odd"}) {
      if (!j.contains(key)) throw ConfigError(child(ptr, key), "missing required key");
      out[key] = positive(j[key], child(ptr, key));
    }
    out["cells"] = j.contains("cells") ? integer(j["cells"], child(ptr, "cells"), 1, 1024) : 2;
  } else {
    allowed.insert({"mean", "amplitude"});
    check_keys(j, ptr, allowed);
    if (!j.contains("mean")) throw ConfigError(child(ptr, "mean"), "missing required key");
    const double mean = positive(j["mean"], child(ptr, "mean"));
    const double amp = j.contains("amplitude") ? number(j["amplitude"], child(ptr, "amplitude")) : 0.0;
    if (amp < 0.0 || amp >= mean) throw ConfigError(child(ptr, "amplitude"), "expected 0 <= amplitude < mean");
    out["mean"] = mean;
    out["amplitude"] = amp;
  }
  return out;
}

CoefficientField coefficient_from(const json& j, const std::string& constant_key) {
  const auto family = j["family"].get<std::string>();
  if (family == "constant") return CoefficientField::constant(j[constant_key].get<double>());
  if (family == "layered")
    return CoefficientField::layered(j["values"].get<std::vector<double>>(), j["axis"].get<int>());
  if (family == "checkerboard")
    return CoefficientField::checkerboard(j["even"].get<double>(), j["odd"].get<double>(), j["cells"].get<int>());
  return CoefficientField::trigonometric(j["mean"].get<double>(), j["amplitude"].get<double>());
}

json normalize_density(const json& j, const std::string& ptr) {
  check_keys(j, ptr, {"bulk", "surface"});
  for (const char* key : {"bulk", "surface"})
    if (!j.contains(key)) throw ConfigError(child(ptr, key), "missing required key");

  const std::string bp = child(ptr, "bulk");
  const json& b = j["bulk"];
  require_object(b, bp);
  json bulk = normalize_coefficient(b, bp, "a", {"p", "form", "well", "constants"});
  const double p = b.contains("p") ? number(b["p"], child(bp, "p")) : 2.0;
  if (!(p > 1.0 && p <= 4.0)) throw ConfigError(child(bp, "p"), "expected 1 < p <= 4");
  bulk["p"] = p;
  bulk["form"] = b.contains("form") ? string_of(b["form"], child(bp, "form"), {"power", "double_well"}) : "power";
  if (bulk["form"] == "double_well") {
    if (!b.contains("well")) throw ConfigError(child(bp, "well"), "missing required key for double_well");
    bulk["well"] = mat_json(matrix(b["well"], child(bp, "well")));
  } else if (b.contains("well")) {
    throw ConfigError(child(bp, "well"), "only allowed with form double_well");
  }
  if (b.contains("constants")) {
    const std::string cp = child(bp, "constants");
    check_keys(b["constants"], cp, {"C_W", "Cp_W", "cp_W"});
    json c = json::object();
    for (auto it = b["constants"].begin(); it != b["constants"].end(); ++it) {
      const double v = number(it.value(), child(cp, it.key()));
      if (v < 0.0) throw ConfigError(child(cp, it.key()), "expected a nonnegative number");
      c[it.key()] = v;
    }
    bulk["constants"] = c;
  }

  const std::string sp = child(ptr, "surface");
  const json& s = j["surface"];
  require_object(s, sp);
  json surface = normalize_coefficient(s, sp, "c", {"anisotropy"});
  const double eta = s.contains("anisotropy") ? number(s["anisotropy"], child(sp, "anisotropy")) : 0.0;
  if (eta < 0.0) throw ConfigError(child(sp, "anisotropy"), "expected a nonnegative number");
  surface["anisotropy"] = eta;
  return {{"bulk", bulk}, {"surface", surface}};
}

}  // namespace

Densities build_densities(const json& density, const std::string& pointer) {
  const json d = normalize_density(density, pointer);
  const json& b = d["bulk"];
  const CoefficientField a = coefficient_from(b, "a");
  const double p = b["p"].get<double>();
  BulkDensity w = b["form"] == "double_well" ? BulkDensity::double_well(a, matrix(b["well"], ""), p)
                                              : BulkDensity::power(a, p);
  if (b.contains("constants")) {
    BulkConstants c = w.constants();
    const json& cj = b["constants"];
    if (cj.contains("C_W")) c.upper = cj["C_W"].get<double>();
    if (cj.contains("Cp_W")) c.coercive = cj["Cp_W"].get<double>();
    if (cj.contains("cp_W")) c.coercive_shift = cj["cp_W"].get<double>();
    w.set_constants(c);
  }
  const json& s = d["surface"];
  return {w, SurfaceDensity(coefficient_from(s, "c"), s["anisotropy"].get<double>())};
}

// ---------------------------------------------------------------------------
// Config

ExperimentConfig parse_config(const json& j) {
  check_keys(j, "", {"kind", "density", "dims", "A", "B", "lambda", "nu", "tau", "k_list", "m", "solver", "seed",
                     "budget", "approx", "oracle", "out"});
  ExperimentConfig c;
  if (!j.contains("kind")) throw ConfigError("/kind", "missing required key");
  c.kind = string_of(j["kind"], "/kind", {"bulk", "surface", "approx", "validate", "oracle"});
  if (!j.contains("density")) throw ConfigError("/density", "missing required key");
  c.density = normalize_density(j["density"], "/density");

  if (j.contains("dims")) {
    check_keys(j["dims"], "/dims", {"N", "d"});
    if (j["dims"].contains("N")) c.N = static_cast<int>(integer(j["dims"]["N"], "/dims/N", 1, kMaxDim));
    if (j["dims"].contains("d")) c.d = static_cast<int>(integer(j["dims"]["d"], "/dims/d", 1, kMaxDim));
  }
  const int N = c.N;
  const int d = c.d;
  auto mat_item = [&](const json& v, const std::string& p) { return matrix(v, p, d, N); };
  auto lambda_item = [&](const json& v, const std::string& p) { return vector_of(v, p, d); };
  auto nu_item = [&](const json& v, const std::string& p) {
    Vec n = vector_of(v, p, N);
    try {
      rational_direction(n);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(p, e.what());
    }
    return n;
  };
  auto tau_item = [&](const json& v, const std::string& p) {
    Vec t = vector_of(v, p, N);
    for (int i = 0; i < N; ++i)
      if (t[i] < 0.0 || t[i] >= 1.0) throw ConfigError(child(p, static_cast<std::size_t>(i)), "expected a value in [0, 1)");
    return t;
  };
  if (j.contains("A")) c.A = list_of<Mat>(j["A"], "/A", mat_item);
  if (j.contains("B")) c.B = list_of<Mat>(j["B"], "/B", mat_item);
  if (j.contains("lambda")) c.lambda = list_of<Vec>(j["lambda"], "/lambda", lambda_item);
  if (j.contains("nu")) c.nu = list_of<Vec>(j["nu"], "/nu", nu_item);
  c.tau = j.contains("tau") ? list_of<Vec>(j["tau"], "/tau", tau_item) : std::vector<Vec>{Vec(N)};
  if (j.contains("k_list")) {
    c.k_list = list_of<int>(j["k_list"], "/k_list", [](const json& v, const std::string& p) {
      return static_cast<int>(integer(v, p, 1, 1024));
    });
    for (std::size_t i = 1; i < c.k_list.size(); ++i)
      if (c.k_list[i] <= c.k_list[i - 1]) throw ConfigError(child("/k_list", i), "k_list must be increasing");
  }
  if (j.contains("m")) c.m = static_cast<int>(integer(j["m"], "/m", 1, 4096));
  if (j.contains("solver")) {
    const json& s = j["solver"];
    check_keys(s, "/solver", {"tolerance", "max_iterations", "restarts", "max_sweeps", "sheet_moves"});
    if (s.contains("tolerance")) c.solver.tolerance = positive(s["tolerance"], "/solver/tolerance");
    if (s.contains("max_iterations"))
      c.solver.max_iterations = static_cast<int>(integer(s["max_iterations"], "/solver/max_iterations", 1, 100000000));
    if (s.contains("restarts")) c.solver.restarts = static_cast<int>(integer(s["restarts"], "/solver/restarts", 1, 1000));
    if (s.contains("max_sweeps"))
      c.solver.max_sweeps = static_cast<int>(integer(s["max_sweeps"], "/solver/max_sweeps", 0, 100000));
    if (s.contains("sheet_moves")) {
      if (!s["sheet_moves"].is_boolean()) throw ConfigError("/solver/sheet_moves", "expected a boolean");
      c.solver.sheet_moves = s["sheet_moves"].get<bool>();
    }
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<std::int64_t>() >= 0))
      throw ConfigError("/seed", "expected a nonnegative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  c.solver.seed = c.seed;
  if (j.contains("budget")) c.budget = integer(j["budget"], "/budget", 1, 100000000);
  if (j.contains("approx")) {
    const json& a = j["approx"];
    check_keys(a, "/approx", {"A", "G", "n_list", "per_tooth"});
    c.approx.A = a.contains("A") ? matrix(a["A"], "/approx/A", d, N) : Mat(d, N);
    if (a.contains("G")) {
      c.approx.G = matrix(a["G"], "/approx/G", d, N);
    } else {
      c.approx.G = Mat(d, N);
      c.approx.G(0, 0) = 1.0;
    }
    if (a.contains("n_list"))
      c.approx.n_list = list_of<int>(a["n_list"], "/approx/n_list", [](const json& v, const std::string& p) {
        return static_cast<int>(integer(v, p, 1, 1 << 20));
      });
    if (a.contains("per_tooth")) c.approx.per_tooth = static_cast<int>(integer(a["per_tooth"], "/approx/per_tooth", 1, 4096));
  } else if (c.approx.A.rows != d || c.approx.A.cols != N) {
    c.approx.A = Mat(d, N);
    c.approx.G = Mat(d, N);
    c.approx.G(0, 0) = 1.0;
  }
  if (j.contains("oracle")) {
    const json& o = j["oracle"];
    check_keys(o, "/oracle", {"target", "max_cells", "max_dofs", "lattice_points"});
    if (o.contains("target")) c.oracle.target = string_of(o["target"], "/oracle/target", {"surface", "bulk"});
    if (o.contains("max_cells")) c.oracle.max_cells = static_cast<int>(integer(o["max_cells"], "/oracle/max_cells", 1, 20));
    if (o.contains("max_dofs")) c.oracle.max_dofs = static_cast<int>(integer(o["max_dofs"], "/oracle/max_dofs", 1, 8));
    if (o.contains("lattice_points")) {
      c.oracle.lattice_points = static_cast<int>(integer(o["lattice_points"], "/oracle/lattice_points", 3, 101));
      if (c.oracle.lattice_points % 2 == 0) throw ConfigError("/oracle/lattice_points", "expected an odd integer");
    }
  }
  if (j.contains("out")) c.out = string_of(j["out"], "/out", {});

  if (c.density["bulk"]["form"] == "double_well") {
    const Mat S = matrix(c.density["bulk"]["well"], "/density/bulk/well");
    if (S.rows != d || S.cols != N) throw ConfigError("/density/bulk/well", "well must be a d x N matrix");
  }
  const bool needs_bulk = c.kind == "bulk" || (c.kind == "oracle" && c.oracle.target == "bulk");
  const bool needs_surface = c.kind == "surface" || (c.kind == "oracle" && c.oracle.target == "surface");
  if (needs_bulk) {
    if (c.A.empty()) throw ConfigError("/A", "missing required key for this kind");
    if (c.B.empty()) throw ConfigError("/B", "missing required key for this kind");
  }
  if (needs_surface) {
    if (c.lambda.empty()) throw ConfigError("/lambda", "missing required key for this kind");
    if (c.nu.empty()) throw ConfigError("/nu", "missing required key for this kind");
  }
  try {
    build_densities(c.density);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("/density", e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

json serialize_config(const ExperimentConfig& c) {
  auto mats = [](const std::vector<Mat>& v) {
    json out = json::array();
    for (const Mat& m : v) out.push_back(mat_json(m));
    return out;
  };
  auto vecs = [](const std::vector<Vec>& v) {
    json out = json::array();
    for (const Vec& x : v) out.push_back(vec_json(x));
    return out;
  };
  json j = {{"kind", c.kind},
            {"density", c.density},
            {"dims", {{"N", c.N}, {"d", c.d}}},
            {"tau", vecs(c.tau)},
            {"k_list", c.k_list},
            {"m", c.m},
            {"solver",
             {{"tolerance", c.solver.tolerance},
              {"max_iterations", c.solver.max_iterations},
              {"restarts", c.solver.restarts},
              {"max_sweeps", c.solver.max_sweeps},
              {"sheet_moves", c.solver.sheet_moves}}},
            {"seed", c.seed},
            {"budget", c.budget},
            {"approx",
             {{"A", mat_json(c.approx.A)},
              {"G", mat_json(c.approx.G)},
              {"n_list", c.approx.n_list},
              {"per_tooth", c.approx.per_tooth}}},
            {"oracle",
             {{"target", c.oracle.target},
              {"max_cells", c.oracle.max_cells},
              {"max_dofs", c.oracle.max_dofs},
              {"lattice_points", c.oracle.lattice_points}}},
            {"out", c.out}};
  if (!c.A.empty()) j["A"] = mats(c.A);
  if (!c.B.empty()) j["B"] = mats(c.B);
  if (!c.lambda.empty()) j["lambda"] = vecs(c.lambda);
  if (!c.nu.empty()) j["nu"] = vecs(c.nu);
  return j;
}

std::string config_hash(const ExperimentConfig& c) {
  json j = serialize_config(c);
  j.erase("out");
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Result store

const std::vector<std::string>& table_columns(const std::string& table) {
  static const std::map<std::string, std::vector<std::string>> columns = {
      {"bulk", {"A", "B", "k", "m", "tau", "value", "bulk_part", "surface_part", "converged", "seed", "config_hash"}},
      {"surface", {"lambda", "nu", "k", "m", "tau", "value", "cut_faces", "flat_cut_flag", "config_hash"}},
      {"approx", {"n", "eps", "bulk", "surface", "total", "l1_distance", "config_hash"}},
      {"validate",
       {"check", "mode", "samples", "violations", "passed", "worst_margin", "observed_modulus", "config_hash"}},
      {"oracle_bulk",
       {"A", "B", "k", "m", "tau", "value", "bulk_part", "surface_part", "converged", "seed", "oracle", "config_hash"}},
      {"oracle_surface",
       {"lambda", "nu", "k", "m", "tau", "value", "cut_faces", "flat_cut_flag", "oracle", "config_hash"}},
  };
  const auto it = columns.find(table);
  if (it == columns.end()) throw std::invalid_argument("unknown table " + table);
  return it->second;
}

namespace {

using Row = std::vector<std::string>;

std::string join(const Row& r) {
  std::string s;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (i > 0) s += ',';
    s += r[i];
  }
  return s;
}

Row split_line(const std::string& line) {
  Row out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<Row> read_table(const std::filesystem::path& file, const std::vector<std::string>& columns) {
  std::vector<Row> rows;
  std::ifstream in(file);
  if (!in) return rows;
  std::string line;
  if (!std::getline(in, line)) return rows;
  if (split_line(line) != columns) throw std::runtime_error(file.string() + " has an unexpected header");
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(split_line(line));
  return rows;
}

void write_file(const std::filesystem::path& file, const std::string& content) {
  const auto tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << content;
  }
  std::filesystem::rename(tmp, file);
}

void store_rows(const std::filesystem::path& dir, const std::string& table, const std::string& hash,
                const std::vector<Row>& fresh) {
  const auto& columns = table_columns(table);
  const auto file = dir / (table + ".csv");
  std::vector<Row> rows;
  for (Row& r : read_table(file, columns))
    if (r.back() != hash) rows.push_back(std::move(r));
  for (const Row& r : fresh) rows.push_back(r);
  std::string content = join(columns) + "\n";
  for (const Row& r : rows) content += join(r) + "\n";
  write_file(file, content);
}

void update_manifest(const std::filesystem::path& dir, const ExperimentConfig& c, const std::string& hash,
                     const std::string& table, int rows, int exit_code, const std::string& timestamp) {
  const auto file = dir / "manifest.json";
  json manifest = {{"runs", json::object()}};
  if (std::filesystem::exists(file)) {
    std::ifstream in(file);
    manifest = json::parse(in);
  }
  manifest["tool_version"] = kToolVersion;
  manifest["runs"][hash] = {{"config_hash", hash},
                            {"tool_version", kToolVersion},
                            {"timestamp", timestamp},
                            {"kind", c.kind},
                            {"table", table},
                            {"rows", rows},
                            {"exit_code", exit_code},
                            {"config", serialize_config(c)}};
  write_file(file, manifest.dump(2) + "\n");
}

void write_snapshot(const std::filesystem::path& dir, const std::string& hash, std::size_t index, const json& j) {
  const auto fdir = dir / "fields";
  std::filesystem::create_directories(fdir);
  write_file(fdir / (hash + "-" + std::to_string(index) + ".json"), j.dump() + "\n");
}

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  const auto n = std::min<std::size_t>(count, static_cast<std::size_t>(jobs));
  for (std::size_t t = 0; t < n; ++t)
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

std::string flag(bool b) { return b ? "true" : "false"; }

// ---------------------------------------------------------------------------
// Kinds

struct BulkTask {
  Mat A, B;
  Vec tau;
  int k;
};

std::vector<BulkTask> bulk_tasks(const ExperimentConfig& c) {
  std::vector<BulkTask> tasks;
  for (const Mat& A : c.A)
    for (const Mat& B : c.B)
      for (const Vec& tau : c.tau)
        for (int k : c.k_list) tasks.push_back({A, B, tau, k});
  return tasks;
}

struct SurfaceTask {
  Vec lambda, nu, tau;
  int k;
};

std::vector<SurfaceTask> surface_tasks(const ExperimentConfig& c) {
  std::vector<SurfaceTask> tasks;
  for (const Vec& l : c.lambda)
    for (const Vec& n : c.nu)
      for (const Vec& tau : c.tau)
        for (int k : c.k_list) tasks.push_back({l, n, tau, k});
  return tasks;
}

void run_bulk(const ExperimentConfig& c, const Densities& dens, const RunOptions& opt, const std::string& hash,
              RunSummary& sum, bool oracle) {
  const auto tasks = bulk_tasks(c);
  std::vector<Row> rows(tasks.size());
  std::vector<json> snaps(tasks.size());
  std::vector<bool> converged(tasks.size(), true);
  parallel_for(tasks.size(), opt.jobs, [&](std::size_t i) {
    const BulkTask& t = tasks[i];
    BulkCellSpec spec{t.A, t.B, t.k, c.m, t.tau, c.solver};
    double value = 0.0, bulk = 0.0, surface = 0.0;
    if (oracle) {
      OracleBudget budget;
      budget.max_dofs = c.oracle.max_dofs;
      budget.lattice_points = c.oracle.lattice_points;
      const CoarseSearchResult r = coarse_search_bulk(spec, dens.bulk, dens.surface, budget);
      value = r.value;
      bulk = r.bulk_part;
      surface = r.surface_part;
    } else {
      const BulkCellResult r = solve_mk(spec, dens.bulk, dens.surface);
      value = r.value;
      bulk = r.bulk_part;
      surface = r.surface_part;
      converged[i] = r.converged;
      snaps[i] = to_snapshot(r.field);
    }
    rows[i] = {format_mat(t.A), format_mat(t.B), std::to_string(t.k), std::to_string(c.m), format_vec(t.tau),
               format_double(value), format_double(bulk), format_double(surface), flag(converged[i]),
               std::to_string(c.seed)};
    if (oracle) rows[i].push_back("true");
    rows[i].push_back(hash);
  });
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!converged[i]) {
      sum.all_converged = false;
      sum.messages.push_back("row " + std::to_string(i) + " did not converge");
    }
    if (!oracle) write_snapshot(c.out, hash, i, snaps[i]);
  }
  sum.table = oracle ? "oracle_bulk" : "bulk";
  sum.rows = static_cast<int>(rows.size());
  store_rows(c.out, sum.table, hash, rows);
}

void run_surface(const ExperimentConfig& c, const Densities& dens, const RunOptions& opt, const std::string& hash,
                 RunSummary& sum, bool oracle) {
  const auto tasks = surface_tasks(c);
  std::vector<Row> rows(tasks.size());
  std::vector<double> values(tasks.size());
  std::vector<json> snaps(tasks.size());
  parallel_for(tasks.size(), opt.jobs, [&](std::size_t i) {
    const SurfaceTask& t = tasks[i];
    const SurfaceCellSpec spec{t.lambda, t.nu, t.k, c.m, t.tau};
    SurfaceCellResult r;
    if (oracle) {
      OracleBudget budget;
      budget.max_cells = c.oracle.max_cells;
      const EnumerationResult e = enumerate_two_phase(spec, dens.surface, budget);
      const SurfaceGrid grid(t.nu.dim, t.k, c.m, rational_direction(t.nu));
      r.labeling = e.labeling;
      r.value = e.value;
      labeling_energy(grid, e.labeling, t.lambda, dens.surface, t.tau, &r.cut_faces);
      r.flat_cut = true;
      for (int cell = 0; cell < grid.cells(); ++cell) {
        const double a = grid.normal_coordinate(cell);
        const int l = r.labeling[static_cast<std::size_t>(cell)];
        if ((a < 0 && l != 0) || (a > 0 && l != 1)) r.flat_cut = false;
      }
    } else {
      r = solve_gk(spec, dens.surface);
      snaps[i] = labeling_snapshot(spec, r);
    }
    values[i] = r.value;
    rows[i] = {format_vec(t.lambda), format_vec(t.nu), std::to_string(t.k), std::to_string(c.m), format_vec(t.tau),
               format_double(r.value), std::to_string(r.cut_faces), flag(r.flat_cut)};
    if (oracle) rows[i].push_back("true");
    rows[i].push_back(hash);
  });

  const double lo = dens.surface.lower_constant();
  const double hi = dens.surface.upper_constant();
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const double lam = tasks[i].lambda.norm();
    if (values[i] < lo * lam - 1e-12 || values[i] > hi * lam + 1e-12) {
      sum.invariants_ok = false;
      sum.messages.push_back("row " + std::to_string(i) + " violates the growth bounds");
    }
    for (std::size_t j = 0; j < tasks.size(); ++j) {
      const bool same = tasks[j].lambda == tasks[i].lambda && tasks[j].nu == tasks[i].nu && tasks[j].tau == tasks[i].tau;
      if (same && tasks[i].k == 2 * tasks[j].k && (tasks[j].k * c.m) % 2 == 0 && values[i] > values[j] + 1e-12) {
        sum.invariants_ok = false;
        sum.messages.push_back("row " + std::to_string(i) + " violates nested doubling");
      }
    }
    if (!oracle) write_snapshot(c.out, hash, i, snaps[i]);
  }
  sum.table = oracle ? "oracle_surface" : "surface";
  sum.rows = static_cast<int>(rows.size());
  store_rows(c.out, sum.table, hash, rows);
}

void run_approx(const ExperimentConfig& c, const Densities& dens, const RunOptions& opt, const std::string& hash,
                RunSummary& sum) {
  const SawtoothSequence seq({c.approx.A, Vec(c.d), c.approx.G});
  const auto& ns = c.approx.n_list;
  std::vector<EnergyPoint> points(ns.size());
  parallel_for(ns.size(), opt.jobs, [&](std::size_t i) {
    points[i] = eval_sequence_energy(seq, [](int n) { return n; }, dens.bulk, dens.surface, {ns[i]},
                                     c.approx.per_tooth)[0];
  });
  std::vector<Row> rows;
  const double tv0 = seq.total_variation(ns.front());
  const double bound_const = (c.approx.G - c.approx.A).norm() * std::sqrt(static_cast<double>(c.N)) / 2.0;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const EnergyPoint& p = points[i];
    rows.push_back({std::to_string(p.n), format_double(p.eps), format_double(p.bulk), format_double(p.surface),
                    format_double(p.total), format_double(p.l1_distance), hash});
    if (std::abs(seq.total_variation(ns[i]) - tv0) > 1e-12 * (1.0 + tv0)) {
      sum.invariants_ok = false;
      sum.messages.push_back("total variation changes with n");
    }
    if (p.l1_distance > bound_const / ns[i] + 1e-12) {
      sum.invariants_ok = false;
      sum.messages.push_back("L1 distance exceeds its bound at n = " + std::to_string(ns[i]));
    }
  }
  sum.table = "approx";
  sum.rows = static_cast<int>(rows.size());
  store_rows(c.out, sum.table, hash, rows);
}

void run_validate(const ExperimentConfig& c, const Densities& dens, const std::string& hash, RunSummary& sum) {
  const ValidationReport rep = validate_assumptions(dens.bulk, dens.surface, c.N, c.d, c.budget, c.seed);
  std::vector<Row> rows;
  for (const AssumptionCheck& chk : rep.checks)
    rows.push_back({chk.id, chk.mode, std::to_string(chk.samples), std::to_string(chk.violations), flag(chk.passed),
                    format_double(chk.worst_margin),
                    chk.observed_modulus ? format_double(*chk.observed_modulus) : std::string(), hash});
  if (!rep.all_passed()) {
    sum.invariants_ok = false;
    for (const AssumptionCheck& chk : rep.checks)
      if (!chk.passed) sum.messages.push_back("assumption " + chk.id + " failed: " + chk.description);
  }
  sum.table = "validate";
  sum.rows = static_cast<int>(rows.size());
  store_rows(c.out, sum.table, hash, rows);
}

}  // namespace

RunSummary run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  const Densities dens = build_densities(config.density);
  RunSummary sum;
  sum.hash = config_hash(config);
  std::filesystem::create_directories(config.out);

  if (config.kind != "validate") {
    const ValidationReport pre = validate_assumptions(dens.bulk, dens.surface, config.N, config.d, 2000, config.seed);
    if (!pre.all_passed()) {
      std::string failed;
      for (const AssumptionCheck& chk : pre.checks)
        if (!chk.passed) failed += (failed.empty() ? "" : ", ") + chk.id;
      throw std::runtime_error("densities fail the standing assumptions (" + failed + "); run validate-density");
    }
  }

  if (config.kind == "bulk")
    run_bulk(config, dens, options, sum.hash, sum, false);
  else if (config.kind == "surface")
    run_surface(config, dens, options, sum.hash, sum, false);
  else if (config.kind == "approx")
    run_approx(config, dens, options, sum.hash, sum);
  else if (config.kind == "validate")
    run_validate(config, dens, sum.hash, sum);
  else if (config.oracle.target == "bulk")
    run_bulk(config, dens, options, sum.hash, sum, true);
  else
    run_surface(config, dens, options, sum.hash, sum, true);

  update_manifest(config.out, config, sum.hash, sum.table, sum.rows, sum.exit_code(), options.timestamp);
  return sum;
}

std::filesystem::path emit_plot_data(const std::filesystem::path& out_dir, const std::string& kind) {
  static const std::set<std::string> plottable = {"bulk", "surface", "approx", "oracle_bulk", "oracle_surface"};
  if (!plottable.count(kind)) throw std::runtime_error("no plot data defined for kind '" + kind + "'");
  const auto& columns = table_columns(kind);
  const auto rows = read_table(out_dir / (kind + ".csv"), columns);
  if (rows.empty()) throw std::runtime_error("result store has no rows of kind '" + kind + "'");
  auto col = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(columns.begin(), columns.end(), name) - columns.begin());
  };

  std::string out = "x,y,series\n";
  if (kind == "approx") {
    for (const char* y : {"total", "l1_distance"})
      for (const Row& r : rows) out += r[col("n")] + "," + r[col(y)] + "," + y + " " + r.back() + "\n";
  } else {
    const bool bulk = kind == "bulk" || kind == "oracle_bulk";
    for (const Row& r : rows) {
      const std::string series = bulk ? "A=" + r[col("A")] + " B=" + r[col("B")] + " tau=" + r[col("tau")]
                                      : "lambda=" + r[col("lambda")] + " nu=" + r[col("nu")] + " tau=" + r[col("tau")];
      out += r[col("k")] + "," + r[col("value")] + "," + series + " m=" + r[col("m")] + " " + r.back() + "\n";
    }
  }
  const auto file = out_dir / ("plot_" + kind + ".csv");
  write_file(file, out);
  return file;
}

}  // namespace sdh
