#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "kerrstab/cli_io.hpp"

namespace kerr {

namespace {

using nlohmann::json;

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("\"" + where() + "\" must be an object");
  }

  void number(const char* key, double& v) {
    if (const json* x = find(key)) {
      if (!x->is_number()) throw type_error(key, "a number");
      v = x->get<double>();
    }
  }
  void integer(const char* key, int& v) {
    if (const json* x = find(key)) {
      if (!x->is_number_integer()) throw type_error(key, "an integer");
      v = x->get<int>();
    }
  }
  void unsigned_integer(const char* key, std::uint64_t& v) {
    if (const json* x = find(key)) {
      if (!x->is_number_unsigned()) throw type_error(key, "a non-negative integer");
      v = x->get<std::uint64_t>();
    }
  }
  void text(const char* key, std::string& v) {
    if (const json* x = find(key)) {
      if (!x->is_string()) throw type_error(key, "a string");
      v = x->get<std::string>();
    }
  }
  void numbers(const char* key, std::vector<double>& v) {
    if (const json* x = find(key)) {
      if (!x->is_array()) throw type_error(key, "an array of numbers");
      v.clear();
      for (const auto& e : *x) {
        if (!e.is_number()) throw type_error(key, "an array of numbers");
        v.push_back(e.get<double>());
      }
    }
  }
  void integers(const char* key, std::vector<int>& v) {
    if (const json* x = find(key)) {
      if (!x->is_array()) throw type_error(key, "an array of integers");
      v.clear();
      for (const auto& e : *x) {
        if (!e.is_number_integer()) throw type_error(key, "an array of integers");
        v.push_back(e.get<int>());
      }
    }
  }
  void required(const char* key, double& v) {
    if (!j_.contains(key)) missing_.push_back(qualified(key));
    number(key, v);
  }
  template <class F>
  void block(const char* key, F&& f) {
    if (const json* x = find(key)) {
      Reader r(*x, qualified(key));
      f(r);
      r.finish();
    }
  }
  void finish() const {
    for (const auto& item : j_.items())
      if (!used_.count(item.key()))
        throw ConfigError("unknown key \"" + item.key() + "\"" + (path_.empty() ? "" : " in \"" + path_ + "\""));
    if (!missing_.empty()) throw ConfigError("missing required key \"" + missing_.front() + "\"");
  }

 private:
  const json* find(const char* key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  std::string qualified(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "configuration" : path_; }
  ConfigError type_error(const char* key, const char* what) const {
    return ConfigError("key \"" + qualified(key) + "\" must be " + what);
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
  std::vector<std::string> missing_;
};

void require(bool ok, const std::string& rule) {
  if (!ok) throw ConfigError("invalid configuration: " + rule);
}

bool is_half_integer(double x) { return std::abs(2.0 * x - std::round(2.0 * x)) < 1e-12; }

void validate(const RunConfig& c) {
  require(c.M > 0.0, "mass M must be positive");
  require(c.a >= 0.0, "spin a must be non-negative (fold its sign into k)");
  require(c.M * c.M > c.a * c.a, "non-extremality invariant M^2 > a^2 violated (M = " + std::to_string(c.M) +
                                     ", a = " + std::to_string(c.a) + ")");
  require(is_half_integer(c.s) && is_half_integer(c.k), "s and k must be multiples of 1/2");
  require(std::abs(c.k - c.s - std::round(c.k - c.s)) < 1e-12, "k - s must be an integer");
  require(c.grid.u_max > c.grid.u_min && c.grid.n_u >= 16, "grid needs u_max > u_min and n_u >= 16");
  require(c.grid.n_angular >= 9, "grid.n_angular must be at least 9");
  require(c.scalar_product.kind == "energy" || c.scalar_product.kind == "sobolev",
          "scalar_product.kind must be \"energy\" or \"sobolev\"");
  require(c.scalar_product.weight > 0.0, "scalar_product.weight must be positive");
  require(c.angular.cluster0_size >= 1 && c.angular.merge_fraction >= 0.0, "angular cluster options out of range");
  require(c.angular.oracle_cells >= 16, "angular.oracle_cells must be at least 16");
  require(c.radial.mode >= 0 && c.radial.n_u >= 2 && c.radial.u_max > c.radial.u_min, "radial block out of range");
  require(c.scan.n_re >= 2 && c.scan.n_im >= 2 && c.scan.re_max > c.scan.re_min && c.scan.im_max > c.scan.im_min,
          "scan region must be a non-degenerate box with at least 2 x 2 points");
  require(!c.scan.modes.empty(), "scan.modes must not be empty");
  require(c.contour.method == "separated" || c.contour.method == "contour",
          "contour.method must be \"separated\" or \"contour\"");
  require(c.contour.p >= 1, "contour.p must be at least 1");
  require(c.contour.c >= 0.0, "contour.c must be non-negative (0 selects 1.25 c_hat)");
  require(c.contour.panel_width > 0.0 && c.contour.nodes >= 2 && c.contour.frequency_nodes >= 2,
          "contour panels need positive width and at least 2 nodes");
  require(!c.contour.epsilons.empty(), "contour.epsilons must not be empty");
  for (double e : c.contour.epsilons) require(e > 0.0, "contour.epsilons must be positive");
  require(c.contour.cluster0_size >= 1, "contour.cluster0_size must be at least 1");
  require(c.data.width > 0.0, "data.width must be positive");
  for (std::size_t i = 0; i < c.schedule.size(); ++i)
    require(c.schedule[i] >= 0.0 && (i == 0 || c.schedule[i] >= c.schedule[i - 1]),
            "schedule must be ascending and non-negative");
  require(c.region.u_max > c.region.u_min && c.region.n_theta >= 1, "region must be a non-empty box");
  require(c.snapshot_theta >= 1, "snapshot_theta must be at least 1");
  try {
    c.oracle.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid configuration: oracle: ") + e.what());
  }
  require(c.certify.family == "sinusoid" || c.certify.family == "random",
          "certify.family must be \"sinusoid\" or \"random\"");
  require(c.certify.u1 > c.certify.u0 && c.certify.initial_radius >= 0.0, "certify interval or radius out of range");
  require(c.threads >= 1, "threads must be at least 1");
}

RunConfig from_json(const json& j) {
  RunConfig c;
  Reader r(j, "");
  r.required("M", c.M);
  r.required("a", c.a);
  r.required("s", c.s);
  r.required("k", c.k);
  r.block("grid", [&](Reader& b) {
    b.number("u_min", c.grid.u_min);
    b.number("u_max", c.grid.u_max);
    b.integer("n_u", c.grid.n_u);
    b.integer("n_angular", c.grid.n_angular);
  });
  r.block("scalar_product", [&](Reader& b) {
    b.text("kind", c.scalar_product.kind);
    b.number("weight", c.scalar_product.weight);
  });
  r.block("angular", [&](Reader& b) {
    auto& x = c.angular;
    b.number("omega_re", x.omega_re);
    b.number("omega_im", x.omega_im);
    b.number("l_max", x.l_max);
    b.integer("cluster0_size", x.cluster0_size);
    b.number("merge_fraction", x.merge_fraction);
    b.number("jordan_tolerance", x.jordan_tolerance);
    b.integer("oracle_cells", x.oracle_cells);
  });
  r.block("radial", [&](Reader& b) {
    auto& x = c.radial;
    b.number("omega_re", x.omega_re);
    b.number("omega_im", x.omega_im);
    b.integer("mode", x.mode);
    b.number("l_max", x.l_max);
    b.number("u_min", x.u_min);
    b.number("u_max", x.u_max);
    b.integer("n_u", x.n_u);
    b.number("kernel_v", x.kernel_v);
    b.number("u_match", x.u_match);
  });
  r.block("scan", [&](Reader& b) {
    auto& x = c.scan;
    b.number("re_min", x.re_min);
    b.number("re_max", x.re_max);
    b.number("im_min", x.im_min);
    b.number("im_max", x.im_max);
    b.integer("n_re", x.n_re);
    b.integer("n_im", x.n_im);
    b.integers("modes", x.modes);
    b.number("l_max", x.l_max);
    b.number("tolerance", x.tolerance);
  });
  r.block("contour", [&](Reader& b) {
    auto& x = c.contour;
    b.text("method", x.method);
    b.number("c", x.c);
    b.integer("p", x.p);
    b.number("panel_width", x.panel_width);
    b.integer("nodes", x.nodes);
    b.number("omega_max", x.omega_max);
    b.numbers("epsilons", x.epsilons);
    b.number("omega_cap", x.omega_cap);
    b.integer("tail_terms", x.tail_terms);
    b.number("tail_tolerance", x.tail_tolerance);
    b.number("inner_width", x.inner_width);
    b.number("outer_width", x.outer_width);
    b.number("inner_edge", x.inner_edge);
    b.integer("frequency_nodes", x.frequency_nodes);
    b.integer("grading_levels", x.grading_levels);
    b.number("far_factor", x.far_factor);
    b.integer("cluster0_size", x.cluster0_size);
  });
  r.block("data", [&](Reader& b) {
    b.number("centre", c.data.centre);
    b.number("width", c.data.width);
  });
  r.numbers("schedule", c.schedule);
  r.block("region", [&](Reader& b) {
    b.number("u_min", c.region.u_min);
    b.number("u_max", c.region.u_max);
    b.number("theta_min", c.region.theta_min);
    b.number("theta_max", c.region.theta_max);
    b.integer("n_theta", c.region.n_theta);
  });
  r.integer("snapshot_theta", c.snapshot_theta);
  r.block("oracle", [&](Reader& b) {
    auto& x = c.oracle;
    b.number("u_min", x.u_min);
    b.number("u_max", x.u_max);
    b.integer("n_u", x.n_u);
    b.integer("n_theta", x.n_theta);
    b.number("cfl_factor", x.cfl_factor);
    b.number("sponge_width", x.sponge_width);
    b.number("sponge_strength", x.sponge_strength);
  });
  r.block("certify", [&](Reader& b) {
    auto& x = c.certify;
    b.text("family", x.family);
    b.number("v0_re", x.v0_re);
    b.number("v0_im", x.v0_im);
    b.number("amplitude_re", x.amplitude_re);
    b.number("amplitude_im", x.amplitude_im);
    b.number("frequency", x.frequency);
    b.number("phase", x.phase);
    b.number("u0", x.u0);
    b.number("u1", x.u1);
    b.number("initial_radius", x.initial_radius);
    b.number("margin", x.margin);
    b.number("nodes_per_phase", x.nodes_per_phase);
  });
  r.text("output_dir", c.output_dir);
  r.unsigned_integer("seed", c.seed);
  r.integer("threads", c.threads);
  r.finish();
  validate(c);
  return c;
}

std::string position(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("parse error at " + position(text, e.byte) + ": " + e.what());
  }
  if (j.is_object() && j.contains("manifest_version")) {
    if (!j.contains("config")) throw ConfigError("manifest without a \"config\" entry");
    return from_json(j.at("config"));
  }
  return from_json(j);
}

RunConfig parse_config(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".toml") throw ConfigError("TOML configurations are not supported; use JSON: " + path.string());
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

nlohmann::json config_to_json(const RunConfig& c) {
  json j;
  j["M"] = c.M;
  j["a"] = c.a;
  j["s"] = c.s;
  j["k"] = c.k;
  j["grid"] = {{"u_min", c.grid.u_min}, {"u_max", c.grid.u_max}, {"n_u", c.grid.n_u}, {"n_angular", c.grid.n_angular}};
  j["scalar_product"] = {{"kind", c.scalar_product.kind}, {"weight", c.scalar_product.weight}};
  const auto& an = c.angular;
  j["angular"] = {{"omega_re", an.omega_re},         {"omega_im", an.omega_im},
                  {"l_max", an.l_max},               {"cluster0_size", an.cluster0_size},
                  {"merge_fraction", an.merge_fraction}, {"jordan_tolerance", an.jordan_tolerance},
                  {"oracle_cells", an.oracle_cells}};
  const auto& ra = c.radial;
  j["radial"] = {{"omega_re", ra.omega_re}, {"omega_im", ra.omega_im}, {"mode", ra.mode},
                 {"l_max", ra.l_max},       {"u_min", ra.u_min},       {"u_max", ra.u_max},
                 {"n_u", ra.n_u},           {"kernel_v", ra.kernel_v}, {"u_match", ra.u_match}};
  const auto& sc = c.scan;
  j["scan"] = {{"re_min", sc.re_min}, {"re_max", sc.re_max}, {"im_min", sc.im_min}, {"im_max", sc.im_max},
               {"n_re", sc.n_re},     {"n_im", sc.n_im},     {"modes", sc.modes},   {"l_max", sc.l_max},
               {"tolerance", sc.tolerance}};
  const auto& co = c.contour;
  j["contour"] = {{"method", co.method},
                  {"c", co.c},
                  {"p", co.p},
                  {"panel_width", co.panel_width},
                  {"nodes", co.nodes},
                  {"omega_max", co.omega_max},
                  {"epsilons", co.epsilons},
                  {"omega_cap", co.omega_cap},
                  {"tail_terms", co.tail_terms},
                  {"tail_tolerance", co.tail_tolerance},
                  {"inner_width", co.inner_width},
                  {"outer_width", co.outer_width},
                  {"inner_edge", co.inner_edge},
                  {"frequency_nodes", co.frequency_nodes},
                  {"grading_levels", co.grading_levels},
                  {"far_factor", co.far_factor},
                  {"cluster0_size", co.cluster0_size}};
  j["data"] = {{"centre", c.data.centre}, {"width", c.data.width}};
  j["schedule"] = c.schedule;
  j["region"] = {{"u_min", c.region.u_min},         {"u_max", c.region.u_max}, {"theta_min", c.region.theta_min},
                 {"theta_max", c.region.theta_max}, {"n_theta", c.region.n_theta}};
  j["snapshot_theta"] = c.snapshot_theta;
  const auto& o = c.oracle;
  j["oracle"] = {{"u_min", o.u_min},           {"u_max", o.u_max},           {"n_u", o.n_u},
                 {"n_theta", o.n_theta},       {"cfl_factor", o.cfl_factor}, {"sponge_width", o.sponge_width},
                 {"sponge_strength", o.sponge_strength}};
  const auto& ce = c.certify;
  j["certify"] = {{"family", ce.family},       {"v0_re", ce.v0_re},         {"v0_im", ce.v0_im},
                  {"amplitude_re", ce.amplitude_re}, {"amplitude_im", ce.amplitude_im},
                  {"frequency", ce.frequency}, {"phase", ce.phase},         {"u0", ce.u0},
                  {"u1", ce.u1},               {"initial_radius", ce.initial_radius},
                  {"margin", ce.margin},       {"nodes_per_phase", ce.nodes_per_phase}};
  j["output_dir"] = c.output_dir;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  return j;
}

std::string echo_config(const RunConfig& cfg) { return config_to_json(cfg).dump(2) + "\n"; }

StateLayout state_layout(const RunConfig& c) {
  StateLayout L;
  L.geometry = KerrParams(c.M, c.a);
  L.s = c.s;
  L.k = c.k;
  L.u_min = c.grid.u_min;
  L.u_max = c.grid.u_max;
  L.n_u = c.grid.n_u;
  L.n_angular = c.grid.n_angular;
  return L;
}

HamiltonianOptions hamiltonian_options(const RunConfig& c) {
  HamiltonianOptions o;
  o.product = c.scalar_product.kind == "sobolev" ? ScalarProduct::Sobolev : ScalarProduct::Energy;
  o.weight = c.scalar_product.weight;
  return o;
}

HamiltonianConfig hamiltonian_config(const RunConfig& c) {
  HamiltonianConfig h;
  h.c = c.contour.c;
  h.p = c.contour.p;
  h.contour.panel_width = c.contour.panel_width;
  h.contour.nodes = c.contour.nodes;
  h.contour.omega_max = c.contour.omega_max;
  return h;
}

SeparatedOptions separated_options(const RunConfig& c) {
  SeparatedOptions o;
  const auto& x = c.contour;
  o.epsilons = x.epsilons;
  o.omega_max = x.omega_max;
  o.omega_cap = x.omega_cap;
  o.tail_terms = x.tail_terms;
  o.tail_tolerance = x.tail_tolerance;
  o.inner_width = x.inner_width;
  o.outer_width = x.outer_width;
  o.inner_edge = x.inner_edge;
  o.nodes = x.frequency_nodes;
  o.grading_levels = x.grading_levels;
  o.far_factor = x.far_factor;
  o.clusters.cluster0_size = x.cluster0_size;
  o.threads = c.threads;
  return o;
}

}  // namespace kerr
