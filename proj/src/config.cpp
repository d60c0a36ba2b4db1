#include "shellvp/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#define TOML_HEADER_ONLY 1
#include <toml.hpp>

#include "shellvp/format.hpp"

namespace shellvp {
namespace {

std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

class Reader {
 public:
  Reader(const toml::table& t, std::string path) : t_(t), path_(std::move(path)) {}

  bool has(std::string_view key) const { return t_.contains(key); }

  double number(std::string_view key, double fallback) {
    const toml::node* n = take(key);
    return n ? as_number(*n, join(path_, key)) : fallback;
  }

  long long integer(std::string_view key, long long fallback) {
    const toml::node* n = take(key);
    if (!n) return fallback;
    if (auto v = n->value_exact<int64_t>()) return *v;
    throw ConfigError(join(path_, key) + ": expected an integer");
  }

  bool boolean(std::string_view key, bool fallback) {
    const toml::node* n = take(key);
    if (!n) return fallback;
    if (auto v = n->value_exact<bool>()) return *v;
    throw ConfigError(join(path_, key) + ": expected true or false");
  }

  std::string string(std::string_view key, const std::string& fallback) {
    const toml::node* n = take(key);
    if (!n) return fallback;
    if (auto v = n->value_exact<std::string>()) return *v;
    throw ConfigError(join(path_, key) + ": expected a string");
  }

  std::vector<double> numbers(std::string_view key, std::vector<double> fallback) {
    const toml::node* n = take(key);
    if (!n) return fallback;
    const toml::array* a = n->as_array();
    if (!a) throw ConfigError(join(path_, key) + ": expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < a->size(); ++i)
      out.push_back(as_number(*a->get(i), join(path_, key) + "[" + std::to_string(i) + "]"));
    return out;
  }

  std::vector<std::string> strings(std::string_view key, std::vector<std::string> fallback) {
    const toml::node* n = take(key);
    if (!n) return fallback;
    const toml::array* a = n->as_array();
    if (!a) throw ConfigError(join(path_, key) + ": expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < a->size(); ++i) {
      auto v = a->get(i)->value_exact<std::string>();
      if (!v) throw ConfigError(join(path_, key) + "[" + std::to_string(i) + "]: expected a string");
      out.push_back(*v);
    }
    return out;
  }

  Window window(std::string_view key, Window fallback) {
    const auto v = numbers(key, {fallback.lo, fallback.hi});
    if (v.size() != 2) throw ConfigError(join(path_, key) + ": expected [lo, hi]");
    return {v[0], v[1]};
  }

  Interval interval(std::string_view key, Interval fallback) {
    const Window w = window(key, {fallback.lo, fallback.hi});
    return {w.lo, w.hi};
  }

  RadialPoint point(std::string_view key, RadialPoint fallback) {
    const auto v = numbers(key, {fallback.r, fallback.w, fallback.ell});
    if (v.size() != 3) throw ConfigError(join(path_, key) + ": expected [r, w, ell]");
    return {v[0], v[1], v[2]};
  }

  /// Sub-table reader; an absent table reads as empty.
  Reader table(std::string_view key) {
    const toml::node* n = take(key);
    if (!n) return Reader(empty_, join(path_, key));
    const toml::table* t = n->as_table();
    if (!t) throw ConfigError(join(path_, key) + ": expected a table");
    return Reader(*t, join(path_, key));
  }

  const std::string& path() const { return path_; }

  void finish() const {
    for (const auto& [k, v] : t_)
      if (!used_.count(std::string(k.str())))
        throw ConfigError(join(path_, k.str()) + ": unknown key");
  }

 private:
  const toml::node* take(std::string_view key) {
    used_.insert(std::string(key));
    return t_.get(key);
  }

  static double as_number(const toml::node& n, const std::string& where) {
    if (auto v = n.value_exact<double>()) return *v;
    if (auto v = n.value_exact<int64_t>()) return static_cast<double>(*v);
    if (auto v = n.value_exact<std::string>()) {
      try {
        return parse_double(*v);
      } catch (const std::exception&) {
      }
    }
    throw ConfigError(where + ": expected a number");
  }

  const toml::table& t_;
  std::string path_;
  std::set<std::string> used_;
  static inline const toml::table empty_{};
};

toml::table parse_toml(std::string_view text) {
  try {
    return toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "syntax error at line " << e.source().begin.line << ", column " << e.source().begin.column << ": "
       << e.description();
    throw ConfigError(os.str());
  }
}

void check(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key + ": " + what);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

ProfileKind parse_profile_kind(const std::string& s) {
  if (s == "smooth_box") return ProfileKind::SmoothBox;
  if (s == "shell_gaussian") return ProfileKind::ShellGaussian;
  throw ConfigError("profile.kind: expected smooth_box or shell_gaussian, got '" + s + "'");
}

std::string_view profile_kind_name(ProfileKind k) {
  return k == ProfileKind::SmoothBox ? "smooth_box" : "shell_gaussian";
}

// TOML float literal.
std::string tf(double x) {
  std::string s = shortest(x);
  if (s == "nan" || s == "inf" || s == "-inf") return s;
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

std::string tf_list(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + tf(v[i]);
  return s + "]";
}

std::string quoted(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::vector<double> default_snapshot_times(double t_end) {
  std::vector<double> t;
  for (double decade = 1.0; decade <= t_end; decade *= 10.0)
    for (double m : {1.0, 2.0, 5.0})
      if (m * decade <= t_end) t.push_back(m * decade);
  if (t_end > 0.0) {
    t.push_back(t_end);
    for (int k = 0; k < 16; ++k) t.push_back(t_end / 4.0 + k * t_end / 20.0);
  }
  std::sort(t.begin(), t.end());
  // Merge values equal up to rounding of the evenly spaced sequence.
  std::vector<double> out;
  for (double x : t)
    if (out.empty() || x - out.back() > 1e-9 * std::max(1.0, x)) out.push_back(x);
  return out;
}

RunConfig parse_config(std::string_view text) {
  const toml::table root = parse_toml(text);
  Reader top(root, "");
  RunConfig c;
  try {
    c.model = parse_model(top.string("model", "classical"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  c.step.free_streaming = top.boolean("free_streaming", false);
  c.output = top.string("output", "run");
  c.step.threads = static_cast<int>(top.integer("threads", 1));
  check(c.step.threads >= 1, "threads", "must be >= 1");

  {
    Reader p = top.table("profile");
    c.profile.kind = parse_profile_kind(p.string("kind", "smooth_box"));
    c.profile.r = p.interval("r", c.profile.r);
    c.profile.w = p.interval("w", c.profile.w);
    c.profile.ell = p.interval("ell", c.profile.ell);
    c.profile.amplitude = p.number("amplitude", c.profile.amplitude);
    c.profile.center = p.point("center", c.profile.center);
    c.profile.sigma = p.point("sigma", c.profile.sigma);
    p.finish();
    try {
      c.profile.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("profile: ") + e.what());
    }
  }
  {
    Reader q = top.table("quadrature");
    c.quadrature.n_r = static_cast<int>(q.integer("n_r", c.quadrature.n_r));
    c.quadrature.n_w = static_cast<int>(q.integer("n_w", c.quadrature.n_w));
    c.quadrature.n_ell = static_cast<int>(q.integer("n_ell", c.quadrature.n_ell));
    q.finish();
    check(c.quadrature.n_r >= 1 && c.quadrature.n_w >= 1 && c.quadrature.n_ell >= 1, "quadrature",
          "node counts must be >= 1");
  }
  {
    Reader s = top.table("step");
    c.step.dt = s.number("dt", c.step.dt);
    c.step.t_end = s.number("t_end", c.step.t_end);
    c.step.record_every = static_cast<int>(s.integer("record_every", c.step.record_every));
    try {
      c.step.integrator = parse_integrator(s.string("integrator", std::string(to_string(c.step.integrator))));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("step.integrator: ") + e.what());
    }
    c.step.r_floor = s.number("r_floor", c.step.r_floor);
    s.finish();
    check(c.step.dt > 0.0, "step.dt", "must be positive");
    check(c.step.t_end >= 0.0, "step.t_end", "must be nonnegative");
    check(c.step.record_every >= 1, "step.record_every", "must be >= 1");
    check(c.step.r_floor > 0.0, "step.r_floor", "must be positive");
  }
  const double t_end = c.step.t_end;
  {
    Reader d = top.table("diagnostics");
    DiagnosticsConfig& dc = c.diagnostics;
    dc.e_norms = d.numbers("e_norms", dc.e_norms);
    for (double p : dc.e_norms) check(p > 1.5, "diagnostics.e_norms", "p must exceed 3/2 (got " + shortest(p) + ")");
    dc.rho_norms = d.numbers("rho_norms", dc.rho_norms);
    for (double q : dc.rho_norms) check(q >= 1.0, "diagnostics.rho_norms", "q must be >= 1 (got " + shortest(q) + ")");
    c.fit_window = d.window("fit_window", {t_end / 10.0, t_end});
    const long long bins = d.integer("density_bins", 0);
    check(bins >= 0, "diagnostics.density_bins", "must be >= 0");
    dc.density_bins = static_cast<std::size_t>(bins);
    dc.rho_inner_cutoff = d.number("rho_inner_cutoff", 0.0);
    check(dc.rho_inner_cutoff >= 0.0, "diagnostics.rho_inner_cutoff", "must be >= 0");
    const long long track = d.integer("track", 64);
    check(track >= 0, "diagnostics.track", "must be >= 0");
    c.track = static_cast<std::size_t>(track);
    std::vector<std::string> names;
    for (const auto& cs : dc.casimirs) names.push_back(cs.name());
    dc.casimirs.clear();
    for (const auto& n : d.strings("casimirs", names)) {
      try {
        dc.casimirs.push_back(CasimirSpec::parse(n));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("diagnostics.casimirs: ") + e.what());
      }
    }
    c.snapshot_times = d.numbers("snapshot_times", default_snapshot_times(t_end));
    const long long fh = d.integer("field_history_every", c.field_history_every);
    check(fh >= 0, "diagnostics.field_history_every", "must be >= 0");
    c.field_history_every = static_cast<int>(fh);
    const long long nodes = d.integer("field_history_nodes", static_cast<long long>(c.field_history_nodes));
    check(nodes >= 2, "diagnostics.field_history_nodes", "must be >= 2");
    c.field_history_nodes = static_cast<std::size_t>(nodes);
    d.finish();
    dc.field_off = c.step.free_streaming;
    check(c.fit_window.lo >= 0.0 && c.fit_window.lo <= c.fit_window.hi && c.fit_window.hi <= t_end,
          "diagnostics.fit_window", "must lie within [0, t_end]");
    for (double t : c.snapshot_times)
      check(t >= 0.0 && t <= t_end, "diagnostics.snapshot_times", "must lie within [0, t_end]");
  }
  {
    Reader p = top.table("probes");
    c.probes.enabled = p.boolean("enabled", false);
    c.probes.tau = p.number("tau", t_end / 4.0);
    c.probes.delta_w = p.number("delta_w", c.probes.delta_w);
    p.finish();
    check(c.probes.tau >= 0.0 && c.probes.tau <= t_end, "probes.tau", "must lie within [0, t_end]");
    check(c.probes.delta_w > 0.0, "probes.delta_w", "must be positive");
  }
  top.finish();
  return c;
}

RunConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

std::string emit_config(const RunConfig& c) {
  std::ostringstream o;
  o << "model = " << quoted(to_string(c.model)) << "\n";
  o << "free_streaming = " << (c.step.free_streaming ? "true" : "false") << "\n";
  o << "output = " << quoted(c.output) << "\n";
  o << "threads = " << c.step.threads << "\n\n";

  const Profile& p = c.profile;
  o << "[profile]\n";
  o << "kind = " << quoted(profile_kind_name(p.kind)) << "\n";
  o << "r = " << tf_list({p.r.lo, p.r.hi}) << "\n";
  o << "w = " << tf_list({p.w.lo, p.w.hi}) << "\n";
  o << "ell = " << tf_list({p.ell.lo, p.ell.hi}) << "\n";
  o << "amplitude = " << tf(p.amplitude) << "\n";
  o << "center = " << tf_list({p.center.r, p.center.w, p.center.ell}) << "\n";
  o << "sigma = " << tf_list({p.sigma.r, p.sigma.w, p.sigma.ell}) << "\n\n";

  o << "[quadrature]\n";
  o << "n_r = " << c.quadrature.n_r << "\nn_w = " << c.quadrature.n_w << "\nn_ell = " << c.quadrature.n_ell
    << "\n\n";

  o << "[step]\n";
  o << "dt = " << tf(c.step.dt) << "\n";
  o << "t_end = " << tf(c.step.t_end) << "\n";
  o << "record_every = " << c.step.record_every << "\n";
  o << "integrator = " << quoted(to_string(c.step.integrator)) << "\n";
  o << "r_floor = " << tf(c.step.r_floor) << "\n\n";

  const DiagnosticsConfig& d = c.diagnostics;
  o << "[diagnostics]\n";
  o << "e_norms = " << tf_list(d.e_norms) << "\n";
  o << "rho_norms = " << tf_list(d.rho_norms) << "\n";
  o << "fit_window = " << tf_list({c.fit_window.lo, c.fit_window.hi}) << "\n";
  o << "density_bins = " << d.density_bins << "\n";
  o << "rho_inner_cutoff = " << tf(d.rho_inner_cutoff) << "\n";
  o << "track = " << c.track << "\n";
  o << "casimirs = [";
  for (std::size_t i = 0; i < d.casimirs.size(); ++i) o << (i ? ", " : "") << quoted(d.casimirs[i].name());
  o << "]\n";
  o << "snapshot_times = " << tf_list(c.snapshot_times) << "\n";
  o << "field_history_every = " << c.field_history_every << "\n";
  o << "field_history_nodes = " << c.field_history_nodes << "\n\n";

  o << "[probes]\n";
  o << "enabled = " << (c.probes.enabled ? "true" : "false") << "\n";
  o << "tau = " << tf(c.probes.tau) << "\n";
  o << "delta_w = " << tf(c.probes.delta_w) << "\n";
  return o.str();
}

void AnalysisSpec::resolve(double t_end, bool free_streaming) {
  auto fill = [](Window& w, double lo, double hi) {
    if (w.lo == 0.0 && w.hi == 0.0) w = {lo, hi};
  };
  fill(fit_window, t_end / 10.0, t_end);
  fill(residual_early, t_end / 10.0, t_end / 2.0);
  fill(residual_late, t_end / 2.0, t_end);
  fill(fconv_window, t_end / 4.0, t_end);
  // Field-free W_inf is exact, so only the bin width limits the identities.
  if (finf_u_bins == 0) finf_u_bins = free_streaming ? std::size_t{1} << 22 : 4096;
  if (omega_t_a == 0.0) omega_t_a = t_end / 4.0;
  if (omega_t_b == 0.0) omega_t_b = 0.75 * t_end;
}

AnalysisSpec parse_analysis_spec(std::string_view text) {
  const toml::table root = parse_toml(text);
  Reader top(root, "");
  AnalysisSpec s;
  auto count = [](Reader& r, std::string_view key, std::size_t fallback, bool allow_zero) {
    const long long v = r.integer(key, static_cast<long long>(fallback));
    check(v > 0 || (allow_zero && v == 0), join(r.path(), key), "must be a positive bin count");
    return static_cast<std::size_t>(v);
  };
  s.fit_window = top.window("fit_window", s.fit_window);
  s.residual_early = top.window("residual_early", s.residual_early);
  s.residual_late = top.window("residual_late", s.residual_late);
  s.winf_tolerance = top.number("winf_tolerance", s.winf_tolerance);
  check(s.winf_tolerance > 0.0, "winf_tolerance", "must be positive");
  {
    Reader f = top.table("finf");
    s.finf_u_bins = count(f, "u_bins", s.finf_u_bins, true);
    s.finf_ell_bins = count(f, "ell_bins", s.finf_ell_bins, true);
    f.finish();
  }
  {
    Reader f = top.table("fconv");
    s.fconv_u_bins = count(f, "u_bins", s.fconv_u_bins, true);
    s.fconv_ell_bins = count(f, "ell_bins", s.fconv_ell_bins, false);
    s.fconv_window = f.window("window", s.fconv_window);
    f.finish();
  }
  {
    Reader o = top.table("omega");
    s.omega_t_a = o.number("t_a", s.omega_t_a);
    s.omega_t_b = o.number("t_b", s.omega_t_b);
    s.continuation_dt = o.number("dt", s.continuation_dt);
    o.finish();
    check(s.continuation_dt > 0.0, "omega.dt", "must be positive");
  }
  top.finish();
  return s;
}

AnalysisSpec load_analysis_spec(const std::string& path) { return parse_analysis_spec(read_file(path)); }

}  // namespace shellvp
