#include "shellvp/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "shellvp/format.hpp"

namespace shellvp {
namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArtifactError("cannot write " + path.string());
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// Reads a CSV with the expected header; rows are returned as fields.
std::vector<std::vector<std::string>> read_rows(const fs::path& path, const std::vector<std::string>& header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("missing artifact " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ArtifactError(path.string() + ": empty file");
  if (split(line) != header) throw ArtifactError(path.string() + ": unexpected header '" + line + "'");
  std::vector<std::vector<std::string>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split(line);
    if (f.size() != header.size())
      throw ArtifactError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                          std::to_string(header.size()) + " fields");
    rows.push_back(std::move(f));
  }
  return rows;
}

double num(const std::string& s, const fs::path& path) {
  try {
    return parse_double(s);
  } catch (const std::exception&) {
    throw ArtifactError(path.string() + ": bad number '" + s + "'");
  }
}

std::size_t count(const std::string& s, const fs::path& path) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ArtifactError(path.string() + ": bad integer '" + s + "'");
  }
}

void write_header(std::ostream& out, const std::vector<std::string>& h) {
  for (std::size_t i = 0; i < h.size(); ++i) out << (i ? "," : "") << h[i];
  out << '\n';
}

const std::vector<std::string> kEnsembleHeader{"r", "w", "ell", "weight"};
const std::vector<std::string> kTrajectoryHeader{"particle", "time", "r", "w", "ell", "m"};
const std::vector<std::string> kProbeHeader{"parent", "side", "tau", "delta_w", "time", "r", "w", "ell", "m"};
const std::vector<std::string> kHistoryHeader{"time", "r", "m"};

}  // namespace

std::vector<std::string> diagnostics_header(const DiagnosticsConfig& cfg) {
  std::vector<std::string> h{"time", "mass", "energy"};
  for (const auto& c : cfg.casimirs) h.push_back("casimir_" + c.column());
  for (double p : cfg.e_norms) h.push_back(std::isinf(p) ? "E_inf" : "E_p" + exponent_label(p));
  for (double q : cfg.rho_norms) h.push_back(std::isinf(q) ? "rho_inf" : "rho_q" + exponent_label(q));
  for (const char* s : {"R_sup", "W_sup", "speed_sup", "clamp_events"}) h.push_back(s);
  return h;
}

void write_diagnostics_csv(const fs::path& path, const std::vector<DiagnosticRecord>& records,
                           const DiagnosticsConfig& cfg) {
  auto out = open_out(path);
  write_header(out, diagnostics_header(cfg));
  for (const auto& r : records) {
    out << shortest(r.time) << ',' << shortest(r.total_mass) << ',' << shortest(r.total_energy);
    for (double v : r.casimirs) out << ',' << shortest(v);
    for (double v : r.e_norms) out << ',' << shortest(v);
    for (double v : r.rho_norms) out << ',' << shortest(v);
    out << ',' << shortest(r.r_sup) << ',' << shortest(r.w_sup) << ',' << shortest(r.speed_sup) << ','
        << r.clamp_events << '\n';
  }
}

std::vector<DiagnosticRecord> read_diagnostics_csv(const fs::path& path, const DiagnosticsConfig& cfg) {
  const auto rows = read_rows(path, diagnostics_header(cfg));
  std::vector<DiagnosticRecord> out;
  const std::size_t nc = cfg.casimirs.size(), ne = cfg.e_norms.size(), nr = cfg.rho_norms.size();
  for (const auto& f : rows) {
    DiagnosticRecord r;
    std::size_t k = 0;
    r.time = num(f[k++], path);
    r.total_mass = num(f[k++], path);
    r.total_energy = num(f[k++], path);
    for (std::size_t i = 0; i < nc; ++i) r.casimirs.push_back(num(f[k++], path));
    for (std::size_t i = 0; i < ne; ++i) r.e_norms.push_back(num(f[k++], path));
    for (std::size_t i = 0; i < nr; ++i) r.rho_norms.push_back(num(f[k++], path));
    r.r_sup = num(f[k++], path);
    r.w_sup = num(f[k++], path);
    r.speed_sup = num(f[k++], path);
    r.clamp_events = count(f[k++], path);
    out.push_back(std::move(r));
  }
  return out;
}

void write_ensemble_csv(const fs::path& path, const Ensemble& e) {
  auto out = open_out(path);
  write_header(out, kEnsembleHeader);
  for (std::size_t i = 0; i < e.size(); ++i)
    out << shortest(e.r()[i]) << ',' << shortest(e.w()[i]) << ',' << shortest(e.ell()[i]) << ','
        << shortest(e.weight()[i]) << '\n';
}

Ensemble read_ensemble_csv(const fs::path& path, ModelTag model, double time) {
  const auto rows = read_rows(path, kEnsembleHeader);
  Ensemble e(model, time);
  e.reserve(rows.size());
  for (const auto& f : rows) {
    try {
      e.push_back({{num(f[0], path), num(f[1], path), num(f[2], path)}, num(f[3], path)});
    } catch (const std::invalid_argument& ex) {
      throw ArtifactError(path.string() + ": " + ex.what());
    }
  }
  return e;
}

void write_trajectories_csv(const fs::path& path, const std::vector<Trajectory>& tracks) {
  auto out = open_out(path);
  write_header(out, kTrajectoryHeader);
  for (const auto& tr : tracks)
    for (std::size_t k = 0; k < tr.size(); ++k) {
      const RadialPoint& s = tr.states[k];
      out << tr.particle << ',' << shortest(tr.times[k]) << ',' << shortest(s.r) << ',' << shortest(s.w) << ','
          << shortest(s.ell) << ',' << shortest(tr.field_mass[k]) << '\n';
    }
}

std::vector<Trajectory> read_trajectories_csv(const fs::path& path) {
  const auto rows = read_rows(path, kTrajectoryHeader);
  std::vector<Trajectory> out;
  for (const auto& f : rows) {
    const std::size_t id = count(f[0], path);
    if (out.empty() || out.back().particle != id) out.push_back(Trajectory{id, {}, {}, {}});
    out.back().append(num(f[1], path), {num(f[2], path), num(f[3], path), num(f[4], path)}, num(f[5], path));
  }
  return out;
}

void write_probes_csv(const fs::path& path, const std::vector<ProbePair>& pairs) {
  auto out = open_out(path);
  write_header(out, kProbeHeader);
  for (const auto& p : pairs)
    for (const auto* side : {&p.minus, &p.plus})
      for (std::size_t k = 0; k < side->size(); ++k) {
        const RadialPoint& s = side->states[k];
        out << p.parent << ',' << (side == &p.minus ? "minus" : "plus") << ',' << shortest(p.tau) << ','
            << shortest(p.delta_w) << ',' << shortest(side->times[k]) << ',' << shortest(s.r) << ','
            << shortest(s.w) << ',' << shortest(s.ell) << ',' << shortest(side->field_mass[k]) << '\n';
      }
}

std::vector<ProbePair> read_probes_csv(const fs::path& path) {
  const auto rows = read_rows(path, kProbeHeader);
  std::vector<ProbePair> out;
  bool expect_new = true;
  for (const auto& f : rows) {
    const std::size_t parent = count(f[0], path);
    const std::string& side = f[1];
    if (side != "minus" && side != "plus") throw ArtifactError(path.string() + ": bad side '" + side + "'");
    // A pair starts with its minus rows; plus rows follow.
    if (side == "minus" && (expect_new || out.back().parent != parent || !out.back().plus.empty())) {
      ProbePair p;
      p.parent = parent;
      p.tau = num(f[2], path);
      p.delta_w = num(f[3], path);
      out.push_back(std::move(p));
      expect_new = false;
    }
    if (out.empty() || out.back().parent != parent) throw ArtifactError(path.string() + ": orphan probe rows");
    Trajectory& t = side == "minus" ? out.back().minus : out.back().plus;
    t.particle = parent;
    t.append(num(f[4], path), {num(f[5], path), num(f[6], path), num(f[7], path)}, num(f[8], path));
  }
  for (const auto& p : out)
    if (p.minus.size() != p.plus.size()) throw ArtifactError(path.string() + ": unbalanced probe pair");
  return out;
}

void write_field_history_csv(const fs::path& path, const FieldHistory& h) {
  auto out = open_out(path);
  write_header(out, kHistoryHeader);
  for (std::size_t k = 0; k < h.size(); ++k) {
    const std::string t = shortest(h.times()[k]);
    for (std::size_t j = 0; j < h.radii(k).size(); ++j)
      out << t << ',' << shortest(h.radii(k)[j]) << ',' << shortest(h.mass(k)[j]) << '\n';
  }
}

FieldHistory read_field_history_csv(const fs::path& path) {
  const auto rows = read_rows(path, kHistoryHeader);
  FieldHistory h;
  std::vector<double> r, m;
  double t = 0.0;
  bool open = false;
  for (const auto& f : rows) {
    const double tt = num(f[0], path);
    if (open && tt != t) {
      h.add(t, std::move(r), std::move(m));
      r.clear();
      m.clear();
    }
    t = tt;
    open = true;
    r.push_back(num(f[1], path));
    m.push_back(num(f[2], path));
  }
  if (open) h.add(t, std::move(r), std::move(m));
  return h;
}

std::string snapshot_file_name(double t) { return "snapshot_" + shortest(t) + ".csv"; }

}  // namespace shellvp
