#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "kerrstab/cli_io.hpp"

namespace kerr {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void io_failure(const std::string& what, const std::filesystem::path& file) {
  throw std::runtime_error(what + " " + file.string() + ": " + std::strerror(errno));
}

}  // namespace

void write_text(const std::filesystem::path& file, const std::string& text) {
  if (file.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(file.parent_path(), ec);
    if (ec) throw std::runtime_error("cannot create " + file.parent_path().string() + ": " + ec.message());
  }
  errno = 0;
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) io_failure("cannot open", file);
  out << text;
  out.flush();
  if (!out) io_failure("cannot write", file);
}

void write_csv(const std::filesystem::path& file, const std::string& header,
               const std::vector<std::vector<double>>& rows) {
  std::string text = header + "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) text += ',';
      text += fmt(row[i]);
    }
    text += '\n';
  }
  write_text(file, text);
}

void write_decay_csv(const std::filesystem::path& file, const std::vector<double>& t, const std::vector<double>& sup) {
  if (t.size() != sup.size()) throw std::invalid_argument("write_decay_csv: column lengths differ");
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < t.size(); ++i) rows.push_back({t[i], sup[i]});
  write_csv(file, "t,sup_abs_phi", rows);
}

void write_snapshots_csv(const std::filesystem::path& file, const std::vector<FieldSnapshot>& snaps) {
  std::vector<std::vector<double>> rows;
  for (const auto& s : snaps)
    for (std::size_t i = 0; i < s.u.size(); ++i)
      for (std::size_t j = 0; j < s.x.size(); ++j)
        rows.push_back({s.t, s.u[i], std::acos(s.x[j]), s.phi(i, j).real(), s.phi(i, j).imag()});
  write_csv(file, "t,u,theta,re_phi,im_phi", rows);
}

std::vector<FieldSnapshot> read_snapshots_csv(const std::filesystem::path& file) {
  errno = 0;
  std::ifstream in(file);
  if (!in) io_failure("cannot open", file);
  std::string line;
  std::getline(in, line);
  if (line != "t,u,theta,re_phi,im_phi") throw std::runtime_error("unexpected snapshot header in " + file.string());
  // t -> u -> theta -> value, keeping file order of times
  std::map<double, std::map<double, std::map<double, cplx>>> data;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    double v[5];
    char comma;
    for (int n = 0; n < 5; ++n) {
      if (n) ss >> comma;
      if (!(ss >> v[n])) throw std::runtime_error("malformed row in " + file.string() + ": " + line);
    }
    data[v[0]][v[1]][v[2]] = cplx(v[3], v[4]);
  }
  std::vector<FieldSnapshot> out;
  for (const auto& [t, rows] : data) {
    FieldSnapshot s;
    s.t = t;
    for (const auto& [theta, val] : rows.begin()->second) {
      (void)val;
      s.x.push_back(std::cos(theta));
      s.weights.push_back(1.0);
    }
    s.phi.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(s.x.size()));
    int i = 0;
    for (const auto& [u, angles] : rows) {
      s.u.push_back(u);
      if (angles.size() != s.x.size()) throw std::runtime_error("ragged snapshot in " + file.string());
      int j = 0;
      for (const auto& [theta, val] : angles) {
        (void)theta;
        s.phi(i, j++) = val;
      }
      ++i;
    }
    out.push_back(std::move(s));
  }
  return out;
}

nlohmann::json make_manifest(const std::string& command, const RunConfig& cfg, const nlohmann::json& measured,
                             const std::vector<std::string>& outputs) {
  nlohmann::json m;
  m["manifest_version"] = 1;
  m["code_version"] = kCodeVersion;
  m["command"] = command;
  m["config"] = config_to_json(cfg);
  m["measured"] = measured.is_null() ? nlohmann::json::object() : measured;
  m["outputs"] = outputs;
  return m;
}

void write_manifest(const std::filesystem::path& dir, const nlohmann::json& manifest) {
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace kerr
