#include "carlwave/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "carlwave/errors.hpp"
#include "json.hpp"

namespace carlwave {

namespace {

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::binary) {
  std::ofstream out(path, mode);
  if (!out) throw ConfigError("cannot open output file '" + path + "'");
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (std::getline(in, tok, ',')) out.push_back(tok);
  return out;
}

double parse_cell(const std::string& tok, const std::string& path, int lineno, int col) {
  char* end = nullptr;
  const double x = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') {
    throw ConfigError(path + ":" + std::to_string(lineno) + ": column " + std::to_string(col + 1) +
                      ": not a number: '" + tok + "'");
  }
  return x;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out = open_out(path);
  for (size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << "\n";
  for (const auto& row : rows) {
    for (size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_double(row[c]);
    out << "\n";
  }
}

void write_field_csv(const std::string& path, const Grid& g,
                     const std::vector<std::pair<std::string, const std::vector<double>*>>& cols) {
  std::ofstream out = open_out(path);
  out << "x";
  if (g.domain.dim == 2) out << ",y";
  for (const auto& [name, values] : cols) {
    (void)values;
    out << "," << name;
  }
  out << "\n";
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const Point p = g.node(i, j);
      out << format_double(p.x);
      if (g.domain.dim == 2) out << "," << format_double(p.y);
      for (const auto& [name, values] : cols) {
        (void)name;
        out << "," << format_double((*values)[g.index(i, j)]);
      }
      out << "\n";
    }
}

void write_flux_csv(const std::string& path, const BoundaryFlux& flux) {
  const Grid& g = flux.grid;
  std::ofstream out = open_out(path);
  out << (g.domain.dim == 2 ? "time,face,node,x,y,value" : "time,face,node,x,value") << "\n";
  for (int l = 0; l < flux.levels(); ++l) {
    const double t = flux.time(l);
    for (const FaceTrace& tr : flux.faces) {
      for (int k = 0; k < tr.n_nodes; ++k) {
        const Point p = g.node(face_node_index(g, tr.face, k));
        out << format_double(t) << "," << tr.face << "," << k << "," << format_double(p.x);
        if (g.domain.dim == 2) out << "," << format_double(p.y);
        out << "," << format_double(tr.at(l, k)) << "\n";
      }
    }
  }
}

BoundaryFlux read_flux_csv(const std::string& path, const Grid& g) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open flux CSV '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::string expect = g.domain.dim == 2 ? "time,face,node,x,y,value" : "time,face,node,x,value";
  if (line != expect) {
    throw ConfigError(path + ":1: header must be '" + expect + "', got '" + line + "'");
  }
  const int tcol = 0, fcol = 1, ncol = 2;
  const int vcol = g.domain.dim == 2 ? 5 : 4;
  const int ncols = vcol + 1;

  // face id -> per-(level,node) storage and fill mask
  std::map<int, std::vector<double>> values;
  std::map<int, std::vector<char>> seen;
  const int levels = g.nt + 1;

  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> toks = split_csv_line(line);
    if (static_cast<int>(toks.size()) != ncols) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(ncols) + " columns, got " + std::to_string(toks.size()));
    }
    const double t = parse_cell(toks[tcol], path, lineno, tcol);
    const double face_d = parse_cell(toks[fcol], path, lineno, fcol);
    const double node_d = parse_cell(toks[ncol], path, lineno, ncol);
    const double value = parse_cell(toks[vcol], path, lineno, vcol);

    const int face = static_cast<int>(face_d);
    if (face < 0 || face >= g.domain.face_count() || face != face_d) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": invalid face id '" + toks[fcol] +
                        "'");
    }
    const int n_nodes = face_node_count(g, face);
    const int node = static_cast<int>(node_d);
    if (node < 0 || node >= n_nodes || node != node_d) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": node index out of range: '" +
                        toks[ncol] + "'");
    }
    const int level = static_cast<int>(std::lround(t / g.dt));
    if (level < 0 || level >= levels || std::abs(t - level * g.dt) > 1e-9 * std::max(1.0, g.T)) {
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": time does not match the configured grid: '" + toks[tcol] + "'");
    }
    auto& vv = values[face];
    auto& ss = seen[face];
    if (vv.empty()) {
      vv.assign(static_cast<size_t>(levels) * n_nodes, 0.0);
      ss.assign(static_cast<size_t>(levels) * n_nodes, 0);
    }
    const size_t idx = static_cast<size_t>(level) * n_nodes + node;
    if (ss[idx]) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": duplicate (time, face, node) cell");
    }
    ss[idx] = 1;
    vv[idx] = value;
  }

  if (values.empty()) throw ConfigError(path + ": no data rows");
  BoundaryFlux flux;
  flux.grid = g;
  flux.span = TimeSpan::ZeroToT;
  for (auto& [face, vv] : values) {
    const auto& ss = seen[face];
    for (size_t m = 0; m < ss.size(); ++m)
      if (!ss[m]) {
        throw ConfigError(path + ": missing cells for face " + std::to_string(face) +
                          " (expected every time level and node)");
      }
    FaceTrace tr;
    tr.face = face;
    tr.n_nodes = face_node_count(g, face);
    tr.v = std::move(vv);
    flux.faces.push_back(std::move(tr));
  }
  return flux;
}

void write_field_bin(const std::string& path, const Grid& g, const std::vector<double>& values) {
  std::ofstream out = open_out(path);
  out.write("CWF1", 4);
  const uint32_t head[4] = {1u, static_cast<uint32_t>(g.domain.dim), static_cast<uint32_t>(g.nx),
                            static_cast<uint32_t>(g.ny)};
  out.write(reinterpret_cast<const char*>(head), sizeof(head));
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

void write_flux_bin(const std::string& path, const BoundaryFlux& flux) {
  std::ofstream out = open_out(path);
  out.write("CWF1", 4);
  const uint32_t head[4] = {2u, static_cast<uint32_t>(flux.grid.domain.dim),
                            static_cast<uint32_t>(flux.levels()),
                            static_cast<uint32_t>(flux.faces.size())};
  out.write(reinterpret_cast<const char*>(head), sizeof(head));
  for (const FaceTrace& tr : flux.faces) {
    const uint32_t fh[2] = {static_cast<uint32_t>(tr.face), static_cast<uint32_t>(tr.n_nodes)};
    out.write(reinterpret_cast<const char*>(fh), sizeof(fh));
    out.write(reinterpret_cast<const char*>(tr.v.data()),
              static_cast<std::streamsize>(tr.v.size() * sizeof(double)));
  }
}

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const std::string& out_dir, const RunManifest& manifest) {
  nlohmann::json j;
  j["command"] = manifest.command;
  j["version"] = manifest.version;
  j["config_hash"] = manifest.config_hash;
  j["seed"] = manifest.seed;
  j["threads"] = manifest.threads;
  j["started_utc"] = manifest.started_utc;
  j["finished_utc"] = manifest.finished_utc;
  nlohmann::json files = nlohmann::json::array();
  for (const std::string& name : manifest.outputs) {
    const std::filesystem::path p = std::filesystem::path(out_dir) / name;
    std::error_code ec;
    const auto size = std::filesystem::file_size(p, ec);
    if (ec) throw ConfigError("manifest lists missing output file '" + p.string() + "'");
    files.push_back({{"name", name}, {"bytes", static_cast<uint64_t>(size)}});
  }
  j["outputs"] = files;
  std::ofstream out = open_out((std::filesystem::path(out_dir) / "manifest.json").string());
  out << j.dump(2) << "\n";
}

}  // namespace carlwave
