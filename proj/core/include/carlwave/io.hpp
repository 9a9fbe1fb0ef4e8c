#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "carlwave/grid.hpp"
#include "carlwave/wavesolver.hpp"

namespace carlwave {

inline constexpr const char* kArtifactVersion = "0.1.0";

/// All text output uses "%.17g" (round-trip exact for doubles) and '\n'
/// line endings, so identical inputs produce byte-identical files.
std::string format_double(double x);

/// Generic CSV: header row, then one row per entry.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

/// Nodal columns over the grid: x[,y],<name>,... one row per node.
void write_field_csv(const std::string& path, const Grid& g,
                     const std::vector<std::pair<std::string, const std::vector<double>*>>& cols);

/// Flux trace: time,face,node,x[,y],value — one row per (level, face, node).
void write_flux_csv(const std::string& path, const BoundaryFlux& flux);

/// Reads a flux CSV produced by write_flux_csv back onto the given grid.
/// Field-level errors (wrong header, bad number, missing or duplicate cells)
/// raise ConfigError.
BoundaryFlux read_flux_csv(const std::string& path, const Grid& g);

/// Compact binary layouts, little-endian host order.
/// Field:  magic "CWF1", u32 kind=1, u32 dim, u32 nx, u32 ny,
///         then nx*ny doubles row-major (x fastest).
/// Flux:   magic "CWF1", u32 kind=2, u32 dim, u32 levels, u32 n_faces,
///         then per face: u32 face id, u32 n_nodes, levels*n_nodes doubles
///         level-major.
void write_field_bin(const std::string& path, const Grid& g, const std::vector<double>& values);
void write_flux_bin(const std::string& path, const BoundaryFlux& flux);

/// Per-run record: what ran, with which config, and which files it left.
struct RunManifest {
  std::string command;
  std::string version = kArtifactVersion;
  std::string config_hash;
  uint64_t seed = 0;
  int threads = 1;
  std::string started_utc;
  std::string finished_utc;
  std::vector<std::string> outputs;  // names relative to the output directory
};

std::string utc_now();

/// Writes manifest.json into out_dir; every listed output must exist there
/// (its byte size is recorded).
void write_manifest(const std::string& out_dir, const RunManifest& manifest);

}  // namespace carlwave
