#pragma once

#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "fdelab/evolution.hpp"
#include "fdelab/experiments.hpp"
#include "fdelab/profiles.hpp"
#include "fdelab/rescaled.hpp"

namespace fdelab::io {

/// Contents of a field dump. Layout, all little-endian:
///   "FDE1" | u32 shape | i32 dim | f64 a | f64 b | u64 n | u64 n_theta |
///   f64 time | u64 count | count x f64 values
struct FieldDump {
    GridDescriptor grid;
    double time = 0.0;
    std::vector<double> values;
};

void write_field(const std::filesystem::path& path, const Field& field, double time = 0.0);
FieldDump read_field(const std::filesystem::path& path);
/// Typed read: throws DescriptorMismatch unless the dump was written on a
/// grid with the same descriptor.
Field read_field(const std::filesystem::path& path, const GridPtr& grid, double* time = nullptr);

/// Columns: t,J,R,h10,lm,linf
void write_monitors_csv(const std::filesystem::path& path, const Trajectory& traj);
/// Columns: s,J,R,h10,lm,linf,dissipation,Jprime_hminus1. The dissipation of
/// the step ending at a point is written on that point's row.
void write_rescaled_csv(const std::filesystem::path& path, const RescaledTrajectory& traj);
/// Columns: index,r,theta,value
void write_field_csv(const std::filesystem::path& path, const Field& field);

nlohmann::json to_json(const GridDescriptor& grid);
GridDescriptor grid_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EnergyReport& r);
nlohmann::json to_json(const ExtinctionEstimate& est);
nlohmann::json to_json(const ProfileResult& r);
nlohmann::json to_json(const ProbeReport& r);
nlohmann::json to_json(const CertificateReport& r);
nlohmann::json to_json(const LojasiewiczFit& r);

/// Field dump `<stem>.bin` plus JSON sidecar `<stem>.json`.
void write_profile(const std::filesystem::path& stem, const ProfileResult& r);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace fdelab::io
