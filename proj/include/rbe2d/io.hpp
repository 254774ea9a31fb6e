// Trajectory files and JSON/CSV result writers.
//
// Trajectory layout (all integers and floats little-endian):
//   "RBE2DTRJ" | u32 version | u64 config hash | u64 seed | u64 config length | config text
//   | u64 N | i32 species[N] | f64 charges[N]
//   then per frame: u64 payload bytes | i64 step | f64 time | u64 N | f64 temperature
//   | f64 positions[3N] | f64 velocities[3N] | f64 energy[8]
// The hash is FNV-1a over the echoed resolved configuration text.

#ifndef RBE2D_IO_HPP
#define RBE2D_IO_HPP

#include "rbe2d/analysis.hpp"
#include "rbe2d/config.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <string>
#include <vector>

namespace rbe2d {

inline constexpr std::uint32_t kTrajectoryVersion = 1;
inline constexpr int kSchemaVersion = 1;

struct TrajectoryHeader {
    std::uint32_t version{kTrajectoryVersion};
    std::uint64_t config_hash{0};
    std::uint64_t seed{0};
    std::string config_text;
    Eigen::VectorXi species;
    Eigen::VectorXd charges;
};

class TrajectoryWriter {
public:
    TrajectoryWriter(const std::string& path, const ExperimentConfig& resolved, const ParticleSystem& system);

    void write(const TrajectoryFrame& frame);
    long frames_written() const { return frames_; }
    void close();

private:
    std::ofstream out_;
    std::string path_;
    Eigen::Index n_{0};
    long frames_{0};
};

struct Trajectory {
    TrajectoryHeader header;
    Frames frames;
};

/// Rejects bad magic, unknown versions, hash mismatches and truncated frames.
Trajectory read_trajectory(const std::string& path);

nlohmann::json to_json(const EnergyBreakdown& e);
nlohmann::json to_json(const RunSummary& s);
nlohmann::json error_json(const std::string& kind, const std::string& message);

void write_csv(std::ostream& out, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

}  // namespace rbe2d

#endif
