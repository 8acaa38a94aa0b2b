#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "pimpc/dynamics.hpp"

namespace pimpc {

// One row of the comma-separated flight log. The state is the one observed
// at time t, the command is the one issued at t, and the acceleration is the
// forward difference (v[t+1] - v[t]) / dt.
struct LogRow {
  double t = 0.0;
  QuadState state;
  Control command;
  Vec3 accel = Vec3::Zero();

  // Trial extensions.
  int active_waypoint = 0;
  double q_cost = 0.0;
  Vec3 lwpr_variance = Vec3::Zero();
  double plan_cost = 0.0;  // nominal cost of the optimized plan over the horizon
};

struct FlightLog {
  bool extended = false;  // trial columns present
  std::vector<LogRow> rows;
};

const std::vector<std::string>& base_log_columns();
const std::vector<std::string>& trial_log_columns();

// Full-precision (%.17g) writer; output is byte-identical for identical logs.
void write_flight_log(std::ostream& os, const FlightLog& log);
void write_flight_log(const std::string& path, const FlightLog& log);

struct RejectedRow {
  std::size_t line = 0;
  std::string reason;
};

struct ParsedLog {
  FlightLog log;
  std::vector<RejectedRow> rejected;
};

// Reads base or extended logs. A missing required column throws FormatError
// naming the column; individual malformed rows are collected in `rejected`.
ParsedLog read_flight_log(std::istream& is);
ParsedLog read_flight_log(const std::string& path);

}  // namespace pimpc
