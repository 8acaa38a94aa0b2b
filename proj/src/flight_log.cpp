#include "pimpc/flight_log.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "pimpc/error.hpp"

namespace pimpc {

const std::vector<std::string>& base_log_columns() {
  static const std::vector<std::string> cols = {
      "t",     "x",     "y",     "z",     "vx",    "vy",     "vz",
      "roll",  "pitch", "yaw",   "p",     "q",     "r",      "cmd_p",
      "cmd_q", "cmd_r", "thrust", "ax",   "ay",    "az"};
  return cols;
}

const std::vector<std::string>& trial_log_columns() {
  static const std::vector<std::string> cols = {
      "active_waypoint", "q_cost", "lwpr_var_ax", "lwpr_var_ay", "lwpr_var_az",
      "plan_cost"};
  return cols;
}

namespace {

std::vector<double> row_values(const LogRow& r, bool extended) {
  const QuadState& s = r.state;
  std::vector<double> v = {r.t,
                           s.position(0), s.position(1), s.position(2),
                           s.velocity(0), s.velocity(1), s.velocity(2),
                           s.angles(0),   s.angles(1),   s.angles(2),
                           s.rates(0),    s.rates(1),    s.rates(2),
                           r.command.desired_rates(0), r.command.desired_rates(1),
                           r.command.desired_rates(2), r.command.thrust,
                           r.accel(0),    r.accel(1),    r.accel(2)};
  if (extended) {
    v.push_back(static_cast<double>(r.active_waypoint));
    v.push_back(r.q_cost);
    v.push_back(r.lwpr_variance(0));
    v.push_back(r.lwpr_variance(1));
    v.push_back(r.lwpr_variance(2));
    v.push_back(r.plan_cost);
  }
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& text, double& out) {
  const std::string s = trim(text);
  if (s.empty()) return false;
  // strtod accepts "nan"/"inf", which from_chars in libstdc++ 11 also does;
  // finiteness is checked by the caller.
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

}  // namespace

void write_flight_log(std::ostream& os, const FlightLog& log) {
  bool first = true;
  for (const auto& c : base_log_columns()) {
    os << (first ? "" : ",") << c;
    first = false;
  }
  if (log.extended) {
    for (const auto& c : trial_log_columns()) os << ',' << c;
  }
  os << '\n';
  char buf[32];
  for (const LogRow& r : log.rows) {
    const auto values = row_values(r, log.extended);
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", values[i]);
      if (i > 0) os << ',';
      os << buf;
    }
    os << '\n';
  }
}

void write_flight_log(const std::string& path, const FlightLog& log) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_flight_log(os, log);
}

ParsedLog read_flight_log(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("empty flight log", 1);
  const auto header = split(line);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) index[trim(header[i])] = i;

  auto require = [&](const std::vector<std::string>& cols) {
    std::vector<std::size_t> pos;
    for (const auto& c : cols) {
      auto it = index.find(c);
      if (it == index.end()) throw FormatError("missing column '" + c + "'", 1);
      pos.push_back(it->second);
    }
    return pos;
  };
  const auto base = require(base_log_columns());
  ParsedLog out;
  std::vector<std::size_t> ext;
  if (index.count(trial_log_columns().front()) > 0) {
    ext = require(trial_log_columns());
    out.log.extended = true;
  }

  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      out.rejected.push_back({line_no, "expected " + std::to_string(header.size()) +
                                           " fields, got " + std::to_string(cells.size())});
      continue;
    }
    std::vector<double> v(base.size() + ext.size());
    std::string bad;
    for (std::size_t i = 0; i < base.size() && bad.empty(); ++i) {
      if (!parse_double(cells[base[i]], v[i]) || !std::isfinite(v[i])) {
        bad = base_log_columns()[i];
      }
    }
    for (std::size_t i = 0; i < ext.size() && bad.empty(); ++i) {
      // Variance columns may legitimately be nan when no learned model probed the flight.
      double& x = v[base.size() + i];
      if (!parse_double(cells[ext[i]], x)) bad = trial_log_columns()[i];
    }
    if (!bad.empty()) {
      out.rejected.push_back({line_no, "invalid value in column '" + bad + "'"});
      continue;
    }
    LogRow r;
    r.t = v[0];
    r.state.position = Vec3(v[1], v[2], v[3]);
    r.state.velocity = Vec3(v[4], v[5], v[6]);
    r.state.angles = Vec3(v[7], v[8], v[9]);
    r.state.rates = Vec3(v[10], v[11], v[12]);
    r.command.desired_rates = Vec3(v[13], v[14], v[15]);
    r.command.thrust = v[16];
    r.accel = Vec3(v[17], v[18], v[19]);
    if (out.log.extended) {
      const std::size_t b = base.size();
      r.active_waypoint = static_cast<int>(v[b]);
      r.q_cost = v[b + 1];
      r.lwpr_variance = Vec3(v[b + 2], v[b + 3], v[b + 4]);
      r.plan_cost = v[b + 5];
    }
    out.log.rows.push_back(r);
  }
  return out;
}

ParsedLog read_flight_log(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_flight_log(is);
}

}  // namespace pimpc
