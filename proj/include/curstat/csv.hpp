#pragma once

// CSV round-trip for observation tables.  Header is mandatory: either
// t_1,..,t_d,delta_1,..,delta_d or the short form t,delta for d = 1; the
// dimension is inferred from it.

#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "curstat/model.hpp"

namespace curstat {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r' && c != ' ' && c != '\t') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

inline void write_observations(std::ostream& os,
                               const std::vector<Observation>& obs) {
  require(!obs.empty(), "nothing to write");
  int d = obs.front().dim();
  if (d == 1) {
    os << "t,delta\n";
  } else {
    for (int j = 1; j <= d; ++j) os << "t_" << j << ",";
    for (int j = 1; j <= d; ++j) os << "delta_" << j << (j == d ? "" : ",");
    os << "\n";
  }
  for (const auto& o : obs) {
    require(o.dim() == d, "mixed dimensions in observation list");
    for (int j = 0; j < d; ++j) os << format_double(o.t[j]) << ",";
    for (int j = 0; j < d; ++j) os << o.delta[j] << (j == d - 1 ? "" : ",");
    os << "\n";
  }
}

inline std::vector<Observation> read_observations(std::istream& is) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), "empty input: header row required");
  auto head = detail::split_csv_line(line);
  int d = 0;
  if (head.size() == 2 && head[0] == "t" && head[1] == "delta") {
    d = 1;
  } else {
    require(head.size() % 2 == 0, "header must list t_1..t_d,delta_1..delta_d");
    d = static_cast<int>(head.size()) / 2;
    for (int j = 0; j < d; ++j) {
      require(head[j] == "t_" + std::to_string(j + 1) &&
                  head[d + j] == "delta_" + std::to_string(j + 1),
              "header must list t_1..t_d,delta_1..delta_d");
    }
  }
  std::vector<Observation> obs;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto f = detail::split_csv_line(line);
    require(f.size() == std::size_t(2 * d),
            "row " + std::to_string(lineno) + ": expected " +
                std::to_string(2 * d) + " fields");
    Observation o;
    o.t.resize(d);
    o.delta.resize(d);
    for (int j = 0; j < d; ++j) o.t[j] = parse_double(f[j]);
    for (int j = 0; j < d; ++j) {
      double v = parse_double(f[d + j]);
      require(v == 0.0 || v == 1.0,
              "row " + std::to_string(lineno) + ": delta must be 0 or 1");
      o.delta[j] = static_cast<int>(v);
    }
    o.validate();
    obs.push_back(std::move(o));
  }
  require(!obs.empty(), "no data rows");
  return obs;
}

}  // namespace curstat
