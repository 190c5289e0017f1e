#pragma once

// Plain-text curve files:
//
//   component <id> <orientation>
//   x y
//   x y
//   ...
//   <blank line>
//   component <id> <orientation>
//   ...
//
// Closure is implicit; repeating the first vertex at the end is rejected.

#include "sdlab/geometry.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace sdlab {

inline PolyCurve parse_curve(std::istream& in, const std::string& source = "<stream>") {
  PolyCurve curve;
  std::string line;
  int lineno = 0;
  bool in_block = false;
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorKind::Parse, "geometry", source + ":" + std::to_string(lineno) + ": " + msg);
  };
  auto close_block = [&]() {
    if (!in_block) return;
    const auto& v = curve.components.back().vertices;
    if (v.size() >= 2 && v.front() == v.back())
      fail("component " + std::to_string(curve.components.back().id) +
           " repeats its first vertex at the end (closure is implicit)");
    in_block = false;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) {
      close_block();
      continue;
    }
    if (line[first] == '#') continue;
    std::istringstream ls(line);
    if (line.compare(first, 9, "component") == 0) {
      close_block();
      std::string kw;
      Component c;
      if (!(ls >> kw >> c.id >> c.orientation)) fail("expected 'component <id> <orientation>'");
      if (c.orientation != 1 && c.orientation != -1) fail("orientation must be 1 or -1");
      std::string extra;
      if (ls >> extra) fail("trailing text after component header");
      curve.components.push_back(std::move(c));
      in_block = true;
      continue;
    }
    if (!in_block) fail("vertex outside a component block");
    double x = 0.0, y = 0.0;
    if (!(ls >> x >> y)) fail("expected 'x y'");
    std::string extra;
    if (ls >> extra) fail("trailing text after vertex");
    curve.components.back().vertices.emplace_back(x, y);
  }
  close_block();
  if (curve.components.empty()) fail("no components");
  return curve;
}

inline PolyCurve read_curve_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Parse, "geometry", "cannot open " + path);
  return parse_curve(in, path);
}

inline void write_curve(std::ostream& out, const PolyCurve& curve) {
  out << std::setprecision(17);
  for (std::size_t c = 0; c < curve.size(); ++c) {
    if (c) out << '\n';
    out << "component " << curve[c].id << ' ' << curve[c].orientation << '\n';
    for (const auto& p : curve[c].vertices) out << p.x() << ' ' << p.y() << '\n';
  }
}

inline void write_curve_file(const std::string& path, const PolyCurve& curve) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Parse, "geometry", "cannot write " + path);
  write_curve(out, curve);
}

}  // namespace sdlab
