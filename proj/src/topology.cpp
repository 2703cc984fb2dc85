#include "qttfem/topology.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "qttfem/errors.hpp"

namespace qttfem
{
  namespace
  {
    // side endpoints in increasing parameter order
    constexpr std::array<std::array<int, 2>, 4> side_corners = {{{0, 1}, {1, 2}, {3, 2}, {0, 3}}};

    std::string trim(const std::string& s)
    {
      const auto a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return "";
      const auto b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    }

    std::string num(double v)
    {
      char buf[64];
      auto r = std::to_chars(buf, buf + sizeof buf, v);
      return std::string(buf, r.ptr);
    }

    double to_double(const std::string& s, const std::string& what)
    {
      double v = 0;
      auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw TopologyError("bad number for " + what + ": '" + s + "'");
      return v;
    }

    int to_int(const std::string& s, const std::string& what)
    {
      long long v = 0;
      auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw TopologyError("bad integer for " + what + ": '" + s + "'");
      return static_cast<int>(v);
    }

    double scale_of(const std::vector<SubdomainSpec>& subs)
    {
      double s = 0;
      for (const auto& sd : subs)
        for (const auto& c : sd.corners) s = std::max(s, c.cwiseAbs().maxCoeff());
      return std::max(s, 1.0);
    }

    double cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }
  }

  bool ProblemConfig::operator==(const ProblemConfig& o) const
  {
    if (name != o.name || d != o.d || quadrature != o.quadrature || ordering != o.ordering || paper_determinant != o.paper_determinant) return false;
    if (material.youngs_modulus != o.material.youngs_modulus || material.poisson_ratio != o.material.poisson_ratio || material.mode != o.material.mode) return false;
    if (epsilon != o.epsilon || gamma != o.gamma || d_ref != o.d_ref || expected_alpha != o.expected_alpha) return false;
    if (solver.max_sweeps != o.solver.max_sweeps || solver.kick_rank != o.solver.kick_rank || solver.seed != o.solver.seed) return false;
    if (subdomains.size() != o.subdomains.size()) return false;
    for (std::size_t m = 0; m < subdomains.size(); ++m)
    {
      const auto &a = subdomains[m], &b = o.subdomains[m];
      if (a.body_force != b.body_force) return false;
      for (int k = 0; k < 4; ++k)
        if (a.corners[k] != b.corners[k] || a.sides[k].tag != b.sides[k].tag || a.sides[k].traction != b.sides[k].traction) return false;
    }
    return true;
  }

  SideCondition parse_side(const std::string& t)
  {
    if (t == "free") return {SideTag::free};
    if (t == "clamped") return {SideTag::clamped};
    if (t == "roller-x") return {SideTag::roller_x};
    if (t == "roller-y") return {SideTag::roller_y};
    if (t.rfind("traction(", 0) == 0 && t.back() == ')')
    {
      const auto body = t.substr(9, t.size() - 10);
      const auto comma = body.find(',');
      if (comma == std::string::npos) throw TopologyError("traction needs two components: " + t);
      return {SideTag::traction, Eigen::Vector2d(to_double(body.substr(0, comma), "traction"), to_double(body.substr(comma + 1), "traction"))};
    }
    throw TopologyError("unknown side tag '" + t + "'");
  }

  std::string format_side(const SideCondition& s)
  {
    if (s.tag == SideTag::traction) return "traction(" + num(s.traction.x()) + "," + num(s.traction.y()) + ")";
    return to_string(s.tag);
  }

  ProblemConfig parse_config(std::istream& is)
  {
    ProblemConfig c;
    std::string line;
    bool table = false;
    int lineno = 0;
    while (std::getline(is, line))
    {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line == "subdomains:")
      {
        table = true;
        continue;
      }
      if (table)
      {
        std::istringstream row(line);
        std::vector<std::string> tok;
        for (std::string t; row >> t;) tok.push_back(t);
        if (tok.size() != 12 && tok.size() != 14) throw TopologyError("line " + std::to_string(lineno) + ": subdomain row needs 8 coordinates, 4 side tags and optionally 2 body force components");
        SubdomainSpec s;
        for (int k = 0; k < 4; ++k) s.corners[k] = Eigen::Vector2d(to_double(tok[2 * k], "corner"), to_double(tok[2 * k + 1], "corner"));
        for (int k = 0; k < 4; ++k) s.sides[k] = parse_side(tok[8 + k]);
        if (tok.size() == 14) s.body_force = Eigen::Vector2d(to_double(tok[12], "body force"), to_double(tok[13], "body force"));
        c.subdomains.push_back(s);
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw TopologyError("line " + std::to_string(lineno) + ": expected key = value");
      const auto key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
      if (key == "name") c.name = val;
      else if (key == "d") c.d = to_int(val, key);
      else if (key == "youngs_modulus") c.material.youngs_modulus = to_double(val, key);
      else if (key == "poisson_ratio") c.material.poisson_ratio = to_double(val, key);
      else if (key == "stress")
      {
        if (val == "plane_stress") c.material.mode = StressMode::plane_stress;
        else if (val == "plane_strain") c.material.mode = StressMode::plane_strain;
        else throw TopologyError("stress must be plane_stress or plane_strain");
      }
      else if (key == "quadrature")
      {
        if (val == "gauss2") c.quadrature = Quadrature::gauss2;
        else if (val == "midpoint") c.quadrature = Quadrature::midpoint;
        else throw TopologyError("quadrature must be gauss2 or midpoint");
      }
      else if (key == "ordering")
      {
        if (val == "zorder") c.ordering = Ordering::zorder;
        else if (val == "canonical") c.ordering = Ordering::canonical;
        else throw TopologyError("ordering must be zorder or canonical");
      }
      else if (key == "paper_determinant") c.paper_determinant = val == "true" || val == "1";
      else if (key == "epsilon") c.epsilon = to_double(val, key);
      else if (key == "gamma") c.gamma = val == "auto" ? 0 : to_double(val, key);
      else if (key == "max_sweeps") c.solver.max_sweeps = to_int(val, key);
      else if (key == "kick_rank") c.solver.kick_rank = to_int(val, key);
      else if (key == "seed") c.solver.seed = static_cast<std::uint64_t>(std::stoull(val));
      else if (key == "d_ref") c.d_ref = to_int(val, key);
      else if (key == "expected_alpha") c.expected_alpha = to_double(val, key);
      else throw TopologyError("unknown key '" + key + "'");
    }
    if (c.subdomains.empty()) throw TopologyError("configuration has no subdomains");
    constitutive_matrix(c.material.youngs_modulus, c.material.poisson_ratio, c.material.mode);
    return c;
  }

  ProblemConfig load_config(const std::string& path)
  {
    std::ifstream f(path);
    if (!f) throw TopologyError("cannot open " + path);
    return parse_config(f);
  }

  void write_config(std::ostream& os, const ProblemConfig& c)
  {
    os << "name = " << c.name << "\n"
       << "d = " << c.d << "\n"
       << "youngs_modulus = " << num(c.material.youngs_modulus) << "\n"
       << "poisson_ratio = " << num(c.material.poisson_ratio) << "\n"
       << "stress = " << (c.material.mode == StressMode::plane_stress ? "plane_stress" : "plane_strain") << "\n"
       << "quadrature = " << (c.quadrature == Quadrature::gauss2 ? "gauss2" : "midpoint") << "\n"
       << "ordering = " << (c.ordering == Ordering::zorder ? "zorder" : "canonical") << "\n"
       << "paper_determinant = " << (c.paper_determinant ? "true" : "false") << "\n"
       << "epsilon = " << num(c.epsilon) << "\n"
       << "gamma = " << (c.gamma == 0 ? std::string("auto") : num(c.gamma)) << "\n"
       << "max_sweeps = " << c.solver.max_sweeps << "\n"
       << "kick_rank = " << c.solver.kick_rank << "\n"
       << "seed = " << c.solver.seed << "\n"
       << "d_ref = " << c.d_ref << "\n"
       << "expected_alpha = " << num(c.expected_alpha) << "\n"
       << "subdomains:\n"
       << "# x0 y0 x1 y1 x2 y2 x3 y3  bottom right top left  fx fy\n";
    for (const auto& s : c.subdomains)
    {
      for (const auto& p : s.corners) os << num(p.x()) << " " << num(p.y()) << " ";
      for (const auto& sd : s.sides) os << " " << format_side(sd);
      os << "  " << num(s.body_force.x()) << " " << num(s.body_force.y()) << "\n";
    }
  }

  bool DomainTopology::is_interface_side(int m, int side) const
  {
    for (const auto& f : interfaces)
      if ((f.m == m && f.side_m == side) || (f.p == m && f.side_p == side)) return true;
    return false;
  }

  SubdomainMesh DomainTopology::mesh(int m, int d) const
  {
    SubdomainMesh mesh;
    mesh.d = d;
    mesh.corners = subdomains.at(m).corners;
    mesh.sides = subdomains[m].sides;
    mesh.body_force = subdomains[m].body_force;
    return mesh;
  }

  std::array<long, 2> corner_node(int c, int d)
  {
    const long last = (1L << d) - 1;
    return {(reference_corners[c][0] + 1) / 2 * last, (reference_corners[c][1] + 1) / 2 * last};
  }

  DomainTopology build_topology(const std::vector<SubdomainSpec>& subs)
  {
    DomainTopology t;
    t.subdomains = subs;
    const double tol = 1e-12 * scale_of(subs);
    const auto same = [&](const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return (a - b).norm() <= tol; };

    for (std::size_t m = 0; m < subs.size(); ++m)
    {
      const auto& c = subs[m].corners;
      double area = 0;
      for (int k = 0; k < 4; ++k) area += cross(c[k], c[(k + 1) % 4]);
      if (area <= 0) throw TopologyError("subdomain " + std::to_string(m) + " corners are not counterclockwise");
    }

    for (int m = 0; m < int(subs.size()); ++m)
      for (int p = m + 1; p < int(subs.size()); ++p)
      {
        std::array<bool, 4> corner_used_m{}, corner_used_p{};
        for (int sm = 0; sm < 4; ++sm)
          for (int sp = 0; sp < 4; ++sp)
          {
            const auto a0 = subs[m].corners[side_corners[sm][0]], a1 = subs[m].corners[side_corners[sm][1]];
            const auto b0 = subs[p].corners[side_corners[sp][0]], b1 = subs[p].corners[side_corners[sp][1]];
            const bool fwd = same(a0, b0) && same(a1, b1), rev = same(a0, b1) && same(a1, b0);
            if (fwd || rev)
            {
              t.interfaces.push_back({m, sm, p, sp, rev});
              corner_used_m[side_corners[sm][0]] = corner_used_m[side_corners[sm][1]] = true;
              corner_used_p[side_corners[sp][0]] = corner_used_p[side_corners[sp][1]] = true;
              continue;
            }
            // collinear sides with overlap of positive length cannot be matched node by node
            const Eigen::Vector2d u = a1 - a0;
            const double L = u.norm();
            if (std::abs(cross(u, b0 - a0)) <= tol * L && std::abs(cross(u, b1 - a0)) <= tol * L)
            {
              const double s0 = u.dot(b0 - a0) / L, s1 = u.dot(b1 - a0) / L;
              const double lo = std::max(0.0, std::min(s0, s1)), hi = std::min(L, std::max(s0, s1));
              if (hi - lo > tol)
                throw TopologyError("non-conforming interface between subdomain " + std::to_string(m) + " side " + to_string(Side(sm)) + " and subdomain " + std::to_string(p) + " side " + to_string(Side(sp)));
            }
          }
        for (int cm = 0; cm < 4; ++cm)
          for (int cp = 0; cp < 4; ++cp)
            if (!corner_used_m[cm] && !corner_used_p[cp] && same(subs[m].corners[cm], subs[p].corners[cp])) t.corner_links.push_back({m, cm, p, cp});
      }

    for (const auto& f : t.interfaces)
      for (auto [m, s] : {std::pair{f.m, f.side_m}, std::pair{f.p, f.side_p}})
        if (subs[m].sides[s].tag != SideTag::free)
          throw TopologyError("subdomain " + std::to_string(m) + " side " + to_string(Side(s)) + " is an interface but carries a boundary condition");
    return t;
  }

  std::vector<std::pair<std::array<long, 2>, std::array<long, 2>>> coincident_nodes(const DomainTopology& topo, int m, int p, int d)
  {
    std::vector<std::pair<std::array<long, 2>, std::array<long, 2>>> out;
    if (m == p) return out;
    const auto mm = topo.mesh(m, d), mp = topo.mesh(p, d);
    const double tol = 1e-12 * std::max(mm.diameter(), mp.diameter());
    const long n = mm.nodes_per_side();
    std::vector<std::array<long, 2>> bm, bp;
    for (long k = 0; k < n; ++k)
      for (int s = 0; s < 4; ++s)
      {
        bm.push_back(mm.side_node(Side(s), k));
        bp.push_back(mp.side_node(Side(s), k));
      }
    const auto dedup = [](std::vector<std::array<long, 2>>& v) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    dedup(bm);
    dedup(bp);
    for (const auto& a : bm)
    {
      const auto xa = mm.node(a[0], a[1]);
      for (const auto& b : bp)
        if ((xa - mp.node(b[0], b[1])).norm() <= tol) out.push_back({a, b});
    }
    return out;
  }

  namespace
  {
    SubdomainSpec box(double x0, double y0, double x1, double y1)
    {
      SubdomainSpec s;
      s.corners = {Eigen::Vector2d(x0, y0), Eigen::Vector2d(x1, y0), Eigen::Vector2d(x1, y1), Eigen::Vector2d(x0, y1)};
      return s;
    }
  }

  ProblemConfig cantilever_config()
  {
    ProblemConfig c;
    c.name = "cantilever";
    c.material = {64, 0};
    c.d_ref = 8;
    c.expected_alpha = 1;
    for (int m = 0; m < 20; ++m)
    {
      auto s = box(m, 0, m + 1, 1);
      s.body_force = Eigen::Vector2d(0, -1);
      c.subdomains.push_back(s);
    }
    c.subdomains.front().sides[int(Side::left)] = {SideTag::clamped};
    return c;
  }

  ProblemConfig sen_config()
  {
    ProblemConfig c;
    c.name = "sen";
    c.material = {64, 0};
    c.d_ref = 9;
    c.expected_alpha = 0.5;
    auto a = box(0, 0, 0.5, 0.5), b = box(0.5, 0, 1, 0.5);
    a.sides[int(Side::left)] = {SideTag::roller_x};
    a.sides[int(Side::top)] = {SideTag::traction, Eigen::Vector2d(0, 3)};
    b.sides[int(Side::bottom)] = {SideTag::roller_y};
    b.sides[int(Side::top)] = {SideTag::traction, Eigen::Vector2d(0, 3)};
    c.subdomains = {a, b};
    return c;
  }

  ProblemConfig lshape_config()
  {
    ProblemConfig c;
    c.name = "lshape";
    c.material = {64, 0};
    c.d_ref = 9;
    c.expected_alpha = 0.9;
    auto a = box(0, 0, 0.5, 0.5), b = box(0.5, 0, 1, 0.5), e = box(0, 0.5, 0.5, 1);
    a.sides[int(Side::left)] = {SideTag::roller_x};
    a.sides[int(Side::bottom)] = {SideTag::roller_y};
    b.sides[int(Side::bottom)] = {SideTag::roller_y};
    b.sides[int(Side::right)] = {SideTag::traction, Eigen::Vector2d(3, 0)};
    e.sides[int(Side::left)] = {SideTag::roller_x};
    e.sides[int(Side::top)] = {SideTag::traction, Eigen::Vector2d(0, -3)};
    c.subdomains = {a, b, e};
    return c;
  }

  ProblemConfig builtin_config(const std::string& name)
  {
    if (name == "cantilever") return cantilever_config();
    if (name == "sen") return sen_config();
    if (name == "lshape") return lshape_config();
    throw ArgumentError("unknown case '" + name + "' (cantilever, sen, lshape)");
  }
}
