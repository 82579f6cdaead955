#include "plsmooth/norms.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace plsmooth {

const SimplexRule& tet_rule() {
  static const SimplexRule rule = [] {
    SimplexRule r;
    r.degree = 5;
    auto corner_class = [&](double a, double w) {
      double b = 1 - 3 * a;
      for (int i = 0; i < 4; ++i) {
        std::array<double, 4> l = {a, a, a, a};
        l[i] = b;
        r.nodes.push_back(l);
        r.weights.push_back(w);
      }
    };
    corner_class(0.0927352503108912264, 0.0734930431163619495);
    corner_class(0.310885919263300609797, 0.112687925718015850799);
    const double c = 0.0455037041256496494918, d = 0.5 - c;
    const int pairs[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
    for (const auto& pr : pairs) {
      std::array<double, 4> l = {d, d, d, d};
      l[pr[0]] = c;
      l[pr[1]] = c;
      r.nodes.push_back(l);
      r.weights.push_back(0.0425460207770814664);
    }
    double s = 0;
    for (double w : r.weights) s += w;
    for (double& w : r.weights) w /= s;
    return r;
  }();
  return rule;
}

const SimplexRule& triangle_rule() {
  static const SimplexRule rule = [] {
    SimplexRule r;
    r.degree = 5;
    r.nodes.push_back({1.0 / 3, 1.0 / 3, 1.0 / 3, 0});
    r.weights.push_back(0.225);
    auto orbit = [&](double a, double b, double w) {
      r.nodes.push_back({a, b, b, 0});
      r.nodes.push_back({b, a, b, 0});
      r.nodes.push_back({b, b, a, 0});
      for (int i = 0; i < 3; ++i) r.weights.push_back(w);
    };
    orbit(0.059715871789770, 0.470142064105115, 0.132394152788506);
    orbit(0.797426985353087, 0.101286507323456, 0.125939180544827);
    return r;
  }();
  return rule;
}

std::vector<QuadNode> tet_nodes(const Tet& t) {
  const auto& rule = tet_rule();
  const double vol = std::abs(signed_volume(t));
  std::vector<QuadNode> out;
  out.reserve(rule.nodes.size());
  for (size_t k = 0; k < rule.nodes.size(); ++k) {
    Vec3 x = Vec3::Zero();
    for (int i = 0; i < 4; ++i) x += rule.nodes[k][i] * t[i];
    out.push_back({x, rule.weights[k] * vol});
  }
  return out;
}

Rearrangement::Rearrangement(std::vector<WeightedValue> samples) {
  for (auto& s : samples) s.value = std::abs(s.value);
  samples.erase(std::remove_if(samples.begin(), samples.end(), [](const WeightedValue& s) { return !(s.weight > 0); }),
                samples.end());
  std::sort(samples.begin(), samples.end(), [](const WeightedValue& a, const WeightedValue& b) {
    return a.value != b.value ? a.value > b.value : a.weight > b.weight;
  });
  double t = 0;
  for (const auto& s : samples) {
    t += s.weight;
    if (!values_.empty() && values_.back() == s.value) {
      ends_.back() = t;
    } else {
      values_.push_back(s.value);
      ends_.push_back(t);
    }
  }
}

double Rearrangement::operator()(double s) const {
  if (s < 0) return values_.empty() ? 0.0 : values_.front();
  size_t k = std::upper_bound(ends_.begin(), ends_.end(), s) - ends_.begin();
  return k < values_.size() ? values_[k] : 0.0;
}

double Rearrangement::maximal(double s) const {
  if (!(s > 0)) return values_.empty() ? 0.0 : values_.front();
  double integral = 0, prev = 0;
  for (size_t k = 0; k < values_.size() && prev < s; ++k) {
    integral += values_[k] * (std::min(ends_[k], s) - prev);
    prev = ends_[k];
  }
  return integral / s;
}

RINorm RINorm::lp(double p) {
  if (!(p >= 1)) throw ValidationError("L^p needs p >= 1");
  return {Kind::Lp, p, p};
}

RINorm RINorm::lorentz(double p, double q) {
  if (!(p >= 1) || !(q >= 1)) throw ValidationError("Lorentz norm needs p >= 1 and q >= 1");
  if (p == q) return lp(p);
  return {Kind::Lorentz, p, q};
}

RINorm RINorm::linf() { return {Kind::Linf, 0, 0}; }

RINorm RINorm::parse(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
  auto number = [&](size_t i) {
    try {
      size_t used = 0;
      double v = std::stod(parts.at(i), &used);
      if (used != parts[i].size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ValidationError("bad norm specification '" + spec + "'");
    }
  };
  if (parts.size() == 1 && parts[0] == "linf") return linf();
  if (parts.size() == 2 && parts[0] == "lp") return lp(number(1));
  if (parts.size() == 3 && parts[0] == "lorentz") return lorentz(number(1), number(2));
  throw ValidationError("bad norm specification '" + spec + "' (expected lp:P, lorentz:P:Q or linf)");
}

std::string RINorm::name() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::Lp: os << "lp:" << p; break;
    case Kind::Lorentz: os << "lorentz:" << p << ":" << q; break;
    case Kind::Linf: os << "linf"; break;
  }
  return os.str();
}

double RINorm::operator()(const Rearrangement& r) const {
  const auto& v = r.values();
  const auto& T = r.ends();
  if (v.empty()) return 0.0;
  if (kind == Kind::Linf) return v.front();
  // integrate t^{q/p - 1} f*(t)^q exactly over each step
  const double e = q / p;
  double sum = 0, prev = 0;
  for (size_t k = 0; k < v.size(); ++k) {
    if (v[k] > 0) sum += std::pow(v[k], q) * (std::pow(T[k], e) - std::pow(prev, e));
    prev = T[k];
  }
  return std::pow(sum / e, 1 / q);
}

double RINorm::operator()(const std::vector<WeightedValue>& samples) const {
  return (*this)(Rearrangement(samples));
}

double RINorm::fundamental(double s) const {
  if (!(s > 0)) return 0.0;
  if (kind == Kind::Linf) return 1.0;
  return std::pow(p / q, 1 / q) * std::pow(s, 1 / p);
}

double direct_lp(const std::vector<WeightedValue>& samples, double p) {
  double s = 0;
  for (const auto& x : samples) s += std::pow(std::abs(x.value), p) * x.weight;
  return std::pow(s, 1 / p);
}

RozumnyTable rozumny_check(const RINorm& norm, double M, double measure, const std::vector<double>& deltas) {
  RozumnyTable table;
  for (double d : deltas) {
    RozumnyRow row;
    row.delta = d;
    row.norm = norm(std::vector<WeightedValue>{{M, d * measure}, {0.0, (1 - d) * measure}});
    row.normalized = row.norm / measure;
    row.oracle = M * norm.fundamental(d * measure);
    table.rows.push_back(row);
  }
  table.monotone = table.rows.size() >= 2;
  for (size_t i = 1; i < table.rows.size(); ++i)
    if (!(table.rows[i].normalized < table.rows[i - 1].normalized)) table.monotone = false;
  return table;
}

double disk_polygon_area(const Vec2& center, double radius, const std::vector<Vec2>& polygon) {
  if (!(radius > 0) || polygon.size() < 3) return 0.0;
  const double r2 = radius * radius;
  auto cross = [](const Vec2& a, const Vec2& b) { return a(0) * b(1) - a(1) * b(0); };
  // signed area of the disk cut with the triangle (center, a, b)
  auto piece = [&](const Vec2& a, const Vec2& b) {
    auto part = [&](const Vec2& u, const Vec2& v) {
      Vec2 m = 0.5 * (u + v);
      if (m.squaredNorm() <= r2) return 0.5 * cross(u, v);
      return 0.5 * r2 * std::atan2(cross(u, v), u.dot(v));
    };
    Vec2 d = b - a;
    double A = d.squaredNorm(), B = a.dot(d), C = a.squaredNorm() - r2;
    std::vector<double> cuts = {0.0};
    double disc = B * B - A * C;
    if (A > 0 && disc > 0) {
      double s = std::sqrt(disc);
      for (double t : {(-B - s) / A, (-B + s) / A})
        if (t > 0 && t < 1) cuts.push_back(t);
    }
    cuts.push_back(1.0);
    double area = 0;
    for (size_t i = 0; i + 1 < cuts.size(); ++i) area += part(a + cuts[i] * d, a + cuts[i + 1] * d);
    return area;
  };
  double total = 0;
  for (size_t i = 0; i < polygon.size(); ++i)
    total += piece(polygon[i] - center, polygon[(i + 1) % polygon.size()] - center);
  return std::abs(total);
}

}  // namespace plsmooth
