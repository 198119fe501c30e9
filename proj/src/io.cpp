#include "otlab/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace otlab {

namespace {

using nlohmann::json;

json vector_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json points_json(const PointSet& p) {
  json out = json::array();
  for (Eigen::Index i = 0; i < p.cols(); ++i) out.push_back(vector_json(p.col(i)));
  return out;
}

}  // namespace

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const std::string& text, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path);
  out << text;
  if (!out) throw InvalidInput("failed writing " + path);
}

std::string measure_to_json(const DiscreteMeasure& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.size(); ++i)
    out.push_back({{"point", vector_json(m.point(i))}, {"weight", m.weights()(i)}});
  return out.dump(1) + "\n";
}

DiscreteMeasure measure_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (!j.is_array() || j.empty()) throw InvalidInput("measure must be a nonempty array");
    const auto d = static_cast<Eigen::Index>(j[0].at("point").size());
    PointSet pts(d, static_cast<Eigen::Index>(j.size()));
    Eigen::VectorXd w(pts.cols());
    for (Eigen::Index i = 0; i < pts.cols(); ++i) {
      const auto& atom = j[static_cast<std::size_t>(i)];
      const Eigen::VectorXd p = vector_from(atom.at("point"));
      if (p.size() != d) throw InvalidInput("atoms have different dimensions");
      pts.col(i) = p;
      w(i) = atom.at("weight").get<double>();
    }
    return DiscreteMeasure(std::move(pts), std::move(w));
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed measure: ") + e.what());
  }
}

void write_measure(const DiscreteMeasure& m, const std::string& path) {
  write_text(measure_to_json(m), path);
}

DiscreteMeasure read_measure(const std::string& path) { return measure_from_json(read_text(path)); }

void write_plan(const DiscretePlan& plan, const std::string& path) {
  std::ostringstream os;
  os << json{{"rows", vector_json(plan.row_marginal())}, {"cols", vector_json(plan.col_marginal())}}
            .dump()
     << '\n';
  char buf[96];
  for (const auto& e : plan.entries()) {
    std::snprintf(buf, sizeof buf, "%ld %ld %.17g\n", static_cast<long>(e.row),
                  static_cast<long>(e.col), e.mass);
    os << buf;
  }
  write_text(os.str(), path);
}

DiscretePlan read_plan(const std::string& path) {
  std::istringstream in(read_text(path));
  std::string header;
  std::getline(in, header);
  try {
    const json h = json::parse(header);
    std::vector<PlanEntry> entries;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream ls(line);
      long i = 0, j = 0;
      double m = 0;
      if (!(ls >> i >> j >> m)) throw InvalidInput("malformed plan line: " + line);
      entries.push_back({i, j, m});
    }
    return DiscretePlan(vector_from(h.at("rows")), vector_from(h.at("cols")), std::move(entries));
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed plan header: ") + e.what());
  }
}

std::string semidiscrete_to_json(const SemiDiscreteResult& r) {
  const auto& d = r.decomposition;
  json out{{"sites", points_json(r.potentials.sites)},
           {"potentials", vector_json(r.potentials.values)},
           {"power_weights", vector_json(power_weights(r.potentials))},
           {"masses", vector_json(d.masses)},
           {"barycenters", points_json(d.barycenters)},
           {"second_moments", vector_json(d.second_moments)},
           {"diameters", vector_json(d.diameters)},
           {"iterations", r.iterations},
           {"residual", r.residual},
           {"wall_ms", r.wall_ms}};
  return out.dump(1) + "\n";
}

}  // namespace otlab
