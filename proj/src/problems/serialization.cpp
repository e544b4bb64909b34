#include <nlohmann/json.hpp>

#include "perturbopt/problems.hpp"

namespace perturbopt {
namespace {

using nlohmann::json;

json vector_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

template <class M>
json matrix_json(const M& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(std::move(row));
  }
  return rows;
}

template <class M>
M matrix_from(const json& j, Eigen::Index cols_if_empty = 0) {
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : cols_if_empty;
  M m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != cols) throw InvalidArgument("ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

json arcs_json(const std::vector<std::pair<int, int>>& arcs) {
  json a = json::array();
  for (const auto& [u, v] : arcs) a.push_back({u, v});
  return a;
}

std::vector<std::pair<int, int>> arcs_from(const json& j) {
  std::vector<std::pair<int, int>> arcs;
  for (const auto& a : j) arcs.emplace_back(a.at(0).get<int>(), a.at(1).get<int>());
  return arcs;
}

}  // namespace

json polytope_to_json(const SolutionPolytope& poly) {
  json j;
  j["kind"] = kind_name(poly.kind());
  switch (poly.kind()) {
    case PolytopeKind::Permutahedron:
      j["n"] = poly.permutation_size();
      break;
    case PolytopeKind::DagPaths:
      j["n_nodes"] = poly.dag().n_nodes;
      j["source"] = poly.dag().source;
      j["sink"] = poly.dag().sink;
      j["arcs"] = arcs_json(poly.dag().arcs);
      break;
    case PolytopeKind::VspFlow:
      j["n_tasks"] = poly.vsp().n_tasks;
      j["compat"] = arcs_json(poly.vsp().compat);
      break;
    case PolytopeKind::Explicit:
      j["vertices"] = matrix_json(poly.vertices());
      break;
  }
  return j;
}

SolutionPolytope polytope_from_json(const json& doc) {
  const std::string kind = doc.at("kind").get<std::string>();
  if (kind == "permutahedron") return SolutionPolytope::permutahedron(doc.at("n").get<int>());
  if (kind == "dag_paths") {
    Dag dag;
    dag.n_nodes = doc.at("n_nodes").get<int>();
    dag.source = doc.at("source").get<int>();
    dag.sink = doc.at("sink").get<int>();
    dag.arcs = arcs_from(doc.at("arcs"));
    return SolutionPolytope::dag_paths(std::move(dag));
  }
  if (kind == "vsp_flow") {
    VspNetwork net;
    net.n_tasks = doc.at("n_tasks").get<int>();
    net.compat = arcs_from(doc.at("compat"));
    return SolutionPolytope::vsp_flow(std::move(net));
  }
  if (kind == "explicit") return SolutionPolytope::explicit_set(matrix_from<RowMatrix>(doc.at("vertices")));
  throw InvalidArgument("unknown polytope kind '" + kind + "'");
}

json to_json(const Instance& x) {
  json j;
  j["format"] = "perturbopt.instance";
  j["version"] = kInstanceFormatVersion;
  j["id"] = x.id;
  j["domain"] = domain_name(x.domain);
  j["partition"] = x.partition;
  j["dimension"] = x.dimension();
  j["scenario_seed"] = x.scenario_seed;
  j["polytope"] = polytope_to_json(*x.polytope);
  j["features"] = matrix_json(x.features);
  json data;
  switch (x.domain) {
    case Domain::Scheduling:
      data["release"] = vector_json(x.scheduling.release);
      data["processing"] = vector_json(x.scheduling.processing);
      break;
    case Domain::StoVsp:
      data["slack"] = vector_json(x.vsp.slack);
      data["delay_scale"] = vector_json(x.vsp.delay_scale);
      data["scenarios"] = matrix_json(x.vsp.scenarios);
      break;
    case Domain::Contextual:
      data["context"] = vector_json(x.contextual.context);
      data["noise"] = x.contextual.noise;
      data["xi"] = x.contextual.xi;
      break;
  }
  j["data"] = std::move(data);
  return j;
}

Instance instance_from_json(const json& doc) {
  if (doc.value("format", "") != "perturbopt.instance") {
    throw InvalidArgument("not an instance document");
  }
  if (doc.at("version").get<int>() != kInstanceFormatVersion) {
    throw InvalidArgument("unsupported instance format version");
  }
  Instance x;
  x.id = doc.at("id").get<std::uint64_t>();
  x.domain = parse_domain(doc.at("domain").get<std::string>());
  x.partition = doc.at("partition").get<int>();
  x.scenario_seed = doc.at("scenario_seed").get<std::uint64_t>();
  x.polytope = std::make_shared<SolutionPolytope>(polytope_from_json(doc.at("polytope")));
  x.features = matrix_from<Matrix>(doc.at("features"));
  if (x.features.rows() != x.dimension()) {
    throw DimensionError("feature rows do not match the polytope dimension");
  }
  const json& data = doc.at("data");
  switch (x.domain) {
    case Domain::Scheduling:
      x.scheduling.release = vector_from(data.at("release"));
      x.scheduling.processing = vector_from(data.at("processing"));
      break;
    case Domain::StoVsp:
      x.vsp.slack = vector_from(data.at("slack"));
      x.vsp.delay_scale = vector_from(data.at("delay_scale"));
      x.vsp.scenarios = matrix_from<RowMatrix>(data.at("scenarios"), x.partition);
      break;
    case Domain::Contextual:
      x.contextual.context = vector_from(data.at("context"));
      x.contextual.noise = data.at("noise").get<double>();
      x.contextual.xi = data.at("xi").get<double>();
      break;
  }
  return x;
}

}  // namespace perturbopt
