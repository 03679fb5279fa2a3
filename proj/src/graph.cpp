#include "coloc/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <istream>
#include <ostream>
#include <sstream>

namespace coloc {

TopologyGraph::TopologyGraph(int n_robots, int n_landmarks) {
  for (int i = 0; i < n_robots; ++i) nodes_.insert(EntityId::robot(i));
  for (int k = 0; k < n_landmarks; ++k) nodes_.insert(EntityId::landmark(k));
}

void TopologyGraph::add_edge(EntityId from, EntityId to) {
  if (from == to) throw ConfigError("self-loop edge");
  nodes_.insert(from);
  nodes_.insert(to);
  edges_.insert({from, to});
}

std::vector<EntityId> TopologyGraph::in_neighbors(EntityId node) const {
  std::vector<EntityId> out;
  for (const auto& [from, to] : edges_) {
    if (to == node) out.push_back(from);
  }
  return out;
}

std::vector<EntityId> TopologyGraph::out_neighbors(EntityId node) const {
  std::vector<EntityId> out;
  for (const auto& [from, to] : edges_) {
    if (from == node) out.push_back(to);
  }
  return out;
}

std::set<int> super_neighborhood(const TopologyGraph& gc, int robot) {
  const EntityId target = EntityId::robot(robot);
  if (gc.nodes().count(target) == 0) throw UnknownNode();
  // Backward reachability: walk reversed edges from the robot.
  std::set<EntityId> seen{target};
  std::deque<EntityId> queue{target};
  while (!queue.empty()) {
    EntityId cur = queue.front();
    queue.pop_front();
    for (EntityId pred : gc.in_neighbors(cur)) {
      if (seen.insert(pred).second) queue.push_back(pred);
    }
  }
  std::set<int> result;
  for (EntityId node : seen) {
    if (node.is_robot() && node.index != robot) result.insert(node.index);
  }
  return result;
}

std::set<int> super_neighborhood_inclusive(const TopologyGraph& gc, int robot) {
  std::set<int> s = super_neighborhood(gc, robot);
  s.insert(robot);
  return s;
}

bool is_weakly_connected(const TopologyGraph& g) {
  if (g.nodes().empty()) throw ConfigError("connectivity of an empty node set");
  if (g.nodes().size() == 1) return true;
  std::set<EntityId> seen{*g.nodes().begin()};
  std::deque<EntityId> queue{*g.nodes().begin()};
  while (!queue.empty()) {
    EntityId cur = queue.front();
    queue.pop_front();
    for (const auto& [from, to] : g.edges()) {
      EntityId next;
      if (from == cur) next = to;
      else if (to == cur) next = from;
      else continue;
      if (seen.insert(next).second) queue.push_back(next);
    }
  }
  return seen.size() == g.nodes().size();
}

BoundednessResult boundedness_predicate(const std::map<int, TopologyGraph>& obs_graphs,
                                        const TopologyGraph& gc, int robot) {
  BoundednessResult result;
  for (EntityId node : gc.nodes()) result.merged.add_node(node);
  for (const auto& [r, g] : obs_graphs) {
    for (EntityId node : g.nodes()) result.merged.add_node(node);
  }
  for (int j : super_neighborhood_inclusive(gc, robot)) {
    auto it = obs_graphs.find(j);
    if (it == obs_graphs.end()) continue;
    for (const auto& [from, to] : it->second.edges()) {
      result.merged.add_edge(from, to);
    }
  }
  result.bounded = is_weakly_connected(result.merged);
  return result;
}

BoundednessResult boundedness_predicate(const TopologyGraph& obs_combined,
                                        const TopologyGraph& gc, int robot) {
  std::map<int, TopologyGraph> per_robot;
  for (EntityId node : obs_combined.nodes()) {
    if (node.is_robot()) {
      per_robot[node.index] = TopologyGraph();
      for (EntityId n : obs_combined.nodes()) per_robot[node.index].add_node(n);
    }
  }
  for (const auto& [from, to] : obs_combined.edges()) {
    if (from.is_robot()) per_robot[from.index].add_edge(from, to);
  }
  return boundedness_predicate(per_robot, gc, robot);
}

Eigen::MatrixXd incidence_reduced(const TopologyGraph& g) {
  std::vector<EntityId> robots;
  for (EntityId node : g.nodes()) {
    if (node.is_robot()) robots.push_back(node);
  }
  std::map<EntityId, int> col;
  for (size_t i = 0; i < robots.size(); ++i) col[robots[i]] = static_cast<int>(i);

  const int m = static_cast<int>(g.edges().size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m, static_cast<int>(robots.size()));
  int row = 0;
  for (const auto& [from, to] : g.edges()) {
    if (from.is_robot()) d(row, col[from]) = -1.0;
    if (to.is_robot()) d(row, col[to]) = 1.0;
    ++row;
  }
  return d;
}

bool incidence_full_column_rank(const TopologyGraph& g, double tol) {
  Eigen::MatrixXd d = incidence_reduced(g);
  if (d.cols() == 0) return true;  // no robots: vacuous
  if (d.rows() == 0) return false;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(d);
  return svd.rank() == d.cols() &&
         svd.singularValues().minCoeff() > tol * svd.singularValues().maxCoeff();
}

namespace {

EntityId parse_token(const std::string& tok, int line_no) {
  if (tok.empty()) throw MalformedLine("empty token at line " + std::to_string(line_no));
  if (tok[0] == 'L' || tok[0] == 'l') {
    if (tok.size() == 1) return EntityId::landmark(0);
    try {
      return EntityId::landmark(std::stoi(tok.substr(1)) - 1);
    } catch (const std::exception&) {
      throw MalformedLine("bad landmark token '" + tok + "' at line " + std::to_string(line_no));
    }
  }
  try {
    int id = std::stoi(tok);
    if (id < 1) throw MalformedLine("robot ids are 1-based, line " + std::to_string(line_no));
    return EntityId::robot(id - 1);
  } catch (const MalformedLine&) {
    throw;
  } catch (const std::exception&) {
    throw MalformedLine("bad node token '" + tok + "' at line " + std::to_string(line_no));
  }
}

}  // namespace

EntityId parse_entity_token(const std::string& token) { return parse_token(token, 0); }

TopologyGraph parse_edge_list(std::istream& in) {
  TopologyGraph g;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    std::string a, b;
    if (!(ls >> a)) continue;
    if (a == "nodes") {
      int robots = 0, landmarks = 0;
      if (!(ls >> robots >> landmarks)) {
        throw MalformedLine("bad nodes directive at line " + std::to_string(line_no));
      }
      for (int i = 0; i < robots; ++i) g.add_node(EntityId::robot(i));
      for (int k = 0; k < landmarks; ++k) g.add_node(EntityId::landmark(k));
      continue;
    }
    if (!(ls >> b)) {
      throw MalformedLine("expected two tokens at line " + std::to_string(line_no));
    }
    std::string extra;
    if (ls >> extra) {
      throw MalformedLine("trailing token at line " + std::to_string(line_no));
    }
    g.add_edge(parse_token(a, line_no), parse_token(b, line_no));
  }
  return g;
}

std::string entity_token(EntityId id) {
  if (id.is_robot()) return std::to_string(id.index + 1);
  return id.index == 0 ? "L" : "L" + std::to_string(id.index + 1);
}

void write_edge_list(std::ostream& out, const TopologyGraph& g) {
  int robots = 0, landmarks = 0;
  for (EntityId node : g.nodes()) {
    if (node.is_robot()) robots = std::max(robots, node.index + 1);
    else landmarks = std::max(landmarks, node.index + 1);
  }
  out << "nodes " << robots << " " << landmarks << "\n";
  for (const auto& [from, to] : g.edges()) {
    out << entity_token(from) << " " << entity_token(to) << "\n";
  }
}

UpperBoundState make_upper_bound(int n_robots, const Eigen::MatrixXd& psi0, double dt,
                                 double sigma_u_sq, double u_max, double sigma_theta_sq) {
  if (psi0.rows() != 2 * n_robots || psi0.cols() != 2 * n_robots) {
    throw DimensionMismatch("psi0 must be 2N x 2N");
  }
  UpperBoundState ub;
  ub.psi = symmetrize(psi0);
  ub.q_check = dt * dt * std::max(sigma_u_sq, u_max * u_max * sigma_theta_sq) *
               Eigen::MatrixXd::Identity(2 * n_robots, 2 * n_robots);
  return ub;
}

UpperBoundState psi_propagate(const UpperBoundState& ub) {
  UpperBoundState next = ub;
  next.psi = symmetrize(ub.psi + ub.q_check);
  return next;
}

UpperBoundState psi_observe(const UpperBoundState& ub, const Eigen::MatrixXd& h_check,
                            const Eigen::MatrixXd& r_check) {
  if (h_check.cols() != ub.psi.rows() || h_check.rows() != r_check.rows() ||
      r_check.rows() != r_check.cols()) {
    throw DimensionMismatch("psi_observe dimensions disagree");
  }
  auto psi_inv = try_spd_inverse(ub.psi);
  if (!psi_inv) throw SingularCovariance("psi not invertible");
  auto r_inv = try_spd_inverse(r_check);
  if (!r_inv) throw SingularCovariance("r_check not invertible");
  Eigen::MatrixXd info = *psi_inv + h_check.transpose() * *r_inv * h_check;
  auto psi_next = try_spd_inverse(info);
  if (!psi_next) throw SingularCovariance("psi update lost rank");
  UpperBoundState next = ub;
  next.psi = symmetrize(*psi_next);
  return next;
}

UpperBoundState psi_communicate(const std::vector<UpperBoundState>& ubs, const CIWeights& w) {
  if (ubs.empty()) throw DimensionMismatch("psi_communicate with no states");
  if (w.size() != static_cast<int>(ubs.size())) throw WeightMismatch();
  const Eigen::Index dim = ubs.front().psi.rows();
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(dim, dim);
  for (size_t k = 0; k < ubs.size(); ++k) {
    if (ubs[k].psi.rows() != dim) throw DimensionMismatch("psi dimensions disagree");
    auto inv = try_spd_inverse(ubs[k].psi);
    if (!inv) throw SingularCovariance("psi not invertible in CI");
    info += w[static_cast<int>(k)] * *inv;
  }
  auto fused = try_spd_inverse(info);
  if (!fused) throw DegenerateFusion();
  UpperBoundState next = ubs.front();
  next.psi = symmetrize(*fused);
  return next;
}

Eigen::MatrixXd stacked_h_check(int n_robots, int observer,
                                const std::vector<EntityId>& targets) {
  const int m = static_cast<int>(targets.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(2 * m, 2 * n_robots);
  for (int k = 0; k < m; ++k) {
    h.block<2, 2>(2 * k, 2 * observer) = -Eigen::Matrix2d::Identity();
    const EntityId t = targets[static_cast<size_t>(k)];
    if (t.is_robot()) {
      if (t.index < 0 || t.index >= n_robots) throw IndexOutOfRange("target robot id");
      h.block<2, 2>(2 * k, 2 * t.index) = Eigen::Matrix2d::Identity();
    }
  }
  return h;
}

double r_check_alpha(double sigma_theta_sq, double p_max, const Eigen::Matrix2d& r_v) {
  // Orientation error enters through C^T J (target - observer); its norm is
  // capped by the workspace diameter 2 p_max.
  const double theta_term = sigma_theta_sq * (2.0 * p_max) * (2.0 * p_max);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(symmetrize(r_v));
  return theta_term + es.eigenvalues().maxCoeff();
}

bool verify_r_check(double alpha, double sigma_theta_sq, double p_max,
                    const Eigen::Matrix2d& r_v, int samples) {
  const Eigen::Matrix2d j = skew_j();
  for (int k = 0; k < samples; ++k) {
    const double theta = -M_PI + 2.0 * M_PI * (k + 0.5) / samples;
    const Eigen::Matrix2d ct = rotation(theta).transpose();
    for (int dir = 0; dir < samples; ++dir) {
      const double ang = 2.0 * M_PI * dir / samples;
      const Eigen::Vector2d disp =
          2.0 * p_max * Eigen::Vector2d(std::cos(ang), std::sin(ang));
      const Eigen::Vector2d u = ct * j * disp;
      const Eigen::Matrix2d r_theta = sigma_theta_sq * u * u.transpose();
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(symmetrize(r_theta + r_v));
      if (es.eigenvalues().maxCoeff() > alpha + 1e-12) return false;
    }
  }
  return true;
}

}  // namespace coloc
