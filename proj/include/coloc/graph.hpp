#ifndef COLOC_GRAPH_HPP
#define COLOC_GRAPH_HPP

#include <iosfwd>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "coloc/common.hpp"
#include "coloc/gaussian.hpp"
#include "coloc/models.hpp"

namespace coloc {

// Directed graph over robots and landmarks. Edges are ordered (from, to):
// observation edges run observer -> observed, communication edges run
// sender -> receiver.
class TopologyGraph {
 public:
  using Edge = std::pair<EntityId, EntityId>;

  TopologyGraph() = default;
  TopologyGraph(int n_robots, int n_landmarks);

  void add_node(EntityId node) { nodes_.insert(node); }
  void add_edge(EntityId from, EntityId to);
  bool has_edge(EntityId from, EntityId to) const { return edges_.count({from, to}) > 0; }

  const std::set<EntityId>& nodes() const { return nodes_; }
  const std::set<Edge>& edges() const { return edges_; }
  std::vector<EntityId> in_neighbors(EntityId node) const;
  std::vector<EntityId> out_neighbors(EntityId node) const;

 private:
  std::set<EntityId> nodes_;
  std::set<Edge> edges_;
};

// Robots with a directed path to robot i in the communication graph.
std::set<int> super_neighborhood(const TopologyGraph& gc, int robot);
// Same, including robot i itself.
std::set<int> super_neighborhood_inclusive(const TopologyGraph& gc, int robot);

bool is_weakly_connected(const TopologyGraph& g);

struct BoundednessResult {
  bool bounded = false;
  TopologyGraph merged;
};

// Unions observation edge sets over the inclusive super neighborhood of the
// robot and tests weak connectivity of the result.
BoundednessResult boundedness_predicate(const std::map<int, TopologyGraph>& obs_graphs,
                                        const TopologyGraph& gc, int robot);
// Convenience form: a single combined observation graph, partitioned by the
// observing (tail) robot.
BoundednessResult boundedness_predicate(const TopologyGraph& obs_combined,
                                        const TopologyGraph& gc, int robot);

// Edge-by-robot incidence matrix: one row per edge, one column per robot node
// (sorted by id), -1 at the tail and +1 at the head; landmark columns are
// removed. Full column rank is equivalent to weak connectivity when a
// landmark participates; returns a 0-column matrix for an edgeless graph.
Eigen::MatrixXd incidence_reduced(const TopologyGraph& g);

bool incidence_full_column_rank(const TopologyGraph& g, double tol = 1e-9);

// Text form, one edge per line "from to", robots as 1-based integers and
// landmarks as L (or L2, L3, ... beyond the first). Lines starting with #
// are comments. `nodes R L` declares counts so isolated nodes survive.
TopologyGraph parse_edge_list(std::istream& in);
void write_edge_list(std::ostream& out, const TopologyGraph& g);
std::string entity_token(EntityId id);
EntityId parse_entity_token(const std::string& token);

// Covariance upper-bound recursion over the stacked 2N position state.
struct UpperBoundState {
  Eigen::MatrixXd psi;      // 2N x 2N
  Eigen::MatrixXd q_check;  // (dt)^2 max(sigma_u^2, u_max^2 sigma_theta^2) I
};

UpperBoundState make_upper_bound(int n_robots, const Eigen::MatrixXd& psi0, double dt,
                                 double sigma_u_sq, double u_max, double sigma_theta_sq);

UpperBoundState psi_propagate(const UpperBoundState& ub);
UpperBoundState psi_observe(const UpperBoundState& ub, const Eigen::MatrixXd& h_check,
                            const Eigen::MatrixXd& r_check);
UpperBoundState psi_communicate(const std::vector<UpperBoundState>& ubs, const CIWeights& w);

// Stacked observation matrix for one robot: rows of -I2 at the observer block
// and +I2 at observed-robot blocks (landmark targets contribute only the
// observer block).
Eigen::MatrixXd stacked_h_check(int n_robots, int observer,
                                const std::vector<EntityId>& targets);

// Scalar bound alpha with R_check = alpha * I: the largest eigenvalue the
// rotated observation noise plus the orientation-error term can reach inside
// a workspace of radius p_max.
double r_check_alpha(double sigma_theta_sq, double p_max, const Eigen::Matrix2d& r_v);

// Numeric verification that alpha*I dominates R_theta + R_v over sampled
// orientations and worst-case in-workspace geometry.
bool verify_r_check(double alpha, double sigma_theta_sq, double p_max,
                    const Eigen::Matrix2d& r_v, int samples = 64);

}  // namespace coloc

#endif
