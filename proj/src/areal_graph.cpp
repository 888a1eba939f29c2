#include "spreg/areal_graph.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace spreg {

namespace {

ArealGraph finalize(int n, std::vector<std::pair<int, int>> edges) {
  ArealGraph g;
  g.n = n;
  g.edges = std::move(edges);
  g.adjacency = Eigen::MatrixXd::Zero(n, n);
  g.neighbors.assign(static_cast<std::size_t>(n), {});
  for (const auto& [i, j] : g.edges) {
    g.adjacency(i, j) = 1.0;
    g.adjacency(j, i) = 1.0;
    g.neighbors[static_cast<std::size_t>(i)].push_back(j);
    g.neighbors[static_cast<std::size_t>(j)].push_back(i);
  }
  g.degrees = g.adjacency.rowwise().sum();
  return g;
}

}  // namespace

ArealGraph build_lattice(int rows, int cols) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("build_lattice: rows and cols must be >= 1");
  const int n = rows * cols;
  std::vector<std::pair<int, int>> edges;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int v = r * cols + c;
      if (c + 1 < cols) edges.emplace_back(v, v + 1);
      if (r + 1 < rows) edges.emplace_back(v, v + cols);
    }
  }
  ArealGraph g = finalize(n, std::move(edges));
  g.coord_x.resize(n);
  g.coord_y.resize(n);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int v = r * cols + c;
      g.coord_x(v) = cols > 1 ? static_cast<double>(c) / (cols - 1) - 0.5 : 0.0;
      g.coord_y(v) = rows > 1 ? static_cast<double>(r) / (rows - 1) - 0.5 : 0.0;
    }
  }
  return g;
}

Eigen::MatrixXd car_precision(const ArealGraph& graph, double rho, bool allow_laplacian) {
  const double hi = allow_laplacian ? 1.0 : std::nextafter(1.0, 0.0);
  if (rho < 0.0 || rho > hi)
    throw std::invalid_argument("car_precision: rho must lie in [0,1)");
  Eigen::MatrixXd q = -rho * graph.adjacency;
  q.diagonal() = graph.degrees;
  return q;
}

Eigen::MatrixXd laplacian(const ArealGraph& graph) { return car_precision(graph, 1.0, true); }

void write_edge_list(const ArealGraph& graph, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_edge_list: cannot open " + path);
  out << "n=" << graph.n << "\n";
  for (const auto& [i, j] : graph.edges) out << i << " " << j << "\n";
}

ArealGraph read_edge_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_edge_list: cannot open " + path);
  std::string header;
  std::getline(in, header);
  if (header.rfind("n=", 0) != 0)
    throw std::runtime_error("read_edge_list: expected header 'n=<count>'");
  const int n = std::stoi(header.substr(2));
  if (n < 1) throw std::runtime_error("read_edge_list: invalid vertex count");
  std::vector<std::pair<int, int>> edges;
  int i, j;
  while (in >> i >> j) {
    if (i < 0 || j < 0 || i >= n || j >= n || i == j)
      throw std::runtime_error("read_edge_list: bad edge " + std::to_string(i) + " " +
                               std::to_string(j));
    if (i > j) std::swap(i, j);
    edges.emplace_back(i, j);
  }
  return finalize(n, std::move(edges));
}

}  // namespace spreg
