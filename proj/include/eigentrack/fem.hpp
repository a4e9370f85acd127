#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace eigentrack {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

/// Structured P1 triangulation of the unit square with homogeneous Dirichlet
/// boundary. Node (i, j) sits at (i h, j h), h = 1 / (mesh_n - 1); every cell
/// is split along its (i, j)-(i+1, j+1) diagonal.
class Mesh {
public:
    explicit Mesh(int mesh_n);

    [[nodiscard]] int mesh_n() const { return mesh_n_; }
    [[nodiscard]] double h() const { return 1.0 / (mesh_n_ - 1); }
    [[nodiscard]] int num_nodes() const { return mesh_n_ * mesh_n_; }
    [[nodiscard]] int num_dofs() const { return num_dofs_; }

    [[nodiscard]] Eigen::Vector2d node(int id) const
    {
        return {(id % mesh_n_) * h(), (id / mesh_n_) * h()};
    }
    /// Interior dof index of node `id`, or -1 for boundary nodes.
    [[nodiscard]] int dof(int id) const { return dof_[static_cast<std::size_t>(id)]; }
    /// Node ids of the interior dofs, in dof order.
    [[nodiscard]] const std::vector<int>& dof_nodes() const { return dof_nodes_; }
    /// Counter-clockwise node triples.
    [[nodiscard]] const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }

    /// Stable identifier of the discretization, stored alongside cached snapshots.
    [[nodiscard]] std::string fingerprint() const;

private:
    int mesh_n_;
    int num_dofs_ = 0;
    std::vector<int> dof_;
    std::vector<int> dof_nodes_;
    std::vector<std::array<int, 3>> triangles_;
};

/// Throws ValidationError for mesh_n < 3.
Mesh build_mesh(int mesh_n);

/// A_pq = sum_T |T| grad(phi_q)^T c grad(phi_p) over interior basis functions.
SparseMatrix assemble_stiffness(const Mesh& mesh, const Eigen::Matrix2d& c);

/// B_pq = integral of phi_p phi_q over interior basis functions.
SparseMatrix assemble_mass(const Mesh& mesh);

/// Mass matrix over all nodes, boundary included (no Dirichlet elimination).
SparseMatrix assemble_full_mass(const Mesh& mesh);

} // namespace eigentrack
