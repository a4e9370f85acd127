#include "eigentrack/fem.hpp"

#include <cmath>

#include "eigentrack/error.hpp"

namespace eigentrack {

Mesh::Mesh(int mesh_n) : mesh_n_(mesh_n)
{
    if (mesh_n < 3) {
        throw ValidationError("mesh_n must be >= 3, got " + std::to_string(mesh_n));
    }
    dof_.assign(static_cast<std::size_t>(num_nodes()), -1);
    for (int j = 1; j + 1 < mesh_n; ++j) {
        for (int i = 1; i + 1 < mesh_n; ++i) {
            int id = j * mesh_n + i;
            dof_[static_cast<std::size_t>(id)] = num_dofs_++;
            dof_nodes_.push_back(id);
        }
    }
    triangles_.reserve(static_cast<std::size_t>(2 * (mesh_n - 1) * (mesh_n - 1)));
    for (int j = 0; j + 1 < mesh_n; ++j) {
        for (int i = 0; i + 1 < mesh_n; ++i) {
            int sw = j * mesh_n + i;
            int se = sw + 1;
            int nw = sw + mesh_n;
            int ne = nw + 1;
            triangles_.push_back({sw, se, ne});
            triangles_.push_back({sw, ne, nw});
        }
    }
}

std::string Mesh::fingerprint() const
{
    return "unit-square/P1/diag-sw-ne/dirichlet/n=" + std::to_string(mesh_n_);
}

Mesh build_mesh(int mesh_n)
{
    return Mesh(mesh_n);
}

namespace {

struct Element {
    double area;
    Eigen::Matrix<double, 2, 3> grad; // columns: gradients of the three hat functions
};

Element element(const Mesh& mesh, const std::array<int, 3>& tri)
{
    Eigen::Vector2d p0 = mesh.node(tri[0]);
    Eigen::Vector2d p1 = mesh.node(tri[1]);
    Eigen::Vector2d p2 = mesh.node(tri[2]);
    double det = (p1.x() - p0.x()) * (p2.y() - p0.y()) - (p2.x() - p0.x()) * (p1.y() - p0.y());
    Element e;
    e.area = 0.5 * det;
    // grad(phi_a) = rot(opposite edge) / (2 |T|)
    e.grad.col(0) << p1.y() - p2.y(), p2.x() - p1.x();
    e.grad.col(1) << p2.y() - p0.y(), p0.x() - p2.x();
    e.grad.col(2) << p0.y() - p1.y(), p1.x() - p0.x();
    e.grad /= det;
    return e;
}

template <typename LocalMatrix>
SparseMatrix assemble(const Mesh& mesh, bool eliminate_boundary, LocalMatrix&& local)
{
    const int n = eliminate_boundary ? mesh.num_dofs() : mesh.num_nodes();
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(mesh.triangles().size() * 9);
    for (const auto& tri : mesh.triangles()) {
        Element e = element(mesh, tri);
        Eigen::Matrix3d k = local(e);
        for (int a = 0; a < 3; ++a) {
            int row = eliminate_boundary ? mesh.dof(tri[a]) : tri[a];
            if (row < 0) {
                continue;
            }
            for (int b = 0; b < 3; ++b) {
                int col = eliminate_boundary ? mesh.dof(tri[b]) : tri[b];
                if (col >= 0) {
                    triplets.emplace_back(row, col, k(a, b));
                }
            }
        }
    }
    SparseMatrix m(n, n);
    m.setFromTriplets(triplets.begin(), triplets.end());
    m.makeCompressed();
    return m;
}

Eigen::Matrix3d local_mass(const Element& e)
{
    Eigen::Matrix3d m = Eigen::Matrix3d::Constant(e.area / 12.0);
    m.diagonal().setConstant(e.area / 6.0);
    return m;
}

} // namespace

SparseMatrix assemble_stiffness(const Mesh& mesh, const Eigen::Matrix2d& c)
{
    if (c(0, 1) != c(1, 0) || !(c.trace() > 0.0) || !(c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0) > 0.0)) {
        throw ValidationError("stiffness assembly needs an SPD coefficient matrix");
    }
    SparseMatrix a = assemble(mesh, true, [&](const Element& e) -> Eigen::Matrix3d {
        return e.area * e.grad.transpose() * c * e.grad;
    });
    // Element matrices are symmetric only up to rounding; make the assembled
    // matrix exactly symmetric.
    SparseMatrix at = a.transpose();
    SparseMatrix sym = 0.5 * (a + at);
    sym.makeCompressed();
    return sym;
}

SparseMatrix assemble_mass(const Mesh& mesh)
{
    return assemble(mesh, true, local_mass);
}

SparseMatrix assemble_full_mass(const Mesh& mesh)
{
    return assemble(mesh, false, local_mass);
}

} // namespace eigentrack
