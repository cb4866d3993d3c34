#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "fdelab/error.hpp"

namespace fdelab {

enum class Shape { Interval, Radial, Polar2d };

std::string_view to_string(Shape shape) noexcept;
Shape shape_from_string(std::string_view name);

/// Serializable description of a grid. `n` counts interior radial (or
/// interval) nodes; `n_theta` is only meaningful for Polar2d.
struct GridDescriptor {
    Shape shape = Shape::Interval;
    int dim = 1;
    double a = 0.0;
    double b = 1.0;
    std::size_t n = 64;
    std::size_t n_theta = 1;

    static GridDescriptor interval(double a, double b, std::size_t n);
    static GridDescriptor radial(int dim, double a, double b, std::size_t n);
    static GridDescriptor polar2d(double a, double b, std::size_t n_r, std::size_t n_theta);

    friend bool operator==(const GridDescriptor&, const GridDescriptor&) = default;
};

// One stiffness edge of the discrete Dirichlet form. `j < 0` marks an edge to
// a Dirichlet boundary node (value identically zero).
struct StiffnessEdge {
    std::ptrdiff_t i;
    std::ptrdiff_t j;
    double weight;
};

/// Uniform finite-difference / finite-volume discretization of an interval,
/// a radially reduced ball or annulus in dimension N, or a 2-D polar annulus.
///
/// The discrete Laplacian is -W^{-1} K where W holds the cell measures of the
/// interior nodes and K is the symmetric stiffness matrix assembled from
/// `edges()`. This makes the operator symmetric in the quadrature inner product
/// and gives exact discrete integration by parts. Radial reductions omit the
/// surface-area constant of the unit sphere.
class Grid {
public:
    static std::shared_ptr<const Grid> build(const GridDescriptor& desc);

    const GridDescriptor& descriptor() const noexcept { return desc_; }
    Shape shape() const noexcept { return desc_.shape; }
    int dim() const noexcept { return desc_.dim; }
    double a() const noexcept { return desc_.a; }
    double b() const noexcept { return desc_.b; }

    /// Number of unknowns (interior nodes, all angles for Polar2d).
    std::size_t size() const noexcept { return weights_.size(); }
    std::size_t n_radial() const noexcept { return radii_.size(); }
    std::size_t n_theta() const noexcept { return desc_.n_theta; }
    double h() const noexcept { return h_; }
    double h_theta() const noexcept { return h_theta_; }

    /// Radial (or x) coordinate per interior radial index.
    std::span<const double> radii() const noexcept { return radii_; }
    /// Coordinate of each unknown: x or r; for Polar2d r of the node.
    double radius_of(std::size_t k) const noexcept { return radii_[radial_index(k)]; }
    double theta_of(std::size_t k) const noexcept;
    std::size_t radial_index(std::size_t k) const noexcept {
        return desc_.shape == Shape::Polar2d ? k / desc_.n_theta : k;
    }
    std::size_t index(std::size_t i_r, std::size_t j_theta) const noexcept {
        return i_r * desc_.n_theta + j_theta;
    }

    std::span<const double> weights() const noexcept { return weights_; }
    /// Measure carried by the Dirichlet boundary half-cells; interior plus
    /// boundary weights sum to the (reduced) measure of the domain.
    double boundary_weight() const noexcept { return boundary_weight_; }
    double measure() const noexcept;

    std::span<const StiffnessEdge> edges() const noexcept { return edges_; }
    const Eigen::SparseMatrix<double>& stiffness() const noexcept { return stiffness_; }

    /// Solves K x = rhs with the cached factorization.
    Eigen::VectorXd solve_stiffness(const Eigen::VectorXd& rhs) const;

private:
    explicit Grid(const GridDescriptor& desc);

    GridDescriptor desc_;
    double h_ = 0.0;
    double h_theta_ = 0.0;
    double boundary_weight_ = 0.0;
    std::vector<double> radii_;
    std::vector<double> weights_;
    std::vector<StiffnessEdge> edges_;
    Eigen::SparseMatrix<double> stiffness_;
    std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> factor_;
};

using GridPtr = std::shared_ptr<const Grid>;

GridPtr build_grid(const GridDescriptor& desc);

/// Nodal values of a scalar function on the interior nodes of a grid.
class Field {
public:
    Field() = default;
    explicit Field(GridPtr grid);
    Field(GridPtr grid, std::vector<double> values);

    template <class F>
    static Field from_function(GridPtr grid, F&& f) {
        Field out(grid);
        for (std::size_t k = 0; k < out.size(); ++k)
            out.values_[k] = f(grid->radius_of(k), grid->theta_of(k));
        return out;
    }

    const GridPtr& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }
    double operator[](std::size_t k) const noexcept { return values_[k]; }
    double& operator[](std::size_t k) noexcept { return values_[k]; }

    Eigen::Map<const Eigen::VectorXd> vec() const {
        return {values_.data(), static_cast<Eigen::Index>(values_.size())};
    }
    Eigen::Map<Eigen::VectorXd> vec() {
        return {values_.data(), static_cast<Eigen::Index>(values_.size())};
    }

    bool is_finite() const noexcept;
    bool is_zero() const noexcept;
    double min() const noexcept;
    double max() const noexcept;

    Field& operator+=(const Field& other);
    Field& operator-=(const Field& other);
    Field& operator*=(double c) noexcept;

    friend Field operator+(Field lhs, const Field& rhs) { return lhs += rhs; }
    friend Field operator-(Field lhs, const Field& rhs) { return lhs -= rhs; }
    friend Field operator*(Field lhs, double c) { return lhs *= c; }
    friend Field operator*(double c, Field rhs) { return rhs *= c; }

private:
    GridPtr grid_;
    std::vector<double> values_;
};

/// Throws GridMismatch unless both fields live on the same grid.
void require_same_grid(const Field& lhs, const Field& rhs);

class LaplaceOperator {
public:
    explicit LaplaceOperator(GridPtr grid);

    const GridPtr& grid() const noexcept { return grid_; }

    /// Discrete Laplacian with homogeneous Dirichlet data.
    Field apply(const Field& w) const;
    /// Returns g with -Δg = f and zero boundary values.
    Field solve_poisson(const Field& f) const;
    /// Dirichlet form <-Δw, w> evaluated as w^T K w.
    double dirichlet_form(const Field& w) const;

private:
    GridPtr grid_;
};

Field apply_laplacian(const LaplaceOperator& op, const Field& w);
Field solve_poisson(const LaplaceOperator& op, const Field& f);

/// Quadrature pairing sum_k W_k f_k g_k.
double inner(const Field& f, const Field& g);

/// Lowest generalized eigenpairs of K v = mu W v, returned W-orthonormal and
/// sorted ascending. Exact for the discrete operator (separable in the polar
/// case).
struct DirichletMode {
    double eigenvalue;
    Field vector;
};
std::vector<DirichletMode> dirichlet_modes(const GridPtr& grid, std::size_t count);

/// First Dirichlet eigenvector by inverse power iteration on the Poisson
/// solve; positive, normalized to unit L2 norm.
Field first_eigenvector(const GridPtr& grid, double tol = 1e-12, int max_iter = 2000);

/// Solver for (c K + diag(W d)) x = rhs with a fixed sparsity pattern,
/// reused across Newton iterations of one trajectory.
class ShiftedSolver {
public:
    explicit ShiftedSolver(GridPtr grid);
    Eigen::VectorXd solve(double stiffness_scale, std::span<const double> mass_diag,
                          const Eigen::VectorXd& rhs);

private:
    GridPtr grid_;
    Eigen::SparseMatrix<double> matrix_;
    std::vector<Eigen::Index> diag_slot_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
};

}  // namespace fdelab
